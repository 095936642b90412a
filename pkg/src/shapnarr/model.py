"""Gradient-boosted tree ensembles: parsing the JSON tree dump and inference.

The on-disk format is the per-tree JSON produced by XGBoost's
``dump_model(dump_format="json")`` together with a small metadata object::

    {"base_score": -0.47, "feature_names": ["Pclass", ...], "objective": "binary_logistic"}

``base_score`` is in margin (log-odds) units. A split node sends a value to
``yes`` when ``value < split_condition``, to ``no`` otherwise, and to
``missing`` when the value is absent.

Missing feature values are ``None`` in a feature vector. Batch routines take
2-D float arrays and use NaN for missing.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import ModelError, ModelParseError, ModelValidationError, UnsupportedOperationError

OBJECTIVES = ("binary_logistic", "regression")

FeatureVector = Sequence[Union[float, None]]
Source = Union[bytes, str, IO[bytes], IO[str]]

_FEATURE_ALIAS = re.compile(r"^f(\d+)$")


@dataclass(frozen=True)
class TreeNode:
    """One node of a tree; either a split or a leaf."""

    node_id: int
    feature_index: int | None = None
    threshold: float | None = None
    yes: int | None = None
    no: int | None = None
    missing: int | None = None
    leaf_value: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.leaf_value is not None

    def children(self) -> tuple[int, ...]:
        return () if self.is_leaf else (self.yes, self.no)


@dataclass(frozen=True)
class Tree:
    nodes: Mapping[int, TreeNode]
    root_id: int = 0

    def leaf_for(self, x: FeatureVector) -> float:
        node = self.nodes[self.root_id]
        while not node.is_leaf:
            value = x[node.feature_index]
            if value is None or value != value:
                node = self.nodes[node.missing]
            elif value < node.threshold:
                node = self.nodes[node.yes]
            else:
                node = self.nodes[node.no]
        return node.leaf_value

    def used_features(self) -> set[int]:
        return {n.feature_index for n in self.nodes.values() if not n.is_leaf}


@dataclass(frozen=True)
class _CompiledTree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    yes: np.ndarray
    no: np.ndarray
    missing: np.ndarray
    value: np.ndarray
    root: int
    depth: int


def _compile(tree: Tree) -> _CompiledTree:
    ids = sorted(tree.nodes)
    pos = {nid: i for i, nid in enumerate(ids)}
    n = len(ids)
    feature = np.full(n, -1, dtype=np.intp)
    threshold = np.zeros(n)
    yes = np.arange(n)
    no = np.arange(n)
    missing = np.arange(n)
    value = np.zeros(n)
    for nid in ids:
        node, i = tree.nodes[nid], pos[nid]
        if node.is_leaf:
            value[i] = node.leaf_value
        else:
            feature[i] = node.feature_index
            threshold[i] = node.threshold
            yes[i], no[i], missing[i] = pos[node.yes], pos[node.no], pos[node.missing]

    def depth(nid: int) -> int:
        node = tree.nodes[nid]
        return 0 if node.is_leaf else 1 + max(depth(node.yes), depth(node.no))

    return _CompiledTree(feature, threshold, yes, no, missing, value, pos[tree.root_id], depth(tree.root_id))


@dataclass(frozen=True)
class TreeEnsemble:
    """An immutable tree ensemble: ``margin = base_score + sum of tree leaves``."""

    trees: tuple[Tree, ...]
    base_score: float
    feature_names: tuple[str, ...]
    objective: str = "binary_logistic"
    labels: tuple[str, str] | None = None
    _compiled: tuple[_CompiledTree, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
        _validate_ensemble(self)
        object.__setattr__(self, "_compiled", tuple(_compile(t) for t in self.trees))

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def used_features(self) -> set[int]:
        used: set[int] = set()
        for tree in self.trees:
            used |= tree.used_features()
        return used


def _validate_tree(tree: Tree, tree_index: int, n_features: int) -> None:
    nodes = tree.nodes
    if tree.root_id not in nodes:
        raise ModelValidationError("root node missing", tree_index, tree.root_id)
    for nid, node in nodes.items():
        if node.node_id != nid:
            raise ModelValidationError("node keyed under the wrong id", tree_index, nid)
        if node.is_leaf:
            if not math.isfinite(node.leaf_value):
                raise ModelValidationError("leaf value is not finite", tree_index, nid)
            continue
        if node.feature_index is None or not 0 <= node.feature_index < n_features:
            raise ModelValidationError(
                f"feature index {node.feature_index} out of range [0, {n_features})", tree_index, nid
            )
        if node.threshold is None or math.isnan(node.threshold):
            raise ModelValidationError("split threshold missing", tree_index, nid)
        for child in (node.yes, node.no, node.missing):
            if child not in nodes:
                raise ModelValidationError(f"dangling child reference {child}", tree_index, nid)
        if node.missing not in (node.yes, node.no):
            raise ModelValidationError("missing branch must be the yes or the no child", tree_index, nid)

    # iterative DFS; a node seen twice means a cycle or a shared subtree
    seen: set[int] = set()
    stack = [tree.root_id]
    while stack:
        nid = stack.pop()
        if nid in seen:
            raise ModelValidationError("node reached more than once (cycle or shared subtree)", tree_index, nid)
        seen.add(nid)
        stack.extend(nodes[nid].children())
    unreachable = set(nodes) - seen
    if unreachable:
        raise ModelValidationError("node unreachable from root", tree_index, min(unreachable))


def _validate_ensemble(model: TreeEnsemble) -> None:
    if model.objective not in OBJECTIVES:
        raise ModelValidationError(f"unknown objective {model.objective!r}; expected one of {OBJECTIVES}")
    if not math.isfinite(model.base_score):
        raise ModelValidationError("base_score is not finite")
    if len(set(model.feature_names)) != len(model.feature_names):
        raise ModelValidationError("feature names are not unique")
    if model.labels is not None and len(model.labels) != 2:
        raise ModelValidationError("labels must name exactly two classes")
    for i, tree in enumerate(model.trees):
        _validate_tree(tree, i, model.n_features)


# --------------------------------------------------------------------------
# parsing


def _read_text(source: Source | Path) -> str:
    if isinstance(source, Path):
        source = source.read_bytes()
    elif hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            return source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ModelParseError("input is not valid UTF-8", exc.start) from exc
    return source


def _parse_json(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ModelParseError(f"malformed JSON in {what}: {exc.msg}", offset) from exc


def _feature_index(split: Any, names: Sequence[str], tree_index: int, node_id: int) -> int:
    if isinstance(split, str):
        if split in names:
            return names.index(split)
        m = _FEATURE_ALIAS.match(split)
        if m:
            return int(m.group(1))
    elif isinstance(split, int) and not isinstance(split, bool):
        return split
    raise ModelValidationError(f"unknown split feature {split!r}", tree_index, node_id)


def _number(obj: Mapping, key: str, tree_index: int, node_id: Any) -> float:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelValidationError(f"{key!r} must be a number, got {value!r}", tree_index, node_id)
    return float(value)


def _int_field(obj: Mapping, key: str, tree_index: int, node_id: Any) -> int:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ModelValidationError(f"{key!r} must be an integer node id, got {value!r}", tree_index, node_id)
    return value


def _parse_tree(raw: Any, tree_index: int, names: Sequence[str]) -> Tree:
    if not isinstance(raw, dict):
        raise ModelValidationError("tree must be a JSON object", tree_index)
    nodes: dict[int, TreeNode] = {}
    stack = [raw]
    while stack:
        obj = stack.pop()
        if not isinstance(obj, dict):
            raise ModelValidationError("node must be a JSON object", tree_index)
        nid = _int_field(obj, "nodeid", tree_index, None)
        if nid in nodes:
            raise ModelValidationError("duplicate node id", tree_index, nid)
        has_leaf, has_split = "leaf" in obj, "split" in obj
        if has_leaf == has_split:
            raise ModelValidationError("node must be exactly one of leaf or split", tree_index, nid)
        if has_leaf:
            nodes[nid] = TreeNode(nid, leaf_value=_number(obj, "leaf", tree_index, nid))
        else:
            nodes[nid] = TreeNode(
                nid,
                feature_index=_feature_index(obj["split"], names, tree_index, nid),
                threshold=_number(obj, "split_condition", tree_index, nid),
                yes=_int_field(obj, "yes", tree_index, nid),
                no=_int_field(obj, "no", tree_index, nid),
                missing=_int_field(obj, "missing", tree_index, nid),
            )
        children = obj.get("children", [])
        if not isinstance(children, list):
            raise ModelValidationError("'children' must be a list", tree_index, nid)
        stack.extend(reversed(children))
    return Tree(nodes=nodes, root_id=_int_field(raw, "nodeid", tree_index, None))


def _parse_meta(meta: Any) -> dict:
    if not isinstance(meta, dict):
        raise ModelValidationError("metadata must be a JSON object")
    names = meta.get("feature_names")
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise ModelValidationError("metadata 'feature_names' must be a list of strings")
    base = meta.get("base_score")
    if isinstance(base, bool) or not isinstance(base, (int, float)):
        raise ModelValidationError("metadata 'base_score' must be a number")
    objective = meta.get("objective")
    if objective not in OBJECTIVES:
        raise ModelValidationError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
    labels = meta.get("labels")
    if labels is not None and (
        not isinstance(labels, list) or len(labels) != 2 or not all(isinstance(s, str) for s in labels)
    ):
        raise ModelValidationError("metadata 'labels' must be a list of two strings")
    return {"feature_names": names, "base_score": float(base), "objective": objective, "labels": labels}


def load_model(dump: Source, meta: Source) -> TreeEnsemble:
    """Parse a JSON tree dump plus its metadata object into a validated ensemble.

    Unknown keys (``gain``, ``cover``, ``depth``, ...) are ignored.

    Raises:
        ModelParseError: malformed JSON; the message carries the byte offset.
        ModelValidationError: structural problems, naming tree and node.
    """
    info = _parse_meta(_parse_json(_read_text(meta), "metadata"))
    raw_trees = _parse_json(_read_text(dump), "model dump")
    if not isinstance(raw_trees, list):
        raise ModelValidationError("model dump must be a JSON array of trees")
    names = info["feature_names"]
    trees = tuple(_parse_tree(raw, i, names) for i, raw in enumerate(raw_trees))
    return TreeEnsemble(
        trees=trees,
        base_score=info["base_score"],
        feature_names=names,
        objective=info["objective"],
        labels=info["labels"],
    )


def load_model_files(model_path: str | Path, meta_path: str | Path) -> TreeEnsemble:
    return load_model(Path(model_path).read_bytes(), Path(meta_path).read_bytes())


def _node_to_json(tree: Tree, nid: int, depth: int, names: Sequence[str]) -> dict:
    node = tree.nodes[nid]
    if node.is_leaf:
        return {"nodeid": nid, "leaf": node.leaf_value}
    return {
        "nodeid": nid,
        "depth": depth,
        "split": names[node.feature_index],
        "split_condition": node.threshold,
        "yes": node.yes,
        "no": node.no,
        "missing": node.missing,
        "children": [_node_to_json(tree, c, depth + 1, names) for c in (node.yes, node.no)],
    }


def dump_model(model: TreeEnsemble) -> tuple[str, str]:
    """Serialize back to ``(dump_json, meta_json)``; inverse of :func:`load_model`."""
    names = model.feature_names
    dump = [_node_to_json(t, t.root_id, 0, names) for t in model.trees]
    meta = {
        "base_score": model.base_score,
        "feature_names": list(names),
        "objective": model.objective,
    }
    if model.labels is not None:
        meta["labels"] = list(model.labels)
    return json.dumps(dump, indent=1), json.dumps(meta, indent=2)


# --------------------------------------------------------------------------
# inference


def _check_length(model: TreeEnsemble, n: int) -> None:
    if n != model.n_features:
        raise ModelError(f"feature vector has length {n}, model expects {model.n_features}")


def predict_margin(model: TreeEnsemble, x: FeatureVector) -> float:
    """Raw score: base_score plus each tree's leaf, summed in tree order."""
    _check_length(model, len(x))
    margin = model.base_score
    for tree in model.trees:
        margin += tree.leaf_for(x)
    return margin


def to_array(rows: Iterable[FeatureVector]) -> np.ndarray:
    """Stack feature vectors into a float matrix, NaN for missing."""
    data = [[np.nan if v is None else float(v) for v in row] for row in rows]
    if not data:
        return np.empty((0, 0))
    return np.array(data, dtype=float)


def predict_margin_batch(model: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    """Vectorised :func:`predict_margin` over the rows of ``X`` (NaN = missing).

    Agrees bit-for-bit with the scalar path: leaves are accumulated onto
    ``base_score`` in tree order.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ModelError("expected a 2-D array of feature rows")
    _check_length(model, X.shape[1])
    m = X.shape[0]
    out = np.full(m, model.base_score)
    rows = np.arange(m)
    for ct in model._compiled:
        idx = np.full(m, ct.root, dtype=np.intp)
        for _ in range(ct.depth):
            feat = ct.feature[idx]
            active = feat >= 0
            if not active.any():
                break
            v = X[rows, np.where(active, feat, 0)]
            nxt = np.where(np.isnan(v), ct.missing[idx], np.where(v < ct.threshold[idx], ct.yes[idx], ct.no[idx]))
            idx = np.where(active, nxt, idx)
        out += ct.value[idx]
    return out


def sigmoid(margin: float) -> float:
    if margin >= 0:
        return 1.0 / (1.0 + math.exp(-margin))
    e = math.exp(margin)
    return e / (1.0 + e)


def predict_probability(model: TreeEnsemble, x: FeatureVector) -> float:
    if model.objective != "binary_logistic":
        raise UnsupportedOperationError(
            f"probability is undefined for objective {model.objective!r}; use the margin"
        )
    return sigmoid(predict_margin(model, x))
