"""Shapley attributions for a single prediction of a tree ensemble.

The value of a coalition S is interventional: the average model margin over
a background set, with the features in S pinned to the explained instance
and every other feature taken from the background row.

Attributions are on the margin (log-odds) scale, so that
``base_value + sum(phi) == margin`` holds exactly for the exact method.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ExactLimitError, ShapError
from .model import FeatureVector, TreeEnsemble, predict_margin, predict_margin_batch, to_array

EXACT_LIMIT = 20

# rows per call to the batch predictor
_BATCH_ROWS = 1 << 15


@dataclass(frozen=True)
class ShapResult:
    base_value: float
    phi: tuple[float, ...]
    predicted_margin: float
    method: str
    n_permutations: int = 0
    seed: int = 0
    exhaustive: bool = False
    std_error: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phi"] = list(self.phi)
        if self.std_error is not None:
            d["std_error"] = list(self.std_error)
        return d


class CoalitionValues:
    """Memoised interventional value function for one instance and background.

    Coalitions are boolean masks over features. Each distinct coalition is
    evaluated once; the value for a given mask does not depend on which other
    masks it was batched with, so results are reproducible under any
    evaluation order or thread layout.
    """

    def __init__(self, model: TreeEnsemble, x: FeatureVector, background: Sequence[FeatureVector]):
        n = model.n_features
        if len(x) != n:
            raise ShapError(f"instance has {len(x)} features, model expects {n}")
        if len(background) == 0:
            raise ShapError("background set is empty")
        for r, row in enumerate(background):
            if len(row) != n:
                raise ShapError(f"background row {r} has {len(row)} features, model expects {n}")
        self.model = model
        self.n = n
        self.x = to_array([x])[0] if n else np.empty(0)
        self.background = to_array(background) if n else np.empty((len(background), 0))
        self.margin = predict_margin(model, x)
        self._cache: dict[bytes, float] = {}

    def _compute(self, masks: np.ndarray) -> np.ndarray:
        """Values for a (c, n) boolean mask matrix, no caching."""
        n_bg = self.background.shape[0]
        out = np.empty(masks.shape[0])
        step = max(1, _BATCH_ROWS // n_bg)
        for start in range(0, masks.shape[0], step):
            chunk = masks[start : start + step]
            z = np.where(chunk[:, None, :], self.x[None, None, :], self.background[None, :, :])
            margins = predict_margin_batch(self.model, z.reshape(-1, self.n)).reshape(len(chunk), n_bg)
            for k, row in enumerate(margins):
                if chunk[k].all():
                    out[start + k] = self.margin
                elif row.min() == row.max():
                    # mean of identical values is that value; keeps dummy features at exactly zero
                    out[start + k] = row[0]
                else:
                    out[start + k] = math.fsum(row.tolist()) / n_bg
        return out

    def values(self, masks: np.ndarray) -> np.ndarray:
        masks = np.asarray(masks, dtype=bool).reshape(-1, self.n)
        keys = [np.packbits(m).tobytes() for m in masks]
        todo: dict[bytes, int] = {}
        for i, key in enumerate(keys):
            if key not in self._cache and key not in todo:
                todo[key] = i
        if todo:
            fresh = self._compute(masks[list(todo.values())])
            for key, v in zip(todo, fresh):
                self._cache[key] = float(v)
        return np.array([self._cache[k] for k in keys])

    def __call__(self, coalition: Iterable[int]) -> float:
        mask = np.zeros(self.n, dtype=bool)
        for j in coalition:
            if not 0 <= j < self.n:
                raise ShapError(f"coalition member {j} outside [0, {self.n})")
            mask[j] = True
        return float(self.values(mask[None, :])[0])


def value_function(
    model: TreeEnsemble, x: FeatureVector, s: Iterable[int], background: Sequence[FeatureVector]
) -> float:
    """Average margin with features in ``s`` taken from ``x`` and the rest from each background row."""
    return CoalitionValues(model, x, background)(s)


def shapley_weights(n: int) -> np.ndarray:
    """``w[s] = s! (n-s-1)! / n!`` for coalition sizes ``s = 0..n-1``."""
    return np.array([1.0 / (n * math.comb(n - 1, s)) for s in range(n)])


def exact_shap(
    model: TreeEnsemble,
    x: FeatureVector,
    background: Sequence[FeatureVector],
    exact_limit: int = EXACT_LIMIT,
) -> ShapResult:
    """Exact Shapley values by enumerating all 2**n coalitions once.

    Raises:
        ExactLimitError: more than ``exact_limit`` features; use
            :func:`permutation_shap` instead.
    """
    n = model.n_features
    if n > exact_limit:
        raise ExactLimitError(
            f"{n} features exceeds the exact limit of {exact_limit}; use the permutation method"
        )
    vf = CoalitionValues(model, x, background)
    if n == 0:
        return ShapResult(base_value=vf.margin, phi=(), predicted_margin=vf.margin, method="exact")

    ints = np.arange(1 << n, dtype=np.int64)
    bits = ((ints[:, None] >> np.arange(n)) & 1).astype(bool)
    f = vf._compute(bits)
    size = bits.sum(axis=1)
    w = shapley_weights(n)

    phi = []
    for i in range(n):
        without = ints[~bits[:, i]]
        gains = w[size[without]] * (f[without | (1 << i)] - f[without])
        phi.append(math.fsum(gains.tolist()))
    return ShapResult(
        base_value=float(f[0]),
        phi=tuple(phi),
        predicted_margin=vf.margin,
        method="exact",
    )


def _marginal_contributions(vf: CoalitionValues, perms: np.ndarray) -> np.ndarray:
    """(m, n) matrix: row r holds each feature's marginal gain under permutation r."""
    m, n = perms.shape
    rank = np.empty_like(perms)
    rank[np.arange(m)[:, None], perms] = np.arange(n)
    # prefix[r, k] = features placed before position k of permutation r
    prefix = rank[:, None, :] < np.arange(n + 1)[None, :, None]
    f = vf.values(prefix.reshape(-1, n)).reshape(m, n + 1)
    gains = f[:, 1:] - f[:, :-1]
    out = np.empty((m, n))
    out[np.arange(m)[:, None], perms] = gains
    return out


def permutation_shap(
    model: TreeEnsemble,
    x: FeatureVector,
    background: Sequence[FeatureVector],
    n_permutations: int,
    seed: int = 0,
    n_jobs: int = 1,
    allow_exhaustive: bool = True,
) -> ShapResult:
    """Permutation-sampling estimate of the Shapley values.

    When ``n! <= n_permutations`` every permutation is enumerated once and
    the result equals :func:`exact_shap` up to rounding. Otherwise
    ``n_permutations`` orderings are drawn up front from ``seed``; they may be
    processed by ``n_jobs`` threads but are reduced in a fixed order, so the
    output is bit-identical for any ``n_jobs``.

    ``allow_exhaustive=False`` forces random sampling even when enumeration
    would be cheaper; useful for checking the estimator itself.
    """
    if n_permutations < 1:
        raise ShapError("n_permutations must be at least 1")
    if n_jobs < 1:
        raise ShapError("n_jobs must be at least 1")
    n = model.n_features
    vf = CoalitionValues(model, x, background)
    if n == 0:
        return ShapResult(vf.margin, (), vf.margin, "permutation", n_permutations, seed, True)

    exhaustive = allow_exhaustive and math.factorial(n) <= n_permutations
    if exhaustive:
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    else:
        rng = np.random.default_rng(seed)
        perms = rng.permuted(np.tile(np.arange(n, dtype=np.intp), (n_permutations, 1)), axis=1)

    chunks = np.array_split(perms, min(n_jobs, len(perms)))
    if n_jobs == 1:
        parts = [_marginal_contributions(vf, c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(lambda c: _marginal_contributions(vf, c), chunks))
    contrib = np.concatenate(parts)

    m = contrib.shape[0]
    phi = tuple(math.fsum(contrib[:, i].tolist()) / m for i in range(n))
    se = None
    if m > 1 and not exhaustive:
        se = tuple(float(s) for s in contrib.std(axis=0, ddof=1) / math.sqrt(m))
    return ShapResult(
        base_value=vf.values(np.zeros((1, n), dtype=bool))[0].item(),
        phi=phi,
        predicted_margin=vf.margin,
        method="permutation",
        n_permutations=m,
        seed=seed,
        exhaustive=exhaustive,
        std_error=se,
    )
