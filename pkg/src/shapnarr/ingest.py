"""CSV loading with a declared per-column encoding, and background sampling."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Mapping, Sequence, Union

import numpy as np

from .errors import DataError, SchemaError
from .model import FeatureVector

KINDS = ("numeric", "categorical")
MISSING_POLICIES = ("as_missing", "reject")

_DECIMAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str = "numeric"
    category_map: Mapping[str, float] = field(default_factory=dict)
    missing_policy: str = "reject"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r}", column=self.name)
        if self.missing_policy not in MISSING_POLICIES:
            raise SchemaError(f"unknown missing policy {self.missing_policy!r}", column=self.name)
        if self.kind == "categorical":
            if not self.category_map:
                raise SchemaError("categorical column needs a non-empty category map", column=self.name)
            codes = list(self.category_map.values())
            if len(set(codes)) != len(codes):
                raise SchemaError("category codes must be distinct", column=self.name)
        elif self.category_map:
            raise SchemaError("numeric column cannot carry a category map", column=self.name)

    def encode(self, cell: str, row: int) -> float | None:
        cell = cell.strip()
        if cell == "":
            if self.missing_policy == "as_missing":
                return None
            raise DataError("empty cell not allowed", row=row, column=self.name)
        if self.kind == "categorical":
            try:
                return float(self.category_map[cell])
            except KeyError:
                raise DataError(f"unknown category {cell!r}", row=row, column=self.name) from None
        if not _DECIMAL.match(cell):
            raise DataError(f"cannot parse {cell!r} as a number", row=row, column=self.name)
        return float(cell)

    def label_for(self, code: float | None) -> str | None:
        """Reverse lookup of a categorical code, ``None`` if not categorical."""
        for label, c in self.category_map.items():
            if c == code:
                return label
        return None


@dataclass(frozen=True)
class Dataset:
    schema: tuple[ColumnSchema, ...]
    rows: tuple[tuple[float | None, ...], ...]
    source_row_numbers: tuple[int, ...]

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.schema]

    def __len__(self) -> int:
        return len(self.rows)


def schema_from_dict(obj: Mapping) -> list[ColumnSchema]:
    """Build a schema from ``{"columns": [{"name", "kind", "categories", "missing_policy"}]}``."""
    cols = obj.get("columns") if isinstance(obj, Mapping) else None
    if not isinstance(cols, list) or not cols:
        raise SchemaError("schema must be an object with a non-empty 'columns' list")
    out = []
    for c in cols:
        if not isinstance(c, Mapping) or not isinstance(c.get("name"), str):
            raise SchemaError(f"bad column entry {c!r}")
        cats = c.get("categories", {}) or {}
        if not isinstance(cats, Mapping):
            raise SchemaError("'categories' must map strings to numbers", column=c["name"])
        out.append(
            ColumnSchema(
                name=c["name"],
                kind=c.get("kind", "numeric"),
                category_map={str(k): float(v) for k, v in cats.items()},
                missing_policy=c.get("missing_policy", "reject"),
            )
        )
    names = [c.name for c in out]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names in schema")
    return out


def schema_to_dict(schema: Sequence[ColumnSchema]) -> dict:
    cols = []
    for c in schema:
        d = {"name": c.name, "kind": c.kind, "missing_policy": c.missing_policy}
        if c.kind == "categorical":
            d["categories"] = dict(c.category_map)
        cols.append(d)
    return {"columns": cols}


def load_schema(path: str | Path) -> list[ColumnSchema]:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema file is not valid JSON: {exc}") from exc
    return schema_from_dict(obj)


def load_csv(
    source: Union[bytes, str, IO[bytes], Path],
    schema: Sequence[ColumnSchema],
    has_header: bool = True,
) -> Dataset:
    """Read comma-separated UTF-8 text and encode every cell per ``schema``.

    With a header, columns are matched by name (any order) and reordered to
    schema order. Row numbers in errors and in ``source_row_numbers`` are
    1-based physical line numbers of the file, header included.
    """
    if isinstance(source, Path):
        source = source.read_bytes()
    elif hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"input is not valid UTF-8 (byte {exc.start})") from exc
    if source.startswith("\ufeff"):
        source = source[1:]

    schema = tuple(schema)
    reader = csv.reader(io.StringIO(source, newline=""), delimiter=",", quotechar='"', strict=True)
    try:
        records = [(reader.line_num, rec) for rec in reader]
    except csv.Error as exc:
        raise DataError(f"malformed CSV: {exc}", row=reader.line_num) from exc
    records = [(ln, rec) for ln, rec in records if rec]

    width = len(schema)
    order = list(range(width))
    if has_header:
        if not records:
            raise SchemaError("missing header row")
        _, header = records.pop(0)
        header = [h.strip() for h in header]
        names = [c.name for c in schema]
        if sorted(header) != sorted(names) or len(set(header)) != len(header):
            raise SchemaError(f"header {header} does not match schema columns {names}")
        order = [header.index(n) for n in names]

    rows, numbers = [], []
    for line, rec in records:
        if len(rec) != width:
            raise DataError(f"expected {width} fields, found {len(rec)}", row=line)
        rows.append(tuple(col.encode(rec[j], line) for col, j in zip(schema, order)))
        numbers.append(line)
    return Dataset(schema=schema, rows=tuple(rows), source_row_numbers=tuple(numbers))


def select_background(data: Dataset, k: int, seed: int) -> list[FeatureVector]:
    """Sample ``k`` distinct rows with a seeded RNG, returned in dataset order."""
    n = len(data.rows)
    if not 1 <= k <= n:
        raise DataError(f"background size {k} outside [1, {n}]")
    if k == n:
        return list(data.rows)
    idx = np.sort(np.random.default_rng(seed).choice(n, size=k, replace=False))
    return [data.rows[i] for i in idx]
