"""Feature schema, labeled dataset model, delimited-text ingestion,
max-min normalization and per-group sampling."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

CONTINUOUS = "continuous"
SYMBOLIC = "symbolic"
ORDINAL = "ordinal"
KINDS = (CONTINUOUS, SYMBOLIC, ORDINAL)

# column names reserved for cluster features
_RESERVED = re.compile(r"^_(Z|B|P\d+)$")


class DataError(Exception):
    """Raised for malformed input data or schema files."""


class SchemaMismatchError(DataError):
    pass


class MissingFileError(DataError, FileNotFoundError):
    pass


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str
    # ordered categories; required for ordinal features, optional for symbolic ones
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.name:
            raise DataError("feature names must be non-empty")
        if self.kind not in KINDS:
            raise DataError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.categories is not None:
            object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
            if len(set(self.categories)) != len(self.categories):
                raise DataError(f"feature {self.name!r}: duplicate categories")
        if self.kind == ORDINAL and (self.categories is None or len(self.categories) < 2):
            raise DataError(f"ordinal feature {self.name!r} needs at least 2 categories")

    @property
    def is_categorical(self) -> bool:
        return self.kind != CONTINUOUS


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature list plus the conventions needed to read data files.

    ``label_map`` optionally maps raw label tokens (e.g. KDD99 attack names) to
    class labels; the raw tokens are then kept as per-instance group tags.
    """

    features: tuple[Feature, ...]
    missing: str = "?"
    label_column: str | None = None
    label_map: Mapping[str, str] | None = field(default=None, hash=False)
    strip_label_suffix: str = ""

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def m(self) -> int:
        return len(self.features)

    def index(self, name: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(name)

    def __getitem__(self, name: str) -> Feature:
        return self.features[self.index(name)]

    def validate_user_names(self):
        for f in self.features:
            if _RESERVED.match(f.name):
                raise DataError(f"feature name {f.name!r} is reserved for cluster features")

    def feature_dicts(self) -> list[dict]:
        out = []
        for f in self.features:
            d = {"name": f.name, "kind": f.kind}
            if f.categories is not None:
                d["categories"] = list(f.categories)
            out.append(d)
        return out

    def fingerprint(self) -> str:
        """Short digest of feature names, kinds and category lists."""
        payload = json.dumps({"features": self.feature_dicts(), "missing": self.missing},
                             sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        d = {"features": self.feature_dicts(), "missing": self.missing}
        if self.label_column is not None:
            d["label_column"] = self.label_column
        if self.label_map is not None:
            d["label_map"] = dict(sorted(self.label_map.items()))
        if self.strip_label_suffix:
            d["strip_label_suffix"] = self.strip_label_suffix
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureSchema":
        try:
            feats = tuple(Feature(f["name"], f["kind"],
                                  tuple(f["categories"]) if f.get("categories") is not None else None)
                          for f in d["features"])
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed schema: {exc}") from None
        return cls(feats, missing=d.get("missing", "?"), label_column=d.get("label_column"),
                   label_map=d.get("label_map"), strip_label_suffix=d.get("strip_label_suffix", ""))


def load_schema(path) -> FeatureSchema:
    """Read a JSON schema file.

    Expected layout::

        {"label_column": "class", "missing": "?",
         "features": [{"name": "duration", "kind": "continuous"},
                      {"name": "flag", "kind": "symbolic"},
                      {"name": "level", "kind": "ordinal", "categories": ["lo", "hi"]}]}
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"schema file not found: {path}")
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    return FeatureSchema.from_dict(d)


def kdd99_schema() -> FeatureSchema:
    """The bundled 41-feature KDD99 schema (five-class label map, trailing '.' stripped)."""
    from importlib.resources import files
    return load_schema(files(__package__) / "data" / "kdd99_schema.json")


def save_schema(schema: FeatureSchema, path):
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def parse_column(values: Sequence, feature: Feature, missing: str) -> np.ndarray:
    """Convert raw cell values into the internal column representation.

    Continuous columns become float64 with NaN for missing or unparseable
    cells; categorical columns become string arrays holding the missing token
    where a cell is absent (and, for ordinals, outside the category list).
    """
    if feature.kind == CONTINUOUS:
        out = np.empty(len(values), dtype=float)
        for i, v in enumerate(values):
            if v is None or (isinstance(v, str) and (v.strip() == missing or not v.strip())):
                out[i] = np.nan
                continue
            try:
                out[i] = float(v)
            except (TypeError, ValueError):
                out[i] = np.nan
        return out
    cells = []
    allowed = set(feature.categories) if feature.kind == ORDINAL else None
    for v in values:
        if v is None or (isinstance(v, float) and math.isnan(v)):
            cells.append(missing)
            continue
        s = str(v).strip()
        if allowed is not None and s not in allowed:
            s = missing
        cells.append(s if s else missing)
    return np.array(cells, dtype=object)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented labeled (or unlabeled) dataset.

    ``columns[q]`` is float64 for continuous features (NaN = missing) and an
    object array of category tokens otherwise (``schema.missing`` = missing).
    ``groups`` holds optional fine-grained tags such as attack types.
    """

    schema: FeatureSchema
    columns: tuple[np.ndarray, ...]
    labels: np.ndarray | None = None
    groups: np.ndarray | None = None

    def __post_init__(self):
        cols = tuple(self.columns)
        if len(cols) != self.schema.m:
            raise DataError(f"expected {self.schema.m} columns, got {len(cols)}")
        n = len(cols[0]) if cols else (len(self.labels) if self.labels is not None else 0)
        fixed = []
        for f, c in zip(self.schema.features, cols):
            c = np.asarray(c, dtype=float if f.kind == CONTINUOUS else object)
            if c.ndim != 1 or len(c) != n:
                raise DataError(f"column {f.name!r} has inconsistent length")
            fixed.append(_readonly(c))
        object.__setattr__(self, "columns", tuple(fixed))
        for attr in ("labels", "groups"):
            v = getattr(self, attr)
            if v is not None:
                v = np.asarray(v, dtype=object)
                if len(v) != n:
                    raise DataError(f"{attr} length {len(v)} does not match {n} instances")
                object.__setattr__(self, attr, _readonly(v))

    @classmethod
    def from_rows(cls, schema: FeatureSchema, rows: Iterable[Sequence], labels=None, groups=None):
        rows = [list(r) for r in rows]
        for i, r in enumerate(rows):
            if len(r) != schema.m:
                raise DataError(f"row {i}: expected {schema.m} values, got {len(r)}")
        cols = tuple(parse_column([r[q] for r in rows], f, schema.missing)
                     for q, f in enumerate(schema.features))
        if not rows:
            cols = tuple(np.empty(0, dtype=float if f.kind == CONTINUOUS else object)
                         for f in schema.features)
        return cls(schema, cols, labels, groups)

    @property
    def n(self) -> int:
        if self.columns:
            return len(self.columns[0])
        return len(self.labels) if self.labels is not None else 0

    @property
    def m(self) -> int:
        return self.schema.m

    @property
    def classes(self) -> list[str]:
        """Sorted distinct labels (the class set)."""
        if self.labels is None:
            return []
        return sorted(set(self.labels.tolist()))

    def column(self, name: str) -> np.ndarray:
        return self.columns[self.schema.index(name)]

    def row(self, i: int) -> list:
        return [c[i] for c in self.columns]

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.schema, tuple(c[idx] for c in self.columns),
                       None if self.labels is None else self.labels[idx],
                       None if self.groups is None else self.groups[idx])

    def with_columns(self, schema: FeatureSchema, columns) -> "Dataset":
        return Dataset(schema, tuple(columns), self.labels, self.groups)

    def strata(self) -> np.ndarray:
        """Group tags when present, else class labels."""
        return self.groups if self.groups is not None else self.labels


def load_dataset(path, schema: FeatureSchema, label_column: str | None = None, *,
                 group_column: str | None = None, delimiter: str = ",", header: bool = True,
                 label_required: bool = True) -> Dataset:
    """Read a delimited text file into a :class:`Dataset`.

    With ``header=False`` the columns are taken to be the schema features in
    order, followed by the label column (KDD99 ships this way).
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"data file not found: {path}")
    label_column = label_column or schema.label_column
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if header:
        if not rows:
            raise SchemaMismatchError(f"{path}: empty file, no header row")
        head = [h.strip() for h in rows[0]]
        body = rows[1:]
        first_line = 2
    else:
        head = schema.names + ([label_column] if label_column else [])
        if group_column:
            head.append(group_column)
        body = rows
        first_line = 1
    if len(set(head)) != len(head):
        raise SchemaMismatchError(f"{path}: duplicate header names")
    missing = [nm for nm in schema.names if nm not in head]
    if missing:
        raise SchemaMismatchError(f"{path}: header lacks schema features {missing}")
    has_label = label_column is not None and label_column in head
    if label_column is not None and label_required and not has_label:
        raise SchemaMismatchError(f"{path}: header lacks label column {label_column!r}")
    if group_column is not None and group_column not in head:
        raise SchemaMismatchError(f"{path}: header lacks group column {group_column!r}")
    known = set(schema.names) | {label_column, group_column}
    extra = [h for h in head if h not in known]
    if extra:
        raise SchemaMismatchError(f"{path}: header has columns not in schema: {extra}")

    width = len(head)
    for i, r in enumerate(body):
        if len(r) != width:
            raise DataError(f"{path}: row {first_line + i} has {len(r)} fields, expected {width}")
    pos = {h: j for j, h in enumerate(head)}
    cols = tuple(parse_column([r[pos[f.name]] for r in body], f, schema.missing)
                 for f in schema.features)
    if not body:
        cols = tuple(np.empty(0, dtype=float if f.kind == CONTINUOUS else object)
                     for f in schema.features)
    labels = groups = None
    if has_label:
        raw = [r[pos[label_column]].strip() for r in body]
        suffix = schema.strip_label_suffix
        if suffix:
            raw = [s[: -len(suffix)] if s.endswith(suffix) else s for s in raw]
        if schema.label_map is not None:
            unknown = sorted({s for s in raw if s not in schema.label_map})
            if unknown:
                raise DataError(f"{path}: labels not covered by label_map: {unknown[:10]}")
            groups = raw
            labels = [schema.label_map[s] for s in raw]
        else:
            labels = raw
    if group_column is not None:
        groups = [r[pos[group_column]].strip() for r in body]
    return Dataset(schema, cols, labels, groups)


def format_cell(v, feature: Feature, missing: str) -> str:
    if feature.kind == CONTINUOUS:
        if np.isnan(v):
            return missing
        return repr(float(v))
    return str(v)


def save_dataset(d: Dataset, path, label_column: str | None = None, *,
                 group_column: str | None = None, delimiter: str = ","):
    """Write ``d`` as delimited text with a header row.

    Under a ``label_map`` schema the raw tags (``groups``) are written to the
    label column so the file reloads to the same dataset.
    """
    label_column = label_column or d.schema.label_column
    head = list(d.schema.names)
    if label_column and d.labels is not None:
        head.append(label_column)
    if group_column and d.groups is not None:
        head.append(group_column)
    raw_labels = d.groups if (d.schema.label_map is not None and d.groups is not None) else d.labels
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(head)
        for i in range(d.n):
            row = [format_cell(c[i], f, d.schema.missing) for c, f in zip(d.columns, d.schema.features)]
            if label_column and d.labels is not None:
                row.append(raw_labels[i])
            if group_column and d.groups is not None:
                row.append(d.groups[i])
            w.writerow(row)


# -- normalization -----------------------------------------------------------

@dataclass(frozen=True)
class NormalizationParams:
    """Training-set (min, max) per continuous feature, keyed by name."""

    ranges: Mapping[str, tuple[float, float]] = field(hash=False)

    def __post_init__(self):
        for name, (lo, hi) in self.ranges.items():
            if lo > hi:
                raise ValueError(f"{name}: min {lo} > max {hi}")


def fit_normalization(d: Dataset) -> NormalizationParams:
    if d.n == 0:
        raise DataError("cannot fit normalization on an empty dataset")
    ranges = {}
    for f, c in zip(d.schema.features, d.columns):
        if f.kind != CONTINUOUS:
            continue
        known = c[~np.isnan(c)]
        ranges[f.name] = (float(known.min()), float(known.max())) if known.size else (0.0, 0.0)
    return NormalizationParams(ranges)


def normalize_values(c: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if hi > lo:
        out = np.clip((c - lo) / (hi - lo), 0.0, 1.0)
    else:
        out = np.zeros_like(c)
    out[np.isnan(c)] = np.nan
    return out


def apply_normalization(d: Dataset, p: NormalizationParams) -> Dataset:
    """Map continuous cells to ``(v - min) / (max - min)`` clamped to [0, 1].

    Zero-range features map to 0.0; categorical and missing cells pass through.
    """
    cont = {f.name for f in d.schema.features if f.kind == CONTINUOUS}
    if cont != set(p.ranges):
        raise SchemaMismatchError(
            f"normalization covers {sorted(p.ranges)}, dataset has continuous {sorted(cont)}")
    cols = []
    for f, c in zip(d.schema.features, d.columns):
        if f.kind == CONTINUOUS:
            lo, hi = p.ranges[f.name]
            c = normalize_values(c, lo, hi)
        cols.append(c)
    return d.with_columns(d.schema, cols)


# -- sampling ----------------------------------------------------------------

def sample_indices(tags: Sequence, fractions: Mapping[str, float], seed: int) -> np.ndarray:
    """Indices kept when sampling ``round(f * n_g)`` instances of each group g.

    Groups not named in ``fractions`` are kept whole. Indices come back in
    ascending order.
    """
    tags = np.asarray(tags, dtype=object)
    for g, f in fractions.items():
        if not 0.0 < f <= 1.0:
            raise ValueError(f"fraction for group {g!r} must be in (0, 1], got {f}")
    present = set(tags.tolist())
    absent = sorted(g for g in fractions if g not in present)
    if absent:
        raise ValueError(f"groups not present in data: {absent}")
    rng = np.random.default_rng(seed)
    keep = []
    for g in sorted(present):
        idx = np.flatnonzero(tags == g)
        f = fractions.get(g, 1.0)
        if f >= 1.0:
            keep.append(idx)
            continue
        size = int(math.floor(f * len(idx) + 0.5))
        keep.append(rng.choice(idx, size=size, replace=False))
    return np.sort(np.concatenate(keep)) if keep else np.empty(0, dtype=int)


def sample_by_group(d: Dataset, fractions: Mapping[str, float], seed: int,
                    tags: Sequence | None = None) -> Dataset:
    """Randomly keep a fraction of each large group, all of the others.

    ``tags`` defaults to the dataset's group tags, or its labels if it has none.
    """
    if tags is None:
        tags = d.strata()
    if tags is None:
        raise DataError("sampling needs group tags or labels")
    return d.take(sample_indices(tags, fractions, seed))
