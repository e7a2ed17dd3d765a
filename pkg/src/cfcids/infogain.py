"""Entropy, equal-frequency discretization and per-feature information gain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import CONTINUOUS, Dataset, Feature

DEFAULT_BINS = 10
MISSING_CODE = -1


def _codes(values) -> np.ndarray:
    """Dense integer codes for an arbitrary hashable column."""
    values = np.asarray(values)
    if values.dtype == object:
        lookup = {}
        return np.fromiter((lookup.setdefault(v, len(lookup)) for v in values.tolist()),
                           dtype=np.int64, count=len(values))
    return np.unique(values, return_inverse=True)[1].astype(np.int64).ravel()


def _entropy_of_counts(counts: np.ndarray) -> float:
    counts = counts[counts > 0]
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts / total
    return float(-(p * np.log2(p)).sum())


def entropy(labels) -> float:
    """Shannon entropy of a label multiset, in bits."""
    labels = np.asarray(labels, dtype=object) if not isinstance(labels, np.ndarray) else labels
    if len(labels) == 0:
        raise ValueError("entropy of an empty multiset is undefined")
    return _entropy_of_counts(np.bincount(_codes(labels)).astype(float))


def discretize(values, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Equal-frequency binning of a continuous column.

    Cut points are the ``i/bins`` quantiles of the known values (linear
    interpolation, duplicates removed); a value equal to a cut point falls in
    the lower bin. NaN cells get ``MISSING_CODE``.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    values = np.asarray(values, dtype=float)
    out = np.full(len(values), MISSING_CODE, dtype=np.int64)
    known = ~np.isnan(values)
    if not known.any():
        return out
    cuts = np.unique(np.quantile(values[known], np.arange(1, bins) / bins))
    out[known] = np.searchsorted(cuts, values[known], side="left")
    return out


def discrete_codes(column: np.ndarray, feature: Feature, missing: str, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Integer category codes for any feature kind; missing cells share one code."""
    if feature.kind == CONTINUOUS:
        return discretize(column, bins)
    codes = _codes(column)
    miss = np.asarray(column == missing, dtype=bool)
    codes[miss] = MISSING_CODE
    return codes


def conditional_entropy(feature_codes: np.ndarray, label_codes: np.ndarray) -> float:
    """H(labels | feature) for integer-coded columns."""
    f = _codes(feature_codes)
    y = _codes(label_codes)
    n = len(f)
    joint = np.zeros((f.max() + 1, y.max() + 1))
    np.add.at(joint, (f, y), 1.0)
    h = 0.0
    for row in joint:
        nv = row.sum()
        if nv > 0:
            h += nv / n * _entropy_of_counts(row)
    return h


def information_gain(feature_column, labels) -> float:
    """``H(Y) - sum_v (n_v / n) H(Y | feature = v)`` over the column's categories."""
    feature_column = np.asarray(feature_column, dtype=object)
    labels = np.asarray(labels, dtype=object)
    if len(feature_column) != len(labels):
        raise ValueError(f"length mismatch: {len(feature_column)} vs {len(labels)}")
    if len(labels) == 0:
        raise ValueError("information gain needs at least one instance")
    hy = entropy(labels)
    gain = hy - conditional_entropy(_codes(feature_column), _codes(labels))
    # clip rounding noise; the exact quantity lies in [0, H(Y)]
    return float(min(max(gain, 0.0), hy))


@dataclass(frozen=True)
class FeatureWeights:
    """Per-feature information gain, aligned with the schema order."""

    weights: tuple[float, ...]
    bins: int = DEFAULT_BINS

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if any(w < 0 for w in self.weights):
            raise ValueError("feature weights must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    def scaled(self, c: float) -> "FeatureWeights":
        return FeatureWeights(tuple(w * c for w in self.weights), self.bins)


def compute_feature_weights(d: Dataset, bins: int = DEFAULT_BINS) -> FeatureWeights:
    """Information gain of every feature with respect to the labels.

    Continuous features are discretized into ``bins`` equal-frequency bins
    first; missing cells form their own category.
    """
    if d.n == 0 or d.labels is None:
        raise ValueError("feature weights need a non-empty labeled dataset")
    weights = []
    for f, c in zip(d.schema.features, d.columns):
        codes = discrete_codes(c, f, d.schema.missing, bins)
        weights.append(information_gain(codes, d.labels))
    return FeatureWeights(tuple(weights), bins)
