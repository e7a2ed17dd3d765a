"""Cluster features (_Z, _B, _P1.._Pk) and the manipulated training set."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .dataset import CONTINUOUS, SYMBOLIC, Dataset, Feature, FeatureSchema

Z_NAME = "_Z"
B_NAME = "_B"


def p_name(j: int) -> str:
    """Column name of the membership feature for cluster ``j`` (1-based)."""
    return f"_P{j}"


class ManipulationMode(enum.IntEnum):
    T1 = 1  # initial features + Z, B
    T2 = 2  # initial features + Z, B, P1..Pk
    T3 = 3  # feature-selected subset of the T2 layout


@dataclass(frozen=True, eq=False)
class ClusterFeatureBlock:
    z: np.ndarray  # (n,) cluster numbers in 1..k
    b: np.ndarray  # (n,) max membership
    p: np.ndarray  # (n, k) memberships

    @property
    def k(self) -> int:
        return self.p.shape[1]

    @property
    def n(self) -> int:
        return self.p.shape[0]


def build_cluster_features(W) -> ClusterFeatureBlock:
    """Argmax cluster (ties to the smallest index) and max membership per row."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ValueError("membership matrix must be 2-D")
    arg = np.argmax(W, axis=1)
    b = W[np.arange(W.shape[0]), arg]
    return ClusterFeatureBlock(arg + 1, b, W)


def cluster_columns(k: int, mode: ManipulationMode) -> list[Feature]:
    cols = [Feature(Z_NAME, SYMBOLIC, tuple(str(j) for j in range(1, k + 1))),
            Feature(B_NAME, CONTINUOUS)]
    if mode != ManipulationMode.T1:
        cols += [Feature(p_name(j), CONTINUOUS) for j in range(1, k + 1)]
    return cols


def manipulated_schema(schema: FeatureSchema, k: int, mode: ManipulationMode,
                       selected: Sequence[str] | None = None) -> FeatureSchema:
    """Schema of the manipulated set for a given original schema, k and mode."""
    mode = ManipulationMode(mode)
    feats = list(schema.features) + cluster_columns(k, mode)
    if mode == ManipulationMode.T3:
        if not selected:
            raise ValueError("mode T3 needs a selected feature subset")
        chosen = set(selected)
        unknown = chosen - {f.name for f in feats}
        if unknown:
            raise ValueError(f"selected features not in the manipulated layout: {sorted(unknown)}")
        feats = [f for f in feats if f.name in chosen]
    return replace(schema, features=tuple(feats))


def manipulate(d: Dataset, cf: ClusterFeatureBlock, mode: ManipulationMode,
               selected: Sequence[str] | None = None) -> Dataset:
    """Concatenate the original columns of ``d`` with the cluster features.

    T3 projects the T2 layout onto ``selected``, keeping layout order.
    Labels and group tags pass through.
    """
    if cf.n != d.n:
        raise ValueError(f"cluster features have {cf.n} rows, dataset has {d.n}")
    mode = ManipulationMode(mode)
    full_mode = ManipulationMode.T1 if mode == ManipulationMode.T1 else ManipulationMode.T2
    cols = list(d.columns)
    cols.append(np.array([str(z) for z in cf.z], dtype=object))
    cols.append(cf.b.astype(float))
    if full_mode == ManipulationMode.T2:
        cols += [cf.p[:, j].astype(float) for j in range(cf.k)]
    full = manipulated_schema(d.schema, cf.k, full_mode)
    if mode != ManipulationMode.T3:
        return d.with_columns(full, cols)
    schema = manipulated_schema(d.schema, cf.k, mode, selected)
    keep = set(schema.names)
    cols = [c for f, c in zip(full.features, cols) if f.name in keep]
    return d.with_columns(schema, cols)
