"""Synthetic fixture generators shared by the test modules."""

import numpy as np

from cfcids.dataset import Dataset, Feature, FeatureSchema
from cfcids.infogain import FeatureWeights

ORDS = ("a", "b", "c", "d")
SYMS = ("x", "y", "z")

MIXED_SCHEMA = FeatureSchema((
    Feature("c0", "continuous"),
    Feature("c1", "continuous"),
    Feature("s0", "symbolic"),
    Feature("o0", "ordinal", ORDS),
))


def mixed_fixture(seed, missing=True):
    """Mixed-type clustered data with n in [20, 200], k in [2, 8].

    Returns ``(dataset, k, weights)``. The number of generating components is
    drawn independently of ``k``.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 201))
    k = int(rng.integers(2, 9))
    g = int(rng.integers(1, 9))
    comp = rng.integers(0, g, n)
    mu = rng.random((g, 2))
    sd = rng.uniform(0.02, 0.2)
    X = mu[comp] + rng.normal(0, sd, (n, 2))
    cats = np.array(SYMS)
    sym = cats[rng.integers(0, 3, g)][comp].astype(object)
    flip = rng.random(n) < 0.1
    sym[flip] = cats[rng.integers(0, 3, flip.sum())]
    ords = np.array(ORDS)[np.clip(rng.integers(0, 4, g)[comp] + rng.integers(-1, 2, n), 0, 3)].astype(object)
    if missing:
        sym[rng.random(n) < 0.03] = "?"
        X[rng.random((n, 2)) < 0.03] = np.nan
    w = FeatureWeights(tuple(rng.uniform(0.05, 1, 4)))
    return Dataset(MIXED_SCHEMA, (X[:, 0], X[:, 1], sym, ords)), k, w


def xor_blobs(seed, n=400, sd=0.15):
    """Four Gaussian blobs at the unit-square corners, XOR-labeled."""
    rng = np.random.default_rng(seed)
    centers = np.array([[0, 0], [1, 1], [0, 1], [1, 0]])
    lab = np.array(["a", "a", "b", "b"], dtype=object)
    g = np.repeat(np.arange(4), n // 4)
    X = centers[g] + rng.normal(0, sd, (n, 2))
    schema = FeatureSchema((Feature("x", "continuous"), Feature("y", "continuous")))
    return Dataset(schema, (X[:, 0], X[:, 1]), lab[g])


def selection_fixture(seed, m, n=300):
    """Three-class data whose features are class-correlated, pure noise,
    noisy copies of earlier features, or noisy continuous class signals."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 3, n)
    cols, feats = [], []
    for j in range(m):
        kind = rng.integers(0, 4)
        if kind == 0:
            c = np.where(rng.random(n) < rng.uniform(0.5, 0.95), y, rng.integers(0, 3, n))
        elif kind == 1:
            c = rng.integers(0, 4, n)
        elif kind == 2 and cols:
            c = np.where(rng.random(n) < 0.8, cols[rng.integers(0, len(cols))], rng.integers(0, 3, n))
        else:
            c = y + rng.normal(0, rng.uniform(0.3, 2), n)
        if kind == 3:
            feats.append(Feature(f"f{j}", "continuous"))
            cols.append(c)
        else:
            feats.append(Feature(f"f{j}", "symbolic"))
            cols.append(np.array([str(v) for v in c], dtype=object))
    labels = np.array([str(v) for v in y], dtype=object)
    return Dataset(FeatureSchema(tuple(feats)), tuple(cols), labels)


def write_csv(path, d: Dataset, label_column="label"):
    names = d.schema.names
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names + [label_column]) + "\n")
        for i in range(d.n):
            cells = []
            for f, c in zip(d.schema.features, d.columns):
                v = c[i]
                if f.kind == "continuous":
                    cells.append("?" if np.isnan(v) else repr(float(v)))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells + [str(d.labels[i])]) + "\n")
