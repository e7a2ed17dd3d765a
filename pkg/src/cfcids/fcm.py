"""Fuzzy c-means over mixed continuous / ordinal / symbolic data.

Distances are information-gain weighted sums of per-feature squared
distances: ``|x - v|`` for continuous features (already max-min normalized),
``|rank(x) - v| / (t - 1)`` for ordinals with ``t`` categories, and a 0/1
mismatch against the centroid's representative category for symbolic
features. A missing cell on either side counts as distance 1.

Symbolic centroid components are membership-weighted category frequency
vectors; their argmax is the representative category used by the distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import CONTINUOUS, ORDINAL, SYMBOLIC, Dataset
from .infogain import FeatureWeights

MISSING = -1


class DegenerateClusterError(ValueError):
    """A cluster received zero total membership mass."""

    def __init__(self, clusters):
        self.clusters = list(clusters)
        super().__init__(f"clusters with zero membership mass: {self.clusters}")


@dataclass(frozen=True)
class FcmConfig:
    k: int
    alpha: float = 3.0
    tolerance: float = 1e-6
    max_iterations: int = 300
    seed: int = 0
    # "membership": stop when max |W_new - W| < tolerance; "objective": on objective change
    criterion: str = "membership"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.alpha > 1:
            raise ValueError("alpha must be > 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.criterion not in ("membership", "objective"):
            raise ValueError(f"unknown convergence criterion {self.criterion!r}")


@dataclass(frozen=True)
class Layout:
    """How schema features map onto the three encoded blocks."""

    cont_idx: tuple[int, ...]
    ord_idx: tuple[int, ...]
    ord_t: tuple[int, ...]
    sym_idx: tuple[int, ...]
    sym_categories: tuple[tuple[str, ...], ...]

    @classmethod
    def from_data(cls, d: Dataset) -> "Layout":
        cont, ordi, ord_t, sym, cats = [], [], [], [], []
        for q, f in enumerate(d.schema.features):
            if f.kind == CONTINUOUS:
                cont.append(q)
            elif f.kind == ORDINAL:
                ordi.append(q)
                ord_t.append(len(f.categories))
            else:
                sym.append(q)
                if f.categories is not None:
                    cats.append(tuple(f.categories))
                else:
                    seen = {v for v in d.columns[q].tolist() if v != d.schema.missing}
                    cats.append(tuple(sorted(seen)))
        return cls(tuple(cont), tuple(ordi), tuple(ord_t), tuple(sym), tuple(cats))

    def encode(self, d: Dataset) -> "Encoded":
        n = d.n
        cont = np.empty((n, len(self.cont_idx)))
        for j, q in enumerate(self.cont_idx):
            cont[:, j] = d.columns[q]
        ordn = np.empty((n, len(self.ord_idx)))
        for j, q in enumerate(self.ord_idx):
            rank = {c: float(r) for r, c in enumerate(d.schema.features[q].categories)}
            ordn[:, j] = [rank.get(v, np.nan) for v in d.columns[q].tolist()]
        sym = np.empty((n, len(self.sym_idx)), dtype=np.int64)
        for j, q in enumerate(self.sym_idx):
            code = {c: i for i, c in enumerate(self.sym_categories[j])}
            # unseen categories behave like missing: distance 1, no centroid mass
            sym[:, j] = [code.get(v, MISSING) for v in d.columns[q].tolist()]
        return Encoded(cont, ordn, sym)

    def split_weights(self, weights: FeatureWeights):
        w = weights.as_array()
        return w[list(self.cont_idx)], w[list(self.ord_idx)], w[list(self.sym_idx)]

    def to_dict(self) -> dict:
        return {"cont_idx": list(self.cont_idx), "ord_idx": list(self.ord_idx),
                "ord_t": list(self.ord_t), "sym_idx": list(self.sym_idx),
                "sym_categories": [list(c) for c in self.sym_categories]}

    @classmethod
    def from_dict(cls, d: dict) -> "Layout":
        return cls(tuple(d["cont_idx"]), tuple(d["ord_idx"]), tuple(d["ord_t"]),
                   tuple(d["sym_idx"]), tuple(tuple(c) for c in d["sym_categories"]))


@dataclass(frozen=True, eq=False)
class Encoded:
    cont: np.ndarray  # (n, mc) float, NaN = missing
    ordn: np.ndarray  # (n, mo) float ranks, NaN = missing
    sym: np.ndarray   # (n, ms) int codes, MISSING = missing or unseen

    @property
    def n(self) -> int:
        return self.cont.shape[0]

    def take(self, idx) -> "Encoded":
        return Encoded(self.cont[idx], self.ordn[idx], self.sym[idx])


@dataclass(frozen=True, eq=False)
class CentroidSet:
    layout: Layout
    cont: np.ndarray                 # (k, mc)
    ordn: np.ndarray                 # (k, mo), ranks in [0, t-1]
    sym_freq: tuple[np.ndarray, ...] = field(default=())  # per symbolic feature, (k, n_categories)

    @property
    def k(self) -> int:
        return self.cont.shape[0]

    @property
    def sym_rep(self) -> np.ndarray:
        """Representative category code per (centroid, symbolic feature)."""
        k = self.k
        rep = np.full((k, len(self.sym_freq)), MISSING, dtype=np.int64)
        for j, f in enumerate(self.sym_freq):
            if f.shape[1]:
                rep[:, j] = np.argmax(f, axis=1)
        return rep

    def representative(self, j: int, q: int):
        """Centroid ``j``'s value for schema feature ``q`` (category token for symbolic)."""
        L = self.layout
        if q in L.cont_idx:
            return float(self.cont[j, L.cont_idx.index(q)])
        if q in L.ord_idx:
            return float(self.ordn[j, L.ord_idx.index(q)])
        s = L.sym_idx.index(q)
        cats = L.sym_categories[s]
        return cats[int(self.sym_rep[j, s])] if cats else None

    def equals(self, other: "CentroidSet") -> bool:
        return (self.layout == other.layout
                and np.array_equal(self.cont, other.cont, equal_nan=True)
                and np.array_equal(self.ordn, other.ordn, equal_nan=True)
                and len(self.sym_freq) == len(other.sym_freq)
                and all(np.array_equal(a, b) for a, b in zip(self.sym_freq, other.sym_freq)))


def _as_encoded(X, layout: Layout) -> Encoded:
    return X if isinstance(X, Encoded) else layout.encode(X)


def feature_distance(x, v, kind: str, t: int | None = None) -> float:
    """Single-feature distance.

    For symbolic features ``v`` is the centroid's representative category and
    ``None`` marks a missing value; for ordinals both arguments are ranks.
    """
    if kind == SYMBOLIC:
        if x is None or v is None:
            return 1.0
        return 0.0 if x == v else 1.0
    if x is None or v is None or np.isnan(x) or np.isnan(v):
        return 1.0
    if kind == CONTINUOUS:
        return abs(float(x) - float(v))
    if kind == ORDINAL:
        if t is None or t < 2:
            raise ValueError("ordinal distance needs t >= 2")
        return abs(float(x) - float(v)) / (t - 1)
    return 0.0


def distance_squared(X, V: CentroidSet, weights: FeatureWeights) -> np.ndarray:
    """``(n, k)`` matrix of weighted squared distances from instances to centroids."""
    enc = _as_encoded(X, V.layout)
    gc, go, gs = V.layout.split_weights(weights)
    n, k = enc.n, V.k
    d2 = np.zeros((n, k))
    for j in range(enc.cont.shape[1]):
        diff = enc.cont[:, j, None] - V.cont[None, :, j]
        sq = diff * diff
        sq[np.isnan(sq)] = 1.0
        d2 += gc[j] * sq
    for j, t in enumerate(V.layout.ord_t):
        diff = (enc.ordn[:, j, None] - V.ordn[None, :, j]) / (t - 1)
        sq = diff * diff
        sq[np.isnan(sq)] = 1.0
        d2 += go[j] * sq
    rep = V.sym_rep
    for j in range(enc.sym.shape[1]):
        x = enc.sym[:, j, None]
        mismatch = (x != rep[None, :, j]) | (x == MISSING) | (rep[None, :, j] == MISSING)
        d2 += gs[j] * mismatch
    return d2


def memberships_from_distances(d2: np.ndarray, alpha: float) -> np.ndarray:
    """Closed-form membership update for fixed centroids.

    Rows with a zero distance split their mass evenly over the zero-distance
    clusters.
    """
    d2 = np.asarray(d2, dtype=float)
    e = 1.0 / (alpha - 1.0)
    W = np.empty_like(d2)
    zero = d2 <= 0.0
    singular = zero.any(axis=1)
    if singular.any():
        z = zero[singular].astype(float)
        W[singular] = z / z.sum(axis=1, keepdims=True)
    reg = ~singular
    if reg.any():
        d = d2[reg]
        # scale by the row minimum so the largest term is exactly 1
        r = (d.min(axis=1, keepdims=True) / d) ** e
        W[reg] = r / r.sum(axis=1, keepdims=True)
    return W


def update_memberships(X, V: CentroidSet, cfg: FcmConfig, weights: FeatureWeights) -> np.ndarray:
    return memberships_from_distances(distance_squared(X, V, weights), cfg.alpha)


def _centroids(enc: Encoded, W: np.ndarray, alpha: float, layout: Layout):
    U = W ** alpha
    k = U.shape[1]
    mass = U.sum(axis=0)

    def weighted_mean(block):
        known = ~np.isnan(block)
        num = U.T @ np.where(known, block, 0.0)
        den = U.T @ known.astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)

    cont = weighted_mean(enc.cont)
    ordn = weighted_mean(enc.ordn)
    freqs = []
    for j, cats in enumerate(layout.sym_categories):
        nc = len(cats)
        codes = enc.sym[:, j]
        known = codes != MISSING
        onehot = np.zeros((enc.n, nc))
        onehot[np.flatnonzero(known), codes[known]] = 1.0
        f = U.T @ onehot
        tot = f.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(tot > 0, f / np.where(tot > 0, tot, 1.0), 1.0 / max(nc, 1))
        freqs.append(f.reshape(k, nc))
    degenerate = np.flatnonzero(~(mass > 0))
    return CentroidSet(layout, cont, ordn, tuple(freqs)), degenerate


def update_centroids(X, W: np.ndarray, cfg: FcmConfig, layout: Layout | None = None) -> CentroidSet:
    """Membership-weighted centroid update (weights ``w_ij ** alpha``).

    Continuous and ordinal components are weighted means over non-missing
    cells; symbolic components are weighted category frequency vectors.
    """
    if layout is None:
        if isinstance(X, Encoded):
            raise ValueError("encoded input needs an explicit layout")
        layout = Layout.from_data(X)
    enc = _as_encoded(X, layout)
    W = np.asarray(W, dtype=float)
    if W.shape[0] != enc.n:
        raise ValueError(f"membership matrix has {W.shape[0]} rows for {enc.n} instances")
    V, degenerate = _centroids(enc, W, cfg.alpha, layout)
    if degenerate.size:
        raise DegenerateClusterError(degenerate.tolist())
    return V


def objective(X, W: np.ndarray, V: CentroidSet, cfg: FcmConfig, weights: FeatureWeights) -> float:
    """Sum over points and clusters of ``w_ij ** alpha * d_ij ** 2``."""
    d2 = distance_squared(X, V, weights)
    return float(((np.asarray(W) ** cfg.alpha) * d2).sum())


def centroids_from_rows(enc: Encoded, rows, layout: Layout) -> CentroidSet:
    rows = np.asarray(rows, dtype=int)
    freqs = []
    for j, cats in enumerate(layout.sym_categories):
        nc = len(cats)
        f = np.full((len(rows), nc), 1.0 / max(nc, 1))
        for r, i in enumerate(rows):
            c = enc.sym[i, j]
            if c != MISSING:
                f[r] = 0.0
                f[r, c] = 1.0
        freqs.append(f)
    return CentroidSet(layout, enc.cont[rows].copy(), enc.ordn[rows].copy(), tuple(freqs))


def _initial_rows(enc: Encoded, k: int, rng: np.random.Generator) -> np.ndarray:
    key = np.hstack([np.nan_to_num(enc.cont, nan=-7.25e300), np.nan_to_num(enc.ordn, nan=-7.25e300),
                     enc.sym.astype(float)])
    _, first = np.unique(key, axis=0, return_index=True)
    pool = np.sort(first) if len(first) >= k else np.arange(enc.n)
    return rng.choice(pool, size=k, replace=False)


def _replace_rows(V: CentroidSet, targets, source: CentroidSet) -> CentroidSet:
    cont, ordn = V.cont.copy(), V.ordn.copy()
    freqs = [f.copy() for f in V.sym_freq]
    for r, j in enumerate(targets):
        cont[j] = source.cont[r]
        ordn[j] = source.ordn[r]
        for f, s in zip(freqs, source.sym_freq):
            f[j] = s[r]
    return CentroidSet(V.layout, cont, ordn, tuple(freqs))


@dataclass(frozen=True, eq=False)
class FcmResult:
    memberships: np.ndarray
    centroids: CentroidSet
    objectives: tuple[float, ...]
    n_iter: int
    converged: bool

    def __iter__(self):
        # unpacks as (W, V)
        return iter((self.memberships, self.centroids))


def fit(X, cfg: FcmConfig, weights: FeatureWeights, layout: Layout | None = None) -> FcmResult:
    """Alternate centroid and membership updates from seeded initial centroids.

    Initial centroids are ``k`` distinct instances drawn with ``cfg.seed``.
    Each iteration updates centroids then memberships, so the returned
    memberships are exactly those implied by the returned centroids.
    """
    if layout is None:
        if isinstance(X, Encoded):
            raise ValueError("encoded input needs an explicit layout")
        layout = Layout.from_data(X)
    enc = _as_encoded(X, layout)
    if enc.n < cfg.k:
        raise ValueError(f"cannot form {cfg.k} clusters from {enc.n} instances")
    if len(weights.weights) != (len(layout.cont_idx) + len(layout.ord_idx) + len(layout.sym_idx)):
        raise ValueError("feature weights do not match the schema")
    rng = np.random.default_rng(cfg.seed)
    V = centroids_from_rows(enc, _initial_rows(enc, cfg.k, rng), layout)
    d2 = distance_squared(enc, V, weights)
    W = memberships_from_distances(d2, cfg.alpha)
    objs = [float(((W ** cfg.alpha) * d2).sum())]
    converged = False
    it = 0
    while it < cfg.max_iterations:
        it += 1
        V, degenerate = _centroids(enc, W, cfg.alpha, layout)
        if degenerate.size:
            V = _reseed(enc, V, degenerate, weights, layout)
        d2 = distance_squared(enc, V, weights)
        W_new = memberships_from_distances(d2, cfg.alpha)
        objs.append(float(((W_new ** cfg.alpha) * d2).sum()))
        delta = float(np.abs(W_new - W).max())
        W = W_new
        if cfg.criterion == "membership":
            done = delta < cfg.tolerance
        else:
            done = abs(objs[-2] - objs[-1]) < cfg.tolerance
        if done:
            converged = True
            break
    return FcmResult(W, V, tuple(objs), it, converged)


def _reseed(enc, V, degenerate, weights, layout) -> CentroidSet:
    ok = np.setdiff1d(np.arange(V.k), degenerate)
    for j in degenerate:
        if ok.size:
            d2 = distance_squared(enc, V, weights)[:, ok]
            far = int(np.argmax(d2.min(axis=1)))
        else:
            far = 0
        V = _replace_rows(V, [j], centroids_from_rows(enc, [far], layout))
        ok = np.append(ok, j)
    return V


def centroid_set_to_dict(V: CentroidSet) -> dict:
    def mat(a):
        return [[None if np.isnan(x) else float(x) for x in row] for row in np.asarray(a)]
    return {"layout": V.layout.to_dict(), "k": V.k, "cont": mat(V.cont), "ordn": mat(V.ordn),
            "sym_freq": [mat(f) for f in V.sym_freq]}


def centroid_set_from_dict(d: dict) -> CentroidSet:
    layout = Layout.from_dict(d["layout"])
    k = d["k"]

    def arr(rows, width):
        a = np.array([[np.nan if x is None else x for x in r] for r in rows], dtype=float)
        return a.reshape(k, width)

    cont = arr(d["cont"], len(layout.cont_idx))
    ordn = arr(d["ordn"], len(layout.ord_idx))
    freqs = tuple(arr(f, len(c)) for f, c in zip(d["sym_freq"], layout.sym_categories))
    return CentroidSet(layout, cont, ordn, freqs)

