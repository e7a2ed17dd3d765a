"""Correlation-based feature subset selection with a bitstring genetic search.

Subsets are scored with the CFS merit

    merit(S) = s * mean_su(f, class) / sqrt(s + s * (s - 1) * mean_su(f, f'))

where ``su`` is symmetrical uncertainty between discretized columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .infogain import DEFAULT_BINS, _codes, _entropy_of_counts, discrete_codes


@dataclass(frozen=True)
class FeatureSubset:
    names: tuple[str, ...]
    merit: float

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if not self.names:
            raise ValueError("a feature subset must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate names in feature subset")


@dataclass(frozen=True)
class GeneticSearchConfig:
    population: int = 20
    generations: int = 20
    crossover: float = 0.6
    mutation: float = 0.033
    seed: int = 1
    tournament: int = 2

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for name in ("crossover", "mutation"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} probability must be in [0, 1]")
        if self.tournament < 1:
            raise ValueError("tournament size must be >= 1")


def _joint_entropy(a: np.ndarray, b: np.ndarray) -> float:
    nb = b.max() + 1
    return _entropy_of_counts(np.bincount(a * nb + b).astype(float))


def symmetrical_uncertainty(a, b) -> float:
    """``2 * I(a; b) / (H(a) + H(b))``, or 0 when both columns are constant."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    a = _codes(np.asarray(a, dtype=object))
    b = _codes(np.asarray(b, dtype=object))
    ha = _entropy_of_counts(np.bincount(a).astype(float))
    hb = _entropy_of_counts(np.bincount(b).astype(float))
    if ha + hb <= 0:
        return 0.0
    mi = ha + hb - _joint_entropy(a, b)
    return float(min(max(2.0 * mi / (ha + hb), 0.0), 1.0))


@dataclass(frozen=True, eq=False)
class CorrelationCache:
    """Pairwise symmetrical uncertainties, computed once and read-only."""

    names: tuple[str, ...]
    class_su: np.ndarray  # (m,)
    ff_su: np.ndarray     # (m, m), symmetric, unit diagonal

    def index(self, subset: Sequence[str]) -> list[int]:
        pos = {n: i for i, n in enumerate(self.names)}
        return [pos[s] for s in subset]


def correlation_cache(d: Dataset, bins: int = DEFAULT_BINS) -> CorrelationCache:
    """Discretize every column of ``d`` and tabulate SU with the class and each other."""
    if d.labels is None:
        raise ValueError("feature selection needs labels")
    codes = [_codes(discrete_codes(c, f, d.schema.missing, bins))
             for f, c in zip(d.schema.features, d.columns)]
    y = _codes(d.labels)
    m = len(codes)
    class_su = np.array([symmetrical_uncertainty(c, y) for c in codes])
    ff = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            ff[i, j] = ff[j, i] = symmetrical_uncertainty(codes[i], codes[j])
    return CorrelationCache(tuple(d.schema.names), class_su, ff)


def _merit_idx(idx, cache: CorrelationCache) -> float:
    s = len(idx)
    if s == 0:
        return 0.0
    rcf = float(cache.class_su[idx].mean())
    if s == 1:
        return rcf
    sub = cache.ff_su[np.ix_(idx, idx)]
    rff = (sub.sum() - np.trace(sub)) / (s * (s - 1))
    return s * rcf / math.sqrt(s + s * (s - 1) * rff)


def cfs_merit(subset: Sequence[str], cache: CorrelationCache) -> float:
    if not subset:
        raise ValueError("merit of an empty subset is undefined")
    return _merit_idx(np.array(sorted(cache.index(subset))), cache)


def genetic_search(all_features: Sequence[str], cache: CorrelationCache,
                   cfg: GeneticSearchConfig = GeneticSearchConfig()) -> FeatureSubset:
    """Elitist bitstring GA maximizing CFS merit over ``all_features``.

    The best single features seed the initial population and the best subset
    ever evaluated is returned. Empty offspring are repaired to the single
    feature most correlated with the class.
    """
    feats = list(all_features)
    if not feats:
        raise ValueError("genetic search needs at least one candidate feature")
    idx_all = np.array(cache.index(feats))
    m = len(feats)
    rng = np.random.default_rng(cfg.seed)
    best_single = int(np.argmax(cache.class_su[idx_all]))
    memo: dict[bytes, float] = {}

    def score(bits: np.ndarray) -> float:
        key = np.packbits(bits).tobytes()
        if key not in memo:
            memo[key] = _merit_idx(idx_all[bits], cache)
        return memo[key]

    def repair(bits: np.ndarray) -> np.ndarray:
        if not bits.any():
            bits[best_single] = True
        return bits

    order = np.argsort(-cache.class_su[idx_all], kind="stable")
    pop = []
    for i in order[: min(m, max(1, cfg.population // 2))]:
        b = np.zeros(m, dtype=bool)
        b[i] = True
        pop.append(b)
    while len(pop) < cfg.population:
        pop.append(repair(rng.random(m) < 0.5))
    fit = np.array([score(b) for b in pop])
    best_bits, best_fit = pop[int(np.argmax(fit))].copy(), float(fit.max())

    def pick() -> np.ndarray:
        cand = rng.integers(0, len(pop), size=cfg.tournament)
        return pop[int(cand[np.argmax(fit[cand])])]

    for _ in range(cfg.generations):
        nxt = [best_bits.copy()]
        while len(nxt) < cfg.population:
            a, b = pick().copy(), pick().copy()
            if m > 1 and rng.random() < cfg.crossover:
                cut = int(rng.integers(1, m))
                a[cut:], b[cut:] = b[cut:].copy(), a[cut:].copy()
            for child in (a, b):
                flip = rng.random(m) < cfg.mutation
                child ^= flip
                nxt.append(repair(child))
        pop = nxt[: cfg.population]
        fit = np.array([score(b) for b in pop])
        i = int(np.argmax(fit))
        if fit[i] > best_fit:
            best_bits, best_fit = pop[i].copy(), float(fit[i])
    names = tuple(f for f, keep in zip(feats, best_bits) if keep)
    return FeatureSubset(names, best_fit)


def greedy_forward(all_features: Sequence[str], cache: CorrelationCache) -> FeatureSubset:
    """Deterministic forward selection: add the best feature while merit improves."""
    feats = list(all_features)
    if not feats:
        raise ValueError("greedy search needs at least one candidate feature")
    idx_all = cache.index(feats)
    chosen: list[int] = []
    best = -1.0
    while True:
        step = None
        for i in idx_all:
            if i in chosen:
                continue
            m = _merit_idx(np.array(sorted(chosen + [i])), cache)
            if m > best + 1e-15:
                best, step = m, i
        if step is None:
            break
        chosen.append(step)
    keep = set(chosen)
    return FeatureSubset(tuple(f for f, i in zip(feats, idx_all) if i in keep), best)


def exhaustive_search(all_features: Sequence[str], cache: CorrelationCache) -> FeatureSubset:
    """Best subset by enumerating all ``2**m - 1`` non-empty subsets (small m only)."""
    feats = list(all_features)
    m = len(feats)
    if m > 20:
        raise ValueError("exhaustive search is limited to 20 features")
    idx_all = np.array(cache.index(feats))
    best, best_mask = -1.0, 0
    for mask in range(1, 1 << m):
        sel = [i for i in range(m) if mask >> i & 1]
        v = _merit_idx(idx_all[sel], cache)
        if v > best:
            best, best_mask = v, mask
    return FeatureSubset(tuple(f for i, f in enumerate(feats) if best_mask >> i & 1), best)


def select_features(d: Dataset, cfg: GeneticSearchConfig = GeneticSearchConfig(),
                    bins: int = DEFAULT_BINS, method: str = "genetic") -> FeatureSubset:
    cache = correlation_cache(d, bins)
    if method == "genetic":
        return genetic_search(d.schema.names, cache, cfg)
    if method == "greedy":
        return greedy_forward(d.schema.names, cache)
    raise ValueError(f"unknown search method {method!r}")
