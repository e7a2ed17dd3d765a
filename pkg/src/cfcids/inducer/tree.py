"""C4.5-style decision tree.

Growth picks, among features whose information gain is positive and at least
the average over splittable features, the one with the highest gain ratio.
Continuous (and ordinal, by rank) features split at midpoints between
adjacent distinct values, with gain reduced by ``log2(#candidate cuts) / N``.
Symbolic features split multiway; categories holding fewer than ``min_leaf``
instances share one pooled branch. Instances with a missing value are sent
down every branch with weights proportional to the branch sizes, both when
growing and when classifying. The grown tree is then pruned bottom-up with
the pessimistic (upper confidence limit) error estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from ..dataset import CONTINUOUS, ORDINAL, SYMBOLIC, Dataset, FeatureSchema

_EPS = 1e-9


@dataclass(frozen=True)
class InducerSpec:
    kind: str = "c45"
    confidence: float = 0.2
    min_leaf: int = 6
    prune: bool = True

    def __post_init__(self):
        if not 0.0 < self.confidence <= 0.5:
            raise ValueError("pruning confidence must be in (0, 0.5]")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "confidence": self.confidence,
                "min_leaf": self.min_leaf, "prune": self.prune}


@dataclass(eq=False)
class Node:
    dist: np.ndarray                      # weighted class counts of training instances
    feature: int = -1                     # schema index; -1 marks a leaf
    threshold: float = math.nan           # numeric split: branch 0 is x <= threshold
    code_to_branch: np.ndarray | None = None  # symbolic split: category code -> branch, -1 unrouted
    children: list["Node"] = field(default_factory=list)
    fractions: np.ndarray | None = None   # share of known training weight per branch

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def added_errors(n: float, e: float, cf: float) -> float:
    """Extra errors predicted at confidence ``cf`` on top of ``e`` observed in ``n``."""
    if n <= 0:
        return 0.0
    if e < 1e-6:
        return n * (1.0 - math.exp(math.log(cf) / n))
    if e < 0.9999:
        v = n * (1.0 - math.exp(math.log(cf) / n))
        return v + e * (added_errors(n, 1.0, cf) - v)
    if e + 0.5 >= n:
        return 0.67 * (n - e)
    z2 = NormalDist().inv_cdf(1.0 - cf) ** 2
    pr = (e + 0.5 + z2 / 2 + math.sqrt(z2 * ((e + 0.5) * (1 - (e + 0.5) / n) + z2 / 4))) / (n + z2)
    return n * pr - e


def _h(counts: np.ndarray) -> np.ndarray:
    """Entropy in bits along the last axis of (weighted) count arrays."""
    counts = np.asarray(counts, dtype=float)
    tot = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(tot > 0, counts / np.where(tot > 0, tot, 1.0), 0.0)
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def _split_info(branch_weights, missing: float, total: float) -> float:
    parts = np.append(np.asarray(branch_weights, dtype=float), missing) / total
    parts = parts[parts > 0]
    return float(-(parts * np.log2(parts)).sum())


@dataclass
class _Split:
    feature: int
    gain: float
    ratio: float
    threshold: float = math.nan
    code_to_branch: np.ndarray | None = None
    n_branches: int = 2


class _Encoded:
    """Columns recoded for the tree: floats for numeric, ints for symbolic."""

    def __init__(self, d: Dataset, categories: dict[int, tuple[str, ...]]):
        self.numeric = {}
        self.symbolic = {}
        for q, f in enumerate(d.schema.features):
            col = d.columns[q]
            if f.kind == CONTINUOUS:
                self.numeric[q] = np.asarray(col, dtype=float)
            elif f.kind == ORDINAL:
                rank = {c: float(r) for r, c in enumerate(f.categories)}
                self.numeric[q] = np.array([rank.get(v, np.nan) for v in col.tolist()], dtype=float)
            else:
                code = {c: i for i, c in enumerate(categories[q])}
                self.symbolic[q] = np.array([code.get(v, -1) for v in col.tolist()], dtype=np.int64)


def _categories(d: Dataset) -> dict[int, tuple[str, ...]]:
    cats = {}
    for q, f in enumerate(d.schema.features):
        if f.kind == SYMBOLIC:
            if f.categories is not None:
                cats[q] = tuple(f.categories)
            else:
                cats[q] = tuple(sorted({v for v in d.columns[q].tolist() if v != d.schema.missing}))
    return cats


class _Grower:
    def __init__(self, enc: _Encoded, y: np.ndarray, n_classes: int, spec: InducerSpec, m: int,
                 categories: dict[int, tuple[str, ...]]):
        self.enc = enc
        self.categories = categories
        self.y = y
        self.c = n_classes
        self.spec = spec
        self.m = m

    def class_counts(self, idx, w) -> np.ndarray:
        return np.bincount(self.y[idx], weights=w, minlength=self.c).astype(float)

    def numeric_split(self, q, idx, w, total) -> _Split | None:
        x = self.enc.numeric[q][idx]
        known = ~np.isnan(x)
        wk = w[known].sum()
        if wk < 2 * self.spec.min_leaf - _EPS:
            return None
        xs, ys, ws = x[known], self.y[idx][known], w[known]
        order = np.argsort(xs, kind="stable")
        xs, ys, ws = xs[order], ys[order], ws[order]
        onehot = np.zeros((len(xs), self.c))
        onehot[np.arange(len(xs)), ys] = ws
        if len(xs) < 2:
            return None
        cum = np.cumsum(onehot, axis=0)
        left = cum[:-1]
        right = cum[-1] - left
        wl = left.sum(axis=1)
        wr = wk - wl
        min_split = min(max(0.1 * wk / self.c, self.spec.min_leaf), 25.0)
        ok = (xs[1:] > xs[:-1]) & (wl >= min_split - _EPS) & (wr >= min_split - _EPS)
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            return None
        hk = float(_h(cum[-1]))
        info = (wl[cand] * _h(left[cand]) + wr[cand] * _h(right[cand])) / wk
        gains = hk - info
        best = int(np.argmax(gains))
        i = cand[best]
        gain = (wk / total) * gains[best] - math.log2(cand.size) / total
        si = _split_info([wl[i], wr[i]], total - wk, total)
        thr = (xs[i] + xs[i + 1]) / 2.0
        # midpoint can round up to the upper value; keep the split where it was found
        if not thr < xs[i + 1]:
            thr = xs[i]
        return _Split(q, gain, gain / si if si > 0 else 0.0, threshold=float(thr))

    def symbolic_split(self, q, idx, w, total) -> _Split | None:
        codes = self.enc.symbolic[q][idx]
        known = codes >= 0
        wk = w[known].sum()
        if wk < 2 * self.spec.min_leaf - _EPS:
            return None
        ncat = int(codes.max()) + 1 if known.any() else 0
        if ncat == 0:
            return None
        kc, ky, kw = codes[known], self.y[idx][known], w[known]
        table = np.zeros((ncat, self.c))
        np.add.at(table, (kc, ky), kw)
        cat_w = table.sum(axis=1)
        present = np.flatnonzero(cat_w > 0)
        big = [int(c) for c in present if cat_w[c] >= self.spec.min_leaf - _EPS]
        small = [int(c) for c in present if cat_w[c] < self.spec.min_leaf - _EPS]
        branches = [[c] for c in big]
        if small:
            pool_w = cat_w[small].sum()
            if pool_w >= self.spec.min_leaf - _EPS or not branches:
                branches.append(small)
            else:
                largest = int(np.argmax([cat_w[b].sum() for b in branches]))
                branches[largest] = branches[largest] + small
        if len(branches) < 2:
            return None
        bt = np.array([table[b].sum(axis=0) for b in branches])
        bw = bt.sum(axis=1)
        hk = float(_h(bt.sum(axis=0)))
        info = float((bw * _h(bt)).sum() / wk)
        gain = (wk / total) * (hk - info)
        si = _split_info(bw, total - wk, total)
        c2b = np.full(len(self.categories[q]), -1, dtype=np.int64)
        for bi, b in enumerate(branches):
            c2b[b] = bi
        return _Split(q, gain, gain / si if si > 0 else 0.0, code_to_branch=c2b, n_branches=len(branches))

    def candidate_splits(self, idx, w) -> list[_Split]:
        total = w.sum()
        out = []
        for q in range(self.m):
            if q in self.enc.numeric:
                s = self.numeric_split(q, idx, w, total)
            else:
                s = self.symbolic_split(q, idx, w, total)
            if s is not None:
                out.append(s)
        return out

    def choose(self, splits: list[_Split]) -> _Split | None:
        positive = [s for s in splits if s.gain > _EPS]
        if not positive:
            return None
        avg = sum(s.gain for s in positive) / len(positive)
        eligible = [s for s in positive if s.gain >= avg - _EPS]
        return max(eligible, key=lambda s: s.ratio)

    def branch_of(self, s: _Split, idx) -> np.ndarray:
        if s.code_to_branch is None:
            x = self.enc.numeric[s.feature][idx]
            b = np.where(x <= s.threshold, 0, 1)
            b[np.isnan(x)] = -1
            return b
        codes = self.enc.symbolic[s.feature][idx]
        b = np.full(len(idx), -1, dtype=np.int64)
        k = codes >= 0
        b[k] = s.code_to_branch[codes[k]]
        return b

    def grow(self, idx, w) -> Node:
        dist = self.class_counts(idx, w)
        node = Node(dist)
        if (dist > _EPS).sum() <= 1 or dist.sum() < 2 * self.spec.min_leaf - _EPS:
            return node
        s = self.choose(self.candidate_splits(idx, w))
        if s is None:
            return node
        b = self.branch_of(s, idx)
        known = b >= 0
        bw = np.bincount(b[known], weights=w[known], minlength=s.n_branches)
        frac = bw / bw.sum()
        node.feature = s.feature
        node.threshold = s.threshold
        node.code_to_branch = s.code_to_branch
        node.fractions = frac
        unknown = np.flatnonzero(~known)
        for bi in range(s.n_branches):
            sel = np.flatnonzero(b == bi)
            cidx = np.concatenate([idx[sel], idx[unknown]])
            cw = np.concatenate([w[sel], w[unknown] * frac[bi]])
            node.children.append(self.grow(cidx, cw))
        return node


def _subtree_estimate(node: Node, cf: float) -> float:
    if node.is_leaf:
        n = node.dist.sum()
        e = n - node.dist.max()
        return e + added_errors(n, e, cf)
    return sum(_subtree_estimate(c, cf) for c in node.children)


def _prune(node: Node, cf: float) -> Node:
    if node.is_leaf:
        return node
    node.children = [_prune(c, cf) for c in node.children]
    n = node.dist.sum()
    e = n - node.dist.max()
    leaf_est = e + added_errors(n, e, cf)
    if leaf_est <= _subtree_estimate(node, cf) + 0.1:
        return Node(node.dist)
    return node


class DecisionTree:
    """Trained tree plus what it needs to read instances of its schema."""

    def __init__(self, schema: FeatureSchema, classes, priority, categories, root: Node, spec: InducerSpec):
        self.schema = schema
        self.classes = tuple(classes)
        self.priority = np.asarray(priority, dtype=np.int64)  # rank of each class for tie-breaking
        self.categories = dict(categories)
        self.root = root
        self.spec = spec

    @property
    def fingerprint(self) -> str:
        return self.schema.fingerprint()

    @property
    def n_nodes(self) -> int:
        return sum(1 for _ in self.root.walk())

    @property
    def n_leaves(self) -> int:
        return sum(1 for n in self.root.walk() if n.is_leaf)

    def depth(self, node: Node | None = None) -> int:
        node = node or self.root
        return 0 if node.is_leaf else 1 + max(self.depth(c) for c in node.children)

    def _best(self, probs: np.ndarray) -> np.ndarray:
        probs = np.atleast_2d(probs)
        top = probs >= probs.max(axis=1, keepdims=True) - 1e-12
        rank = np.where(top, self.priority[None, :], np.iinfo(np.int64).max)
        return np.argmin(rank, axis=1)

    def _check(self, d: Dataset):
        if d.schema.fingerprint() != self.fingerprint:
            raise ValueError(f"schema mismatch: classifier {self.fingerprint}, data {d.schema.fingerprint()}")

    def predict_proba(self, d: Dataset) -> np.ndarray:
        self._check(d)
        enc = _Encoded(d, self.categories)
        out = np.zeros((d.n, len(self.classes)))
        self._descend(self.root, enc, np.arange(d.n), np.ones(d.n), out)
        return out

    def _descend(self, node: Node, enc: _Encoded, idx, w, out):
        if idx.size == 0:
            return
        if node.is_leaf:
            tot = node.dist.sum()
            p = node.dist / tot if tot > 0 else np.full(len(self.classes), 1.0 / len(self.classes))
            np.add.at(out, idx, w[:, None] * p[None, :])
            return
        if node.code_to_branch is None:
            x = enc.numeric[node.feature][idx]
            b = np.where(x <= node.threshold, 0, 1)
            b[np.isnan(x)] = -1
        else:
            codes = enc.symbolic[node.feature][idx]
            b = np.full(len(idx), -1, dtype=np.int64)
            k = codes >= 0
            b[k] = node.code_to_branch[codes[k]]
        unknown = b < 0
        for bi, child in enumerate(node.children):
            sel = b == bi
            cidx = np.concatenate([idx[sel], idx[unknown]])
            cw = np.concatenate([w[sel], w[unknown] * node.fractions[bi]])
            self._descend(child, enc, cidx, cw, out)

    def predict(self, d: Dataset) -> np.ndarray:
        probs = self.predict_proba(d)
        return np.array([self.classes[i] for i in self._best(probs)], dtype=object)

    def classify(self, x) -> tuple[str, np.ndarray]:
        """Label and class-probability vector for one instance (raw values in schema order)."""
        if isinstance(x, Dataset):
            if x.n != 1:
                raise ValueError("classify expects a single instance")
            d = x
        else:
            x = list(x)
            if len(x) != self.schema.m:
                raise ValueError(f"instance has {len(x)} values, classifier expects {self.schema.m}")
            d = Dataset.from_rows(self.schema, [x])
        p = self.predict_proba(d)[0]
        return self.classes[int(self._best(p)[0])], p

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        def node_dict(n: Node) -> dict:
            d = {"dist": [float(v) for v in n.dist]}
            if not n.is_leaf:
                d["feature"] = self.schema.features[n.feature].name
                d["fractions"] = [float(v) for v in n.fractions]
                if n.code_to_branch is None:
                    d["threshold"] = float(n.threshold)
                else:
                    d["branches"] = [int(v) for v in n.code_to_branch]
                d["children"] = [node_dict(c) for c in n.children]
            return d

        return {"kind": "c45", "spec": self.spec.to_dict(), "classes": list(self.classes),
                "priority": [int(v) for v in self.priority],
                "categories": {self.schema.features[q].name: list(c) for q, c in sorted(self.categories.items())},
                "root": node_dict(self.root)}

    @classmethod
    def from_dict(cls, d: dict, schema: FeatureSchema) -> "DecisionTree":
        def build(nd: dict) -> Node:
            n = Node(np.array(nd["dist"], dtype=float))
            if "feature" in nd:
                n.feature = schema.index(nd["feature"])
                n.fractions = np.array(nd["fractions"], dtype=float)
                if "threshold" in nd:
                    n.threshold = float(nd["threshold"])
                else:
                    n.code_to_branch = np.array(nd["branches"], dtype=np.int64)
                n.children = [build(c) for c in nd["children"]]
            return n

        spec = InducerSpec(**d["spec"])
        cats = {schema.index(k): tuple(v) for k, v in d["categories"].items()}
        return cls(schema, d["classes"], d["priority"], cats, build(d["root"]), spec)


def _prepare(d: Dataset, spec: InducerSpec):
    if d.n == 0 or d.labels is None:
        raise ValueError("cannot induce a tree from an empty or unlabeled dataset")
    classes = d.classes
    cpos = {c: i for i, c in enumerate(classes)}
    y = np.array([cpos[v] for v in d.labels.tolist()], dtype=np.int64)
    counts = np.bincount(y, minlength=len(classes))
    order = sorted(range(len(classes)), key=lambda i: (-counts[i], i))
    priority = np.empty(len(classes), dtype=np.int64)
    priority[order] = np.arange(len(classes))
    cats = _categories(d)
    grower = _Grower(_Encoded(d, cats), y, len(classes), spec, d.m, cats)
    return classes, priority, cats, grower


def induce_tree(d: Dataset, spec: InducerSpec = InducerSpec()) -> DecisionTree:
    classes, priority, cats, grower = _prepare(d, spec)
    root = grower.grow(np.arange(d.n), np.ones(d.n))
    if spec.prune:
        root = _prune(root, spec.confidence)
    return DecisionTree(d.schema, classes, priority, cats, root, spec)


def root_gains(d: Dataset, spec: InducerSpec = InducerSpec()) -> dict[str, float | None]:
    """Information gain of the best split on each feature at the root node.

    ``None`` marks features with no admissible split.
    """
    _, _, _, grower = _prepare(d, spec)
    splits = {s.feature: s.gain for s in grower.candidate_splits(np.arange(d.n), np.ones(d.n))}
    return {f.name: splits.get(q) for q, f in enumerate(d.schema.features)}
