"""Per-class TP/FP rates, stratified folds and cross-validation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    """Confusion matrix (rows = truth, columns = prediction) and derived rates.

    A class absent from the truth has an undefined TPR (NaN); it carries zero
    weight in the instance-weighted averages.
    """

    classes: tuple[str, ...]
    confusion: np.ndarray

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    @property
    def tpr(self) -> np.ndarray:
        s = self.support
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(s > 0, np.diag(self.confusion) / np.where(s > 0, s, 1), np.nan)

    @property
    def fpr(self) -> np.ndarray:
        neg = self.n - self.support
        false_pos = self.confusion.sum(axis=0) - np.diag(self.confusion)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(neg > 0, false_pos / np.where(neg > 0, neg, 1), np.nan)

    def _weighted(self, rates: np.ndarray) -> float:
        s = self.support.astype(float)
        ok = (s > 0) & ~np.isnan(rates)
        return float((s[ok] * rates[ok]).sum() / s[ok].sum()) if ok.any() else float("nan")

    @property
    def weighted_tpr(self) -> float:
        return self._weighted(self.tpr)

    @property
    def weighted_fpr(self) -> float:
        return self._weighted(self.fpr)

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.n) if self.n else float("nan")

    def to_dict(self) -> dict:
        def num(x):
            return None if np.isnan(x) else float(x)
        return {"classes": list(self.classes), "confusion": self.confusion.astype(int).tolist(),
                "tpr": [num(v) for v in self.tpr], "fpr": [num(v) for v in self.fpr],
                "weighted_tpr": num(self.weighted_tpr), "weighted_fpr": num(self.weighted_fpr),
                "accuracy": num(self.accuracy)}

    def table_rows(self) -> list[list[str]]:
        """Header plus TP and FP rows in percent, last column the weighted average."""
        def pct(x):
            return "n/a" if np.isnan(x) else f"{100 * x:.2f}"
        head = ["", *self.classes, "Average"]
        tp = ["TP", *(pct(v) for v in self.tpr), pct(self.weighted_tpr)]
        fp = ["FP", *(pct(v) for v in self.fpr), pct(self.weighted_fpr)]
        return [head, tp, fp]

    def format_table(self) -> str:
        rows = self.table_rows()
        widths = [max(len(r[j]) for r in rows) for j in range(len(rows[0]))]
        lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
        lines.append(f"accuracy {100 * self.accuracy:.2f}%  n={self.n}")
        return "\n".join(lines) + "\n"


def evaluate(predictions: Sequence, truth: Sequence, classes: Sequence[str] | None = None) -> EvaluationReport:
    predictions = np.asarray(predictions, dtype=object)
    truth = np.asarray(truth, dtype=object)
    if len(predictions) != len(truth):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(truth)} labels")
    if classes is None:
        classes = sorted(set(truth.tolist()) | set(predictions.tolist()))
    classes = tuple(classes)
    pos = {c: i for i, c in enumerate(classes)}
    unknown = (set(truth.tolist()) | set(predictions.tolist())) - set(pos)
    if unknown:
        raise ValueError(f"labels outside the class set: {sorted(unknown)}")
    conf = np.zeros((len(classes), len(classes)), dtype=np.int64)
    if len(truth):
        t = np.array([pos[v] for v in truth.tolist()])
        p = np.array([pos[v] for v in predictions.tolist()])
        np.add.at(conf, (t, p), 1)
    return EvaluationReport(classes, conf)


def stratified_folds(strata: Sequence, q: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded stratified partition into ``q`` (train, test) index pairs.

    Each stratum is shuffled and dealt round-robin over the folds; the dealing
    position carries over from one stratum to the next so fold sizes stay
    balanced overall.
    """
    strata = np.asarray(strata, dtype=object)
    n = len(strata)
    if q < 2:
        raise ValueError("need at least 2 folds")
    if q > n:
        raise ValueError(f"cannot make {q} folds from {n} instances")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    offset = 0
    for s in sorted(set(strata.tolist())):
        idx = np.flatnonzero(strata == s)
        idx = idx[rng.permutation(len(idx))]
        fold_of[idx] = (offset + np.arange(len(idx))) % q
        offset = (offset + len(idx)) % q
    all_idx = np.arange(n)
    return [(all_idx[fold_of != f], all_idx[fold_of == f]) for f in range(q)]
