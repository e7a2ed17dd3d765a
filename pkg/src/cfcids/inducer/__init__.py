"""Classifier induction behind a small registry, plus evaluation and CV.

An inducer is any callable ``(Dataset, InducerSpec) -> classifier`` where the
classifier offers ``classes``, ``predict_proba(Dataset)``, ``predict(Dataset)``,
``classify(row)`` and ``to_dict()``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..dataset import Dataset, FeatureSchema
from .evaluation import EvaluationReport, evaluate, stratified_folds
from .tree import DecisionTree, InducerSpec, induce_tree, root_gains

_INDUCERS: dict[str, Callable] = {"c45": induce_tree}
_LOADERS: dict[str, Callable] = {"c45": DecisionTree.from_dict}


def register_inducer(kind: str, induce_fn: Callable, load_fn: Callable):
    _INDUCERS[kind] = induce_fn
    _LOADERS[kind] = load_fn


def induce(d: Dataset, spec: InducerSpec = InducerSpec()):
    try:
        fn = _INDUCERS[spec.kind]
    except KeyError:
        raise ValueError(f"unknown inducer kind {spec.kind!r}") from None
    return fn(d, spec)


def classifier_from_dict(d: dict, schema: FeatureSchema):
    return _LOADERS[d["kind"]](d, schema)


def classify(c, x):
    return c.classify(x)


def cross_validate(d: Dataset, spec: InducerSpec = InducerSpec(), q: int = 10, strata=None, seed: int = 0):
    """Mean fold accuracy (unweighted across folds) and the per-fold reports."""
    if strata is None:
        strata = d.strata()
    classes = d.classes
    reports = []
    for train_idx, test_idx in stratified_folds(strata, q, seed):
        model = induce(d.take(train_idx), spec)
        test = d.take(test_idx)
        reports.append(evaluate(model.predict(test), test.labels, classes))
    return float(np.mean([r.accuracy for r in reports])), reports


__all__ = [
    "DecisionTree",
    "EvaluationReport",
    "InducerSpec",
    "classifier_from_dict",
    "classify",
    "cross_validate",
    "evaluate",
    "induce",
    "induce_tree",
    "register_inducer",
    "root_gains",
    "stratified_folds",
]
