"""Training loop over candidate cluster counts, the operation phase, and
model persistence.

For every candidate ``k`` the normalized training data are clustered, the
cluster features are appended to the *original* features according to the
manipulation mode, a classifier is induced and scored by stratified q-fold
cross-validation. The candidate with the highest mean CV accuracy wins
(smaller ``k`` on ties).
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import fcm
from .augment import ClusterFeatureBlock, ManipulationMode, build_cluster_features, manipulate, manipulated_schema
from .dataset import (DataError, Dataset, FeatureSchema, NormalizationParams, SchemaMismatchError,
                      apply_normalization, fit_normalization)
from .infogain import DEFAULT_BINS, FeatureWeights, compute_feature_weights
from .inducer import InducerSpec, classifier_from_dict, cross_validate, evaluate, induce, stratified_folds
from .select import FeatureSubset, GeneticSearchConfig, correlation_cache, genetic_search, greedy_forward

FORMAT_NAME = "cfc-model"
FORMAT_VERSION = 1
JOBS_ENV = "CFC_JOBS"


class ModelFormatError(DataError):
    pass


class ModelCorruptError(ModelFormatError):
    pass


class ModelVersionError(ModelFormatError):
    pass


@dataclass(frozen=True)
class CfcConfig:
    K: tuple[int, ...]
    mode: ManipulationMode = ManipulationMode.T1
    q: int = 10
    inducer: InducerSpec = InducerSpec()
    alpha: float = 3.0
    tolerance: float = 1e-6
    max_iterations: int = 300
    criterion: str = "membership"
    selection: GeneticSearchConfig = GeneticSearchConfig()
    selection_method: str = "genetic"
    bins: int = DEFAULT_BINS
    seed: int = 0
    # re-cluster inside every CV fold instead of once on the full training set
    strict_cv: bool = False
    # "auto" uses group tags when the data carry them, else class labels
    stratify: str = "auto"
    n_jobs: int | None = None

    def __post_init__(self):
        K = tuple(sorted(set(int(k) for k in self.K)))
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "mode", ManipulationMode(self.mode))
        if not K:
            raise ValueError("K must be non-empty")
        if K[0] < 2:
            raise ValueError("every candidate k must be >= 2")
        if self.q < 2:
            raise ValueError("q must be >= 2")
        if self.stratify not in ("auto", "groups", "labels"):
            raise ValueError(f"unknown stratification {self.stratify!r}")
        if self.selection_method not in ("genetic", "greedy"):
            raise ValueError(f"unknown selection method {self.selection_method!r}")
        # validates alpha / tolerance / max_iterations / criterion
        fcm.FcmConfig(2, self.alpha, self.tolerance, self.max_iterations, 0, self.criterion)

    def fcm_config(self, k: int) -> fcm.FcmConfig:
        return fcm.FcmConfig(k, self.alpha, self.tolerance, self.max_iterations,
                             candidate_seed(self.seed, k), self.criterion)

    def to_dict(self) -> dict:
        return {"K": list(self.K), "mode": int(self.mode), "q": self.q, "inducer": self.inducer.to_dict(),
                "alpha": self.alpha, "tolerance": self.tolerance, "max_iterations": self.max_iterations,
                "criterion": self.criterion,
                "selection": {"population": self.selection.population,
                              "generations": self.selection.generations,
                              "crossover": self.selection.crossover, "mutation": self.selection.mutation,
                              "seed": self.selection.seed, "tournament": self.selection.tournament},
                "selection_method": self.selection_method, "bins": self.bins, "seed": self.seed,
                "strict_cv": self.strict_cv, "stratify": self.stratify}


def candidate_seed(seed: int, k: int) -> int:
    """FCM seed for candidate ``k``, independent of the other candidates."""
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class CandidateResult:
    k: int
    classifier: object
    centroids: fcm.CentroidSet
    accuracy: float
    subset: FeatureSubset | None
    n_features: int
    fcm_iterations: int
    fcm_converged: bool


@dataclass(frozen=True, eq=False)
class CfcModel:
    k: int
    classifier: object
    centroids: fcm.CentroidSet
    normalization: NormalizationParams
    weights: FeatureWeights
    schema: FeatureSchema
    mode: ManipulationMode
    subset: FeatureSubset | None
    fcm: fcm.FcmConfig
    version: int = FORMAT_VERSION

    @property
    def manipulated_schema(self) -> FeatureSchema:
        return manipulated_schema(self.schema, self.k, self.mode,
                                  self.subset.names if self.subset else None)

    def __eq__(self, other):
        if not isinstance(other, CfcModel):
            return NotImplemented
        return model_payload(self) == model_payload(other)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Prediction:
    labels: np.ndarray
    probabilities: np.ndarray  # (n, c), columns follow ``classes``
    classes: tuple[str, ...]
    cluster_features: ClusterFeatureBlock


def _strata(d: Dataset, how: str):
    if how == "labels" or (how == "auto" and d.groups is None):
        return d.labels
    if d.groups is None:
        raise DataError("stratification by groups requested but the data carry no group tags")
    return d.groups


def _select(full: Dataset, cfg: CfcConfig) -> FeatureSubset:
    cache = correlation_cache(full, cfg.bins)
    if cfg.selection_method == "greedy":
        return greedy_forward(full.schema.names, cache)
    return genetic_search(full.schema.names, cache, cfg.selection)


def _build(d: Dataset, cf: ClusterFeatureBlock, cfg: CfcConfig, subset: FeatureSubset | None = None):
    """Manipulated set for ``cf``; in T3 mode selects the subset unless given."""
    if cfg.mode != ManipulationMode.T3:
        return manipulate(d, cf, cfg.mode), None
    if subset is None:
        subset = _select(manipulate(d, cf, ManipulationMode.T2), cfg)
    return manipulate(d, cf, ManipulationMode.T3, subset.names), subset


def _strict_cv(d, enc, layout, weights, cfg: CfcConfig, k: int, strata) -> float:
    fc = cfg.fcm_config(k)
    classes = d.classes
    accs = []
    for train_idx, test_idx in stratified_folds(strata, cfg.q, cfg.seed):
        res = fcm.fit(enc.take(train_idx), fc, weights, layout)
        w_test = fcm.update_memberships(enc.take(test_idx), res.centroids, fc, weights)
        train_d, subset = _build(d.take(train_idx), build_cluster_features(res.memberships), cfg)
        test_d, _ = _build(d.take(test_idx), build_cluster_features(w_test), cfg, subset)
        clf = induce(train_d, cfg.inducer)
        accs.append(evaluate(clf.predict(test_d), test_d.labels, classes).accuracy)
    return float(np.mean(accs))


def _candidate(args) -> CandidateResult:
    d, enc, layout, weights, cfg, k, strata = args
    res = fcm.fit(enc, cfg.fcm_config(k), weights, layout)
    D, subset = _build(d, build_cluster_features(res.memberships), cfg)
    clf = induce(D, cfg.inducer)
    if cfg.strict_cv:
        acc = _strict_cv(d, enc, layout, weights, cfg, k, strata)
    else:
        acc, _ = cross_validate(D, cfg.inducer, cfg.q, strata, cfg.seed)
    return CandidateResult(k, clf, res.centroids, acc, subset, D.m, res.n_iter, res.converged)


def _jobs(cfg: CfcConfig) -> int:
    if cfg.n_jobs is not None:
        return max(1, cfg.n_jobs)
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def best_candidate(results: Sequence[CandidateResult]) -> CandidateResult:
    """Highest CV accuracy; ties go to the smallest k."""
    return min(results, key=lambda r: (-r.accuracy, r.k))


def train(d: Dataset, cfg: CfcConfig) -> tuple[CfcModel, list[CandidateResult]]:
    if d.n == 0 or d.labels is None:
        raise DataError("training needs a non-empty labeled dataset")
    d.schema.validate_user_names()
    if cfg.K[-1] > d.n:
        raise ValueError(f"candidate k={cfg.K[-1]} exceeds the {d.n} training instances")
    if cfg.q > d.n:
        raise ValueError(f"q={cfg.q} exceeds the {d.n} training instances")
    norm = fit_normalization(d)
    xn = apply_normalization(d, norm)
    weights = compute_feature_weights(xn, cfg.bins)
    layout = fcm.Layout.from_data(xn)
    enc = layout.encode(xn)
    strata = _strata(d, cfg.stratify)
    jobs = [(d, enc, layout, weights, cfg, k, strata) for k in cfg.K]
    n_jobs = min(_jobs(cfg), len(jobs))
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as ex:
            results = list(ex.map(_candidate, jobs))
    else:
        results = [_candidate(j) for j in jobs]
    best = best_candidate(results)
    model = CfcModel(best.k, best.classifier, best.centroids, norm, weights, d.schema,
                     cfg.mode, best.subset, cfg.fcm_config(best.k))
    return model, results


# -- operation phase -----------------------------------------------------------

def predict_many(model: CfcModel, d: Dataset) -> Prediction:
    """Cluster-feature and classify every instance of ``d`` (original schema)."""
    if d.schema.fingerprint() != model.schema.fingerprint():
        raise SchemaMismatchError(
            f"schema mismatch: model {model.schema.fingerprint()}, data {d.schema.fingerprint()}")
    xn = apply_normalization(d, model.normalization)
    d2 = fcm.distance_squared(xn, model.centroids, model.weights)
    W = fcm.memberships_from_distances(d2, model.fcm.alpha)
    cf = build_cluster_features(W)
    D = manipulate(d, cf, model.mode, model.subset.names if model.subset else None)
    probs = model.classifier.predict_proba(D)
    idx = model.classifier._best(probs) if len(probs) else np.empty(0, dtype=int)
    labels = np.array([model.classifier.classes[i] for i in idx], dtype=object)
    return Prediction(labels, probs, tuple(model.classifier.classes), cf)


def predict(model: CfcModel, x) -> tuple[str, np.ndarray, tuple[int, float, np.ndarray]]:
    """Label, class probabilities and cluster features ``(z, b, w)`` of one instance."""
    x = list(x)
    if len(x) != model.schema.m:
        raise SchemaMismatchError(f"instance has {len(x)} values, model expects {model.schema.m}")
    p = predict_many(model, Dataset.from_rows(model.schema, [x]))
    cf = p.cluster_features
    return p.labels[0], p.probabilities[0], (int(cf.z[0]), float(cf.b[0]), cf.p[0].copy())


# -- persistence -----------------------------------------------------------------

def model_payload(model: CfcModel) -> dict:
    f = model.fcm
    return {
        "schema": model.schema.to_dict(),
        "normalization": {k: [float(lo), float(hi)] for k, (lo, hi) in sorted(model.normalization.ranges.items())},
        "weights": {"weights": list(model.weights.weights), "bins": model.weights.bins},
        "fcm": {"k": f.k, "alpha": f.alpha, "tolerance": f.tolerance, "max_iterations": f.max_iterations,
                "seed": f.seed, "criterion": f.criterion},
        "k": model.k,
        "mode": int(model.mode),
        "subset": None if model.subset is None else {"names": list(model.subset.names),
                                                     "merit": model.subset.merit},
        "centroids": fcm.centroid_set_to_dict(model.centroids),
        "classifier": model.classifier.to_dict(),
    }


def _digest(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def model_to_json(model: CfcModel) -> str:
    payload = model_payload(model)
    doc = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "checksum": _digest(payload), "payload": payload}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def save_model(model: CfcModel, path):
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def model_from_json(text: str) -> CfcModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelCorruptError(f"model file is not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelCorruptError("not a CFC model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelVersionError(
            f"model format version {doc.get('version')!r} is not supported (this build reads version {FORMAT_VERSION})")
    payload = doc.get("payload")
    if not isinstance(payload, dict) or doc.get("checksum") != _digest(payload):
        raise ModelCorruptError("model checksum mismatch")
    try:
        schema = FeatureSchema.from_dict(payload["schema"])
        f = payload["fcm"]
        fcfg = fcm.FcmConfig(f["k"], f["alpha"], f["tolerance"], f["max_iterations"], f["seed"], f["criterion"])
        mode = ManipulationMode(payload["mode"])
        subset = None
        if payload["subset"] is not None:
            subset = FeatureSubset(tuple(payload["subset"]["names"]), payload["subset"]["merit"])
        k = payload["k"]
        mschema = manipulated_schema(schema, k, mode, subset.names if subset else None)
        return CfcModel(
            k=k,
            classifier=classifier_from_dict(payload["classifier"], mschema),
            centroids=fcm.centroid_set_from_dict(payload["centroids"]),
            normalization=NormalizationParams({n: (lo, hi) for n, (lo, hi) in payload["normalization"].items()}),
            weights=FeatureWeights(tuple(payload["weights"]["weights"]), payload["weights"]["bins"]),
            schema=schema, mode=mode, subset=subset, fcm=fcfg)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelCorruptError(f"malformed model payload: {exc}") from None


def load_model(path) -> CfcModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    return model_from_json(path.read_text(encoding="utf-8"))
