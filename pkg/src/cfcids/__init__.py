"""Fuzzy cluster-feature classification (CFC) for intrusion detection.

Training augments a labeled set with features derived from a fuzzy c-means
clustering (the argmax cluster ``_Z``, the maximum membership ``_B`` and the
membership columns ``_P1.._Pk``), fits one decision tree per candidate cluster
count and keeps the one with the best cross-validated accuracy. Prediction
recomputes the cluster features of new instances against the stored centroids.
"""

from .dataset import (
    CONTINUOUS,
    ORDINAL,
    SYMBOLIC,
    Dataset,
    Feature,
    FeatureSchema,
    NormalizationParams,
    apply_normalization,
    fit_normalization,
    load_dataset,
    load_schema,
    sample_by_group,
)
from .infogain import FeatureWeights, compute_feature_weights, entropy, information_gain
from .fcm import CentroidSet, FcmConfig, FcmResult, fit as fcm_fit
from .augment import ClusterFeatureBlock, ManipulationMode, build_cluster_features, manipulate
from .select import FeatureSubset, GeneticSearchConfig, genetic_search
from .inducer import EvaluationReport, InducerSpec, cross_validate, evaluate, induce
from .cfc import CfcConfig, CfcModel, load_model, predict, save_model, train

__version__ = "0.1.0"

__all__ = [
    "CONTINUOUS",
    "ORDINAL",
    "SYMBOLIC",
    "CentroidSet",
    "CfcConfig",
    "CfcModel",
    "ClusterFeatureBlock",
    "Dataset",
    "EvaluationReport",
    "FcmConfig",
    "FcmResult",
    "Feature",
    "FeatureSchema",
    "FeatureSubset",
    "FeatureWeights",
    "GeneticSearchConfig",
    "InducerSpec",
    "ManipulationMode",
    "NormalizationParams",
    "apply_normalization",
    "build_cluster_features",
    "compute_feature_weights",
    "cross_validate",
    "entropy",
    "evaluate",
    "fcm_fit",
    "fit_normalization",
    "genetic_search",
    "induce",
    "information_gain",
    "load_dataset",
    "load_model",
    "load_schema",
    "manipulate",
    "predict",
    "sample_by_group",
    "save_model",
    "train",
]
