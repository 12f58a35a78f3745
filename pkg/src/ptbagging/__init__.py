"""Probability-thresholding bagging for imbalanced classification."""

from .calibration import PlattModel, apply_platt, fit_platt, fit_sigmoid
from .data import (Attribute, DataError, Dataset, class_priors, five_by_two_cv,
                   gen_gaussian_imbalanced, load_arff, load_csv, load_dataset, preprocess)
from .ensemble import (BaggedEnsemble, ensemble_posterior, fit_ensemble, load_ensemble,
                       predict_batch, predict_with_thresholds, save_ensemble)
from .harness import (DatasetSpec, ExperimentConfig, MethodSpec, ResultsTable,
                      full_potential_report, recall_symmetry_report, run_benchmark)
from .sampling import SamplerSpec
from .thresholds import ThresholdPolicy, resolve_thresholds, threshold_sweep
from .tree import ProbTree, TreeParams, fit_tree

__version__ = "0.1.0"

__all__ = [
    "Attribute", "BaggedEnsemble", "DataError", "Dataset", "DatasetSpec", "ExperimentConfig",
    "MethodSpec", "PlattModel", "ProbTree", "ResultsTable", "SamplerSpec", "ThresholdPolicy",
    "TreeParams", "apply_platt", "class_priors", "ensemble_posterior", "fit_ensemble",
    "fit_platt", "fit_sigmoid", "fit_tree", "five_by_two_cv", "full_potential_report",
    "gen_gaussian_imbalanced", "load_arff", "load_csv", "load_dataset", "load_ensemble",
    "predict_batch", "predict_with_thresholds", "preprocess", "recall_symmetry_report",
    "resolve_thresholds", "run_benchmark", "save_ensemble", "threshold_sweep",
]
