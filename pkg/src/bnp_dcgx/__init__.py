"""Covariate-dependent directed cyclic graphs via Bayesian nonparametric stable SEMs."""
from .errors import BNPDCGxError
from .model import (ChainState, ClusterParams, Dataset, Hyperparams, Sample, Trace,
                    init_state, validate_dataset)
from .predict import GraphPrediction, fitted_graphs, predict_B, predict_many
from .sampler import sweep, update_xi
from .simulate import GroundTruth, f_curve, gen_scenario1, gen_scenario2
from .stability import is_stable, spectral_radius
from .tempering import TemperingSchedule, run_tempered, swap_log_ratio

__version__ = "0.1.0"

__all__ = [
    "BNPDCGxError", "ChainState", "ClusterParams", "Dataset", "GraphPrediction",
    "GroundTruth", "Hyperparams", "Sample", "TemperingSchedule", "Trace", "f_curve",
    "fitted_graphs", "gen_scenario1", "gen_scenario2", "init_state", "is_stable",
    "predict_B", "predict_many", "run_tempered", "spectral_radius", "swap_log_ratio",
    "sweep", "update_xi", "validate_dataset",
]
