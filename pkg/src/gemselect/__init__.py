"""Joint discriminative clustering and feature selection.

A skip-connected MLP is trained to maximize a geometry-aware
generalized mutual information (MMD or Wasserstein, one-vs-all or
one-vs-one) while a hierarchical group-lasso proximal operator
eliminates input features along a dense-to-sparse penalty path.
"""

from .datagen import Dataset, Scenario1Params, gen_dataset1, gen_dataset2, gen_scenario
from .gemini import GeminiSpec, cluster_weights, gemini_value, gemini_value_and_grad, mmd_gemini, wasserstein_gemini
from .geometry import AffinityMatrix, AffinitySpec, pairwise_affinity
from .metrics import SelectionTruth, ari, cvr, majority_map, vser
from .model import SkipConnectedModel, forward, init_model, soft_assign
from .ot import OtSolverConfig, ot_distance
from .path import PathConfig, PathSnapshot, fit_path, predict, select_model
from .prox import active_set, apply_prox, group_penalty, hier_prox

__version__ = "0.1.0"

__all__ = [
    "AffinityMatrix",
    "AffinitySpec",
    "Dataset",
    "GeminiSpec",
    "OtSolverConfig",
    "PathConfig",
    "PathSnapshot",
    "Scenario1Params",
    "SelectionTruth",
    "SkipConnectedModel",
    "active_set",
    "apply_prox",
    "ari",
    "cluster_weights",
    "cvr",
    "fit_path",
    "forward",
    "gemini_value",
    "gemini_value_and_grad",
    "gen_dataset1",
    "gen_dataset2",
    "gen_scenario",
    "group_penalty",
    "hier_prox",
    "init_model",
    "majority_map",
    "mmd_gemini",
    "ot_distance",
    "pairwise_affinity",
    "predict",
    "select_model",
    "soft_assign",
    "vser",
    "wasserstein_gemini",
]
