"""
plrtest - penalized likelihood ratio two-sample test

This module provides the PLR test for comparing two densities on the real line,
built on a tensor product Sobolev x indicator kernel with a probabilistic ANOVA
decomposition. It also ships the MMD and Kolmogorov-Smirnov baselines and a
Monte-Carlo harness for size/power studies.
"""

from importlib import metadata as _metadata

# Debug flag - set to True to enable debug output
debug = False

from .errors import *
from .utils import ResultStore, DiskStore, CompressedStore
from .kernels import (
    KernelConfig,
    Dataset,
    GramSet,
    bernoulli_k,
    sobolev_kernel,
    discrete_kernel,
    decompose_discrete,
    decompose_continuous_gram,
    build_grams,
    reduced_kernel,
    model_gram,
)
from .quadrature import QuadGrid, gauss_legendre_01, joint_grid
from .estimator import (
    ModelKind,
    FittedDensity,
    NewtonConfig,
    AnovaParts,
    objective,
    gradient,
    hessian,
    fit,
    eval_eta,
    eval_density,
    anova_components,
    make_dataset,
    map_to_unit,
)
from .plr import (
    NullParams,
    PlrResult,
    plr_statistic,
    null_params,
    effective_dimension,
    adaptive_lambda,
    test,
    split_test,
    permutation_calibrate,
    separation_rate,
    separation_estimate,
    oracle_lambda,
)
from .baselines import (
    BaselineResult,
    mmd_biased,
    score_statistic,
    score_to_mmd_factor,
    ks_statistic,
    ks_test,
    baseline_permutation,
    mmd_test,
)
from .simulate import SettingSpec, PowerRow, PowerTable, STUDY_DELTAS, generate, run_experiment

try:
    __version__ = _metadata.version("plrtest")
except _metadata.PackageNotFoundError:
    __version__ = "0.0.0"
__author__ = "Omena0"

__all__ = [
    "KernelConfig", "Dataset", "GramSet", "QuadGrid", "ModelKind", "FittedDensity",
    "NewtonConfig", "AnovaParts", "NullParams", "PlrResult", "BaselineResult",
    "SettingSpec", "PowerRow", "PowerTable", "STUDY_DELTAS",
    "ResultStore", "DiskStore", "CompressedStore",
    "bernoulli_k", "sobolev_kernel", "discrete_kernel", "decompose_discrete",
    "decompose_continuous_gram", "build_grams", "reduced_kernel", "model_gram",
    "gauss_legendre_01", "joint_grid",
    "objective", "gradient", "hessian", "fit", "eval_eta", "eval_density",
    "anova_components", "make_dataset", "map_to_unit",
    "plr_statistic", "null_params", "effective_dimension", "adaptive_lambda",
    "test", "split_test", "permutation_calibrate", "separation_rate",
    "separation_estimate", "oracle_lambda",
    "mmd_biased", "score_statistic", "score_to_mmd_factor", "ks_statistic",
    "ks_test", "baseline_permutation", "mmd_test",
    "generate", "run_experiment",
]
