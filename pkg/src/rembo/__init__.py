"""Bayesian optimization in very high dimensions through random embeddings."""

from .acquisition import AcquisitionSpec, expected_improvement, maximize_acquisition
from .bench import BraninEmbedded, BraninRotated, ExternalCommand, ObjectiveSpec, SyntheticCategorical
from .box import Box
from .driver import RunConfig, random_search, run_interleaved, run_single
from .embedding import Embedding, draw_embedding, map_to_x
from .gp import Dataset, GpModel, fit, log_marginal_likelihood
from .hyperopt import HyperState, maybe_retune, observe_proposal
from .inner_opt import InnerOptBudget, cmaes_maximize, direct_maximize
from .kernels import KernelSpec
from .report import RunReport

__version__ = "0.1.0"

__all__ = [
    "AcquisitionSpec", "Box", "BraninEmbedded", "BraninRotated", "Dataset", "Embedding",
    "ExternalCommand", "GpModel", "HyperState", "InnerOptBudget", "KernelSpec", "ObjectiveSpec",
    "RunConfig", "RunReport", "SyntheticCategorical", "cmaes_maximize", "direct_maximize",
    "draw_embedding", "expected_improvement", "fit", "log_marginal_likelihood", "map_to_x",
    "maximize_acquisition", "maybe_retune", "observe_proposal", "random_search", "run_interleaved",
    "run_single",
]
