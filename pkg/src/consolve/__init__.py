"""Consistency-model solver for small routing and independent-set problems.

Train a graph network to map noisy decision states at any noise level
directly to optimal solutions, then solve new instances with few-step
sampling plus objective-guided gradient search over the input field.
"""

__version__ = "0.1.0"

from .checkpoint import load_model, save_model
from .estimator import ConsistencySolver
from .instances import Instance, LabeledSample, generate, read_jsonl, write_jsonl
from .network import GnnConfig, Model
from .objectives import FeasibleSolution, objective
from .oracles import label, oracle_solve
from .solver import SamplerConfig, SearchConfig, SolveReport, solve
from .state import BernoulliField, DecisionState, solution_to_state
from .training import TrainConfig, train
from .verify import format_report, run_suite

__all__ = [
    "Instance",
    "LabeledSample",
    "FeasibleSolution",
    "BernoulliField",
    "DecisionState",
    "ConsistencySolver",
    "GnnConfig",
    "Model",
    "SamplerConfig",
    "SearchConfig",
    "SolveReport",
    "TrainConfig",
    "generate",
    "label",
    "load_model",
    "objective",
    "oracle_solve",
    "read_jsonl",
    "run_suite",
    "format_report",
    "save_model",
    "solution_to_state",
    "solve",
    "train",
    "write_jsonl",
    "__version__",
]
