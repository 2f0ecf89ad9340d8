"""Certifiably optimal sparse portfolio selection by outer approximation."""
from __future__ import annotations

__version__ = "0.1.0"

from .bnc import Solution, SolveOptions, solve
from .enumerate import enumerate_optimum, restricted_qp
from .heuristic import HeuristicConfig, warm_start
from .instance import (
    Instance,
    ParseError,
    RegressionForm,
    build_regression_form,
    load_instance,
    load_orlibrary,
    load_returns_csv,
    save_instance,
)
from .oracle import DualCertificate, SparsityPattern, evaluate
from .qp import QpProblem, QpResult, solve_qp
from .relaxation import RelaxationResult, closed_form_diagonal, inout_bound

__all__ = [
    "DualCertificate",
    "HeuristicConfig",
    "Instance",
    "ParseError",
    "QpProblem",
    "QpResult",
    "RegressionForm",
    "RelaxationResult",
    "Solution",
    "SolveOptions",
    "SparsityPattern",
    "build_regression_form",
    "closed_form_diagonal",
    "enumerate_optimum",
    "evaluate",
    "inout_bound",
    "load_instance",
    "load_orlibrary",
    "load_returns_csv",
    "restricted_qp",
    "save_instance",
    "solve",
    "solve_qp",
    "warm_start",
]
