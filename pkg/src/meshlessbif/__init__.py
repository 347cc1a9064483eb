"""Random projection networks for steady states, continuation and stability of PDEs."""

from .basis import Domain, RpnnBasis, eval_features, sample_basis
from .continuation import Branch, BranchPoint, detect_events, switch_branch, trace_branch
from .diagnostics import DecayReport, boundary_rank_check, svd_decay_report
from .problems import DEFAULTS, ProblemDef, make_problem
from .solver import SteadyState, newton_solve, truncated_svd
from .stability import SpectrumResult, arnoldi_eigs, build_pencil, shift_invert_eigs

__all__ = [
    "Branch",
    "BranchPoint",
    "DEFAULTS",
    "DecayReport",
    "Domain",
    "ProblemDef",
    "RpnnBasis",
    "SpectrumResult",
    "SteadyState",
    "arnoldi_eigs",
    "boundary_rank_check",
    "build_pencil",
    "detect_events",
    "eval_features",
    "make_problem",
    "newton_solve",
    "sample_basis",
    "shift_invert_eigs",
    "svd_decay_report",
    "switch_branch",
    "trace_branch",
    "truncated_svd",
]
