"""Joint waveform/filter design: Dinkelbach outer ratio, ADMM splitting, MM inner solver."""

from .admm import AdmmResult, admm_solve, lambda_max_B
from .outer import DesignResult, DinkelbachResult, design, dinkelbach_loop, violation
from .params import SolverParams
from .steps import (
    AdmmContext,
    AdmmState,
    build_R0_R1,
    build_T,
    compute_b,
    dinkelbach_ratio,
    mm_uqp,
    admm_step_x,
    admm_step_xhat,
    admm_step_xtilde,
    papr_project,
    update_filter,
)

__all__ = [
    "AdmmContext", "AdmmResult", "AdmmState", "DesignResult", "DinkelbachResult", "SolverParams",
    "admm_solve", "admm_step_x", "admm_step_xhat", "admm_step_xtilde", "build_R0_R1", "build_T",
    "compute_b", "design", "dinkelbach_loop", "dinkelbach_ratio", "lambda_max_B", "mm_uqp",
    "papr_project", "update_filter", "violation",
]
