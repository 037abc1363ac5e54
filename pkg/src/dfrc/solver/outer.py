"""Outer alternation: closed-form filter, then Dinkelbach + ADMM on the waveform."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..comms import CommSpec, mui_all
from ..errors import InvalidInputError
from ..linalg import SpectralLowRank, hermitian_eig
from ..model import Scenario, Waveform, lfm_waveform, sinr, to_db
from .admm import admm_solve, gram_lambda_max
from .params import SolverParams
from .steps import ShiftedT, build_R0_R1, build_T, dinkelbach_ratio, update_filter

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AdmmRecord:
    outer: int
    inner: int
    iterations: int
    converged: bool
    primal: float
    dual: float
    accepted: bool


@dataclass(frozen=True, eq=False)
class DinkelbachResult:
    x: Waveform
    g_trace: np.ndarray
    records: list
    stop: str


@dataclass(frozen=True, eq=False)
class DesignResult:
    x: Waveform
    w: np.ndarray
    sinr_trace: np.ndarray
    cumulative_seconds: np.ndarray
    mui_per_user: np.ndarray
    budgets: np.ndarray
    feasible: np.ndarray
    dinkelbach_trace: list
    residual_trace: list
    wall_time: float
    converged: bool
    stop_reason: str
    first_feasible: int | None
    params: SolverParams = field(repr=False)

    @property
    def sinr_db(self) -> float:
        return float(self.sinr_trace[-1])

    @property
    def outer_iterations(self) -> int:
        return len(self.sinr_trace) - 1

    @property
    def admm_iterations(self) -> int:
        return int(sum(r.iterations for r in self.residual_trace))


def violation(x, spec: CommSpec) -> float:
    """``max_m psi_m / budget_m - 1`` (negative inside every ball, -inf without users)."""
    if spec.n_users == 0:
        return -np.inf
    return float(np.max(mui_all(x, spec) / spec.budgets) - 1.0)


def _balanced(t: ShiftedT, spec: CommSpec, params: SolverParams):
    T = t.T
    if params.balance is None:
        return T
    lam = T.lambda_max() if isinstance(T, SpectralLowRank) else float(hermitian_eig(T)[0][-1])
    if not lam > 0:
        return T
    ref = gram_lambda_max(spec.channel) if spec.n_users else 1.0
    factor = params.balance * ref / lam
    return T.scaled(factor) if isinstance(T, SpectralLowRank) else T * factor


def _tightened(spec: CommSpec, margin: float) -> CommSpec:
    if margin == 0 or spec.n_users == 0:
        return spec
    return replace(spec, budgets=spec.budgets * (1.0 - margin))


def dinkelbach_loop(w, x_init: Waveform, scenario: Scenario, spec: CommSpec, params: SolverParams,
                    outer: int = 0) -> DinkelbachResult:
    """Inner ratio maximization for a fixed filter.

    An ADMM output replaces the iterate when the current iterate violates a
    communication budget (restoration), or when it stays within the budgets
    and does not lower the ratio. Otherwise the previous iterate is kept and
    the loop stops. Before rejecting, ADMM is rerun once from the same point
    with ``admm_retry`` times the iteration cap.
    """
    r0, r1 = build_R0_R1(w, scenario)
    inner_spec = _tightened(spec, params.budget_margin)
    structured = params.backend == "structured"
    x = x_init
    g = dinkelbach_ratio(x, r0, r1)
    viol = violation(x, spec)
    trace = [g]
    records = []
    stop = "max_dinkelbach"
    for inner in range(params.max_dinkelbach):
        t = _balanced(build_T(r0, r1, g, params.beta_margin, structured=structured), spec, params)
        attempts = [params] if params.admm_retry <= 1 else \
            [params, params.replace(max_admm=params.max_admm * params.admm_retry)]
        for p in attempts:
            res = admm_solve(t, inner_spec, x, p)
            g_new = dinkelbach_ratio(res.x, r0, r1)
            viol_new = violation(res.x, spec)
            accept = viol > params.feas_tol or (viol_new <= params.feas_tol and g_new >= g)
            records.append(AdmmRecord(outer, inner, res.iterations, res.converged,
                                      float(res.primal_trace[-1]), float(res.dual_trace[-1]), accept))
            if accept:
                break
        if not accept:
            stop = "rejected"
            break
        rel = abs(g_new - g) / g
        x, g, viol = res.x, g_new, viol_new
        trace.append(g)
        if rel < params.tol_inner:
            stop = "tolerance"
            break
    return DinkelbachResult(x, np.array(trace), records, stop)


def design(scenario: Scenario, spec: CommSpec | None = None, params: SolverParams | None = None,
           x0: Waveform | None = None) -> DesignResult:
    """Alternate filter updates and waveform updates until the SINR settles."""
    params = params or SolverParams()
    spec = spec if spec is not None else CommSpec.empty(scenario.n_tx, scenario.code_length)
    spec.check(scenario)
    params.check_rho(scenario.code_length)
    x = x0 if x0 is not None else lfm_waveform(scenario)
    if x.n != scenario.n_x or x.n_tx != scenario.n_tx:
        raise InvalidInputError("initial waveform does not match the scenario")
    if x.energy != scenario.total_energy:
        x = Waveform(x.phases, x.n_tx, x.code_length, scenario.total_energy, x.magnitudes)

    start = time.perf_counter()
    w = update_filter(x, scenario)
    lin = [sinr(x, w, scenario)]
    seconds = [time.perf_counter() - start]
    first_feasible = 0 if violation(x, spec) <= params.feas_tol else None
    best_viol, last_gain = violation(x, spec), 0
    g_traces, records = [], []
    converged = False
    stop = "max_outer"
    for k in range(1, params.max_outer + 1):
        inner = dinkelbach_loop(w, x, scenario, spec, params, outer=k)
        x = inner.x
        g_traces.append(inner.g_trace)
        records.extend(inner.records)
        w = update_filter(x, scenario)
        lin.append(sinr(x, w, scenario))
        seconds.append(time.perf_counter() - start)
        viol = violation(x, spec)
        if first_feasible is None and viol <= params.feas_tol:
            first_feasible = k
        if viol < best_viol - 0.01 * abs(best_viol):
            best_viol, last_gain = viol, k
        if k % 50 == 0:
            log.debug("outer %d: SINR %.4f dB, violation %.2e", k, to_db(lin[-1]), violation(x, spec))
        if abs(lin[-1] - lin[-2]) / lin[-2] < params.tol_outer:
            converged = True
            stop = "tolerance"
            break
        if first_feasible is None and k - last_gain >= params.stall_outer:
            # restoration has stopped making progress: the budgets are likely unattainable
            stop = "infeasible_stall"
            break
    psi = mui_all(x, spec)
    return DesignResult(
        x=x,
        w=w,
        sinr_trace=10.0 * np.log10(np.array(lin)),
        cumulative_seconds=np.array(seconds),
        mui_per_user=psi,
        budgets=spec.budgets.copy(),
        feasible=psi <= spec.budgets * (1.0 + params.feas_tol),
        dinkelbach_trace=g_traces,
        residual_trace=records,
        wall_time=seconds[-1],
        converged=converged,
        stop_reason=stop,
        first_feasible=first_feasible,
        params=params,
    )
