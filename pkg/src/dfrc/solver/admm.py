"""ADMM for ``max x^H T x`` under the waveform constraint and per-user MUI balls."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..comms import CommSpec, apply_H
from ..linalg import LowRankPlusIdentity, SpectralLowRank
from ..model import Waveform, as_vector
from .params import SolverParams
from .steps import (
    MAJORIZER_MARGIN,
    AdmmContext,
    AdmmState,
    CMProjector,
    PAPRProjector,
    admm_step_x,
    admm_step_xhat,
    make_projector,
    project_users,
    residuals,
    waveform_from,
)


@dataclass(frozen=True, eq=False)
class AdmmResult:
    x: Waveform
    iterations: int
    converged: bool
    primal_trace: np.ndarray
    dual_trace: np.ndarray
    primal: np.ndarray
    dual: np.ndarray


def gram_lambda_max(channel: np.ndarray) -> float:
    """Largest eigenvalue of ``sum_m H_m^H H_m``, i.e. ``||H||_2^2``."""
    if channel.shape[0] == 0:
        return 0.0
    return float(np.linalg.norm(channel, 2) ** 2)


def lambda_max_B(T: SpectralLowRank, channel: np.ndarray, code_length: int) -> float:
    """Exact ``lambda_max(T + I_L kron H^H H)``.

    ``B - tau I`` has rank at most ``r + L M``; its spectrum is read off a
    compression onto that subspace instead of an ``n x n`` eigensolve.
    """
    M = channel.shape[0]
    if M == 0:
        return T.lambda_max()
    gam, E = np.linalg.eigh(channel.conj().T @ channel)
    gam, E = gam[-M:], E[:, -M:]
    cols = [T.basis, np.kron(np.eye(code_length), E)]
    weights = np.concatenate([T.gains, np.tile(gam, code_length)])
    return LowRankPlusIdentity(T.shift, np.concatenate(cols, axis=1), weights).spectral().lambda_max()


def _initial_state(x: np.ndarray, T_sqrt, spec: CommSpec) -> AdmmState:
    sq = T_sqrt.matvec if isinstance(T_sqrt, SpectralLowRank) else T_sqrt.__matmul__
    L = spec.symbols.shape[1]
    M = spec.n_users
    return AdmmState(
        x=x.copy(),
        x_hat=sq(x),
        x_tilde=project_users(apply_H(x, spec.channel, L) - spec.symbols.T, spec.budgets),
        nu=np.zeros_like(x),
        upsilon=np.zeros((L, M), np.complex128),
    )


def admm_solve(T, spec: CommSpec, x_init: Waveform, params: SolverParams, T_sqrt=None) -> AdmmResult:
    """Run the splitting on ``T`` (dense array or :class:`SpectralLowRank`).

    Dense input uses the numpy step functions; structured input runs the
    compiled kernel. Non-convergence is reported through ``converged``.
    """
    projector = make_projector(params, x_init.n_tx, x_init.code_length, x_init.energy)
    if isinstance(T, SpectralLowRank):
        return _admm_structured(T, spec, x_init, params, projector)
    return _admm_dense(T, spec, x_init, params, projector, T_sqrt)


def _admm_dense(T, spec, x_init, params, projector, T_sqrt) -> AdmmResult:
    ctx = AdmmContext.build(T, spec, projector, T_sqrt)
    L = spec.symbols.shape[1]
    state = _initial_state(as_vector(x_init), ctx.T_sqrt, spec)
    ptrace, dtrace = [], []
    primal = dual = np.zeros(0)
    it = 0
    for it in range(1, params.max_admm + 1):
        prev = AdmmState(state.x, state.x_hat, state.x_tilde, state.nu, state.upsilon)
        x = admm_step_x(state, ctx, spec, params)
        Tx = ctx.T_sqrt @ x
        Hx = apply_H(x, spec.channel, L)
        x_hat = admm_step_xhat(Tx - state.nu, params.mu)
        x_tilde = project_users(Hx - state.upsilon - spec.symbols.T, spec.budgets)
        nu = state.nu + x_hat - Tx
        upsilon = state.upsilon + x_tilde - Hx + spec.symbols.T
        state = AdmmState(x, x_hat, x_tilde, nu, upsilon)
        primal, dual = residuals(state, prev, ctx.T_sqrt, spec)
        ptrace.append(primal.max())
        dtrace.append(dual.max())
        if ptrace[-1] <= params.eps_primal and dtrace[-1] <= params.eps_dual:
            break
    converged = bool(ptrace and ptrace[-1] <= params.eps_primal and dtrace[-1] <= params.eps_dual)
    return AdmmResult(
        waveform_from(state.x, x_init, params), it, converged,
        np.array(ptrace), np.array(dtrace), primal, dual,
    )


def _admm_structured(T: SpectralLowRank, spec, x_init, params, projector) -> AdmmResult:
    from ._kernel import admm_kernel

    root = T.sqrt()
    L = x_init.code_length
    lam = lambda_max_B(T, spec.channel, L)
    if isinstance(projector, CMProjector):
        amp, rho = projector.amp, 0.0
    else:
        assert isinstance(projector, PAPRProjector)
        amp, rho = 0.0, projector.rho
    x, it, ptrace, dtrace, primal, dual = admm_kernel(
        np.ascontiguousarray(as_vector(x_init)),
        float(T.shift),
        np.ascontiguousarray(T.basis),
        np.ascontiguousarray(T.gains, dtype=np.float64),
        float(root.shift),
        np.ascontiguousarray(root.gains, dtype=np.float64),
        np.ascontiguousarray(spec.channel),
        np.ascontiguousarray(spec.symbols.T),
        np.ascontiguousarray(spec.budgets),
        float(amp), float(rho), float(x_init.energy), float(lam), MAJORIZER_MARGIN, float(params.mu),
        float(params.eps_primal), float(params.eps_dual),
        int(params.max_admm), int(params.max_mm), float(params.tol_inner),
        int(L), int(x_init.n_tx),
    )
    converged = bool(ptrace[-1] <= params.eps_primal and dtrace[-1] <= params.eps_dual)
    return AdmmResult(waveform_from(x, x_init, params), int(it), converged, ptrace, dtrace, primal, dual)

