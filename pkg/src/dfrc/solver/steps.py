"""Building blocks of the alternating design: filter update, Dinkelbach
quantities, the MM solver for unimodular quadratic programs, and the ADMM
sub-steps. These are the reference (numpy) implementations; the compiled
kernel in :mod:`dfrc.solver._kernel` reproduces them on structured operators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..comms import CommSpec, apply_H, apply_H_adjoint
from ..errors import DegenerateInputError, InvalidInputError, InvalidParameterError
from ..linalg import LowRankPlusIdentity, SpectralLowRank, hermitian, hermitian_eig, psd_sqrt, woodbury_solve
from ..model import Scenario, Waveform, apply_A, apply_A_adjoint, as_vector, interference_cov
from .params import SolverParams

MAJORIZER_MARGIN = 1e-12


# ---------------------------------------------------------------------------
# filter and Dinkelbach quantities


def update_filter(x, scenario: Scenario) -> np.ndarray:
    """Optimal receive filter ``R_x^{-1} A(theta_0) x`` (scale factor 1)."""
    t = apply_A(x, scenario.target_angle_deg, scenario)
    return woodbury_solve(interference_cov(x, scenario), t)


def build_R0_R1(w, scenario: Scenario) -> tuple[LowRankPlusIdentity, LowRankPlusIdentity]:
    """Filter-side quadratic forms: numerator ``u0 u0^H`` and denominator ``R_1``.

    ``R_1 = sum_q s_q^2 v_q v_q^H + (s_n^2 ||w||^2 / e_T) I`` with ``v_q = A(theta_q)^H w``.
    """
    w = np.asarray(w, dtype=np.complex128).reshape(-1)
    if not np.any(w != 0):
        raise InvalidInputError("filter must not be identically zero")
    u0 = apply_A_adjoint(w, scenario.target_angle_deg, scenario)
    r0 = LowRankPlusIdentity(0.0, u0[:, None], np.ones(1))
    n = scenario.n_x
    if scenario.interferers:
        cols = np.stack([apply_A_adjoint(w, a, scenario) for a, _ in scenario.interferers], axis=1)
    else:
        cols = np.zeros((n, 0), np.complex128)
    weights = np.array([p for _, p in scenario.interferers], dtype=np.float64)
    c = scenario.noise_power * float(np.vdot(w, w).real) / scenario.total_energy
    return r0, LowRankPlusIdentity(c, cols, weights)


def dinkelbach_ratio(x, r0: LowRankPlusIdentity, r1: LowRankPlusIdentity) -> float:
    x = as_vector(x)
    den = r1.quad(x)
    if not den > 0:
        raise DegenerateInputError("x^H R_1 x must be positive")
    return r0.quad(x) / den


@dataclass(frozen=True, eq=False)
class ShiftedT:
    """``T = T_tilde - beta I`` together with its ingredients."""

    T: np.ndarray | SpectralLowRank
    beta: float
    lambda_min: float


def build_T(r0, r1, g: float, beta_margin: float = 1e-10, structured: bool = False) -> ShiftedT:
    """Shift ``T_tilde = R_0 - g R_1`` down by ``beta`` just below its smallest eigenvalue.

    With ``structured=True`` the result is a :class:`SpectralLowRank` obtained
    from a thin QR of the stacked low-rank factors; otherwise a dense matrix.
    """
    if not np.isfinite(g) or g < 0:
        raise InvalidInputError(f"g must be finite and non-negative, got {g}")
    if structured:
        tilde = LowRankPlusIdentity(
            r0.c - g * r1.c,
            np.concatenate([r0.columns, r1.columns], axis=1),
            np.concatenate([r0.weights, -g * r1.weights]),
        ).spectral()
        lam = tilde.lambda_min()
        beta = lam - beta_margin * max(1.0, abs(lam))
        return ShiftedT(tilde.shifted(-beta), beta, lam)
    tilde = hermitian(r0.materialize() - g * r1.materialize())
    lam = float(hermitian_eig(tilde)[0][0])
    beta = lam - beta_margin * max(1.0, abs(lam))
    t = tilde.copy()
    t[np.diag_indices(t.shape[0])] -= beta
    return ShiftedT(hermitian(t), beta, lam)


# ---------------------------------------------------------------------------
# constraint projections


def papr_project(block, rho: float, energy: float, fallback_phase=None) -> np.ndarray:
    """Nearest vector with ``||v||^2 = energy`` and every ``|v_l|^2 <= rho * energy / L``.

    Phases are kept; magnitudes follow the water-filling rule
    ``a_l = min(sqrt(peak), |block_l| / lam)``, found by repeatedly clipping
    the entries that exceed the peak and rescaling the rest. Each pass clips
    at least one more entry, so at most L passes are needed.
    """
    v = np.asarray(block, dtype=np.complex128).reshape(-1)
    L = v.shape[0]
    if not (1 <= rho <= L):
        raise InvalidParameterError(f"rho must lie in [1, {L}], got {rho}")
    if not energy > 0:
        raise InvalidParameterError("energy must be positive")
    mag = np.abs(v)
    phase = np.angle(v)
    if fallback_phase is not None:
        phase = np.where(mag > 0, phase, fallback_phase)
    peak = rho * energy / L
    cap = np.sqrt(peak)
    clipped = np.zeros(L, dtype=bool)
    a = np.zeros(L)
    for _ in range(L + 1):
        free = ~clipped
        rem = energy - np.count_nonzero(clipped) * peak
        if not np.any(free):
            break
        s = float(np.sum(mag[free] ** 2))
        if s > 0:
            a[free] = mag[free] * np.sqrt(max(rem, 0.0) / s)
        else:
            a[free] = np.sqrt(max(rem, 0.0) / np.count_nonzero(free))
        over = free & (a > cap)
        if not np.any(over):
            break
        clipped |= over
        a[clipped] = cap
    return a * np.exp(1j * phase)


class CMProjector:
    """Phase-only projection onto ``|x(n)| = amp``; zero entries keep the previous phase."""

    def __init__(self, amp: float):
        self.amp = float(amp)

    def __call__(self, c: np.ndarray, x_prev: np.ndarray) -> np.ndarray:
        mag = np.abs(c)
        safe = np.where(mag > 0, mag, 1.0)
        return np.where(mag > 0, self.amp * (c / safe), x_prev)


class PAPRProjector:
    """Per-antenna PAPR projection; antenna j owns entries ``j, j + n_tx, ...``."""

    def __init__(self, rho: float, n_tx: int, code_length: int, energy: float):
        self.rho = float(rho)
        self.n_tx = int(n_tx)
        self.code_length = int(code_length)
        self.per_antenna = float(energy) / self.n_tx

    def __call__(self, c: np.ndarray, x_prev: np.ndarray) -> np.ndarray:
        cm = c.reshape(self.code_length, self.n_tx)
        prev = np.angle(x_prev.reshape(self.code_length, self.n_tx))
        out = np.empty_like(cm)
        for j in range(self.n_tx):
            out[:, j] = papr_project(cm[:, j], self.rho, self.per_antenna, prev[:, j])
        return out.reshape(-1)


def make_projector(params: SolverParams, n_tx: int, code_length: int, energy: float):
    if params.constant_modulus:
        return CMProjector(np.sqrt(energy / (n_tx * code_length)))
    return PAPRProjector(params.papr_rho, n_tx, code_length, energy)


def waveform_from(x: np.ndarray, like: Waveform, params: SolverParams) -> Waveform:
    return Waveform.from_vector(x, like.n_tx, like.code_length, like.energy, cm=params.constant_modulus)


# ---------------------------------------------------------------------------
# MM for the unimodular quadratic program


def uqp_objective(B: np.ndarray, b: np.ndarray, x: np.ndarray) -> float:
    return float(np.vdot(x, B @ x).real - 2.0 * np.vdot(b, x).real)


def majorizer_constant(B: np.ndarray) -> float:
    return float(hermitian_eig(B)[0][-1]) * (1.0 + MAJORIZER_MARGIN)


def mm_uqp(B, b, x0, params: SolverParams, projector=None, lam_u: float | None = None, trace: list | None = None):
    """Minimize ``x^H B x - 2 Re(b^H x)`` over the constraint set by MM.

    Each step maximizes the linear minorizer: ``x <- P((lam_u I - B) x + b)``
    with ``lam_u >= lambda_max(B)``. Stops on relative objective change below
    ``params.tol_inner`` or after ``params.max_mm`` steps. Returns the same type
    as ``x0`` (a :class:`Waveform` or a complex array).
    """
    B = np.asarray(B, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128).reshape(-1)
    x = as_vector(x0).copy()
    if projector is None:
        amp = x0.amplitude if isinstance(x0, Waveform) else float(np.sqrt(np.vdot(x, x).real / x.size))
        projector = CMProjector(amp)
    if lam_u is None:
        lam_u = majorizer_constant(B)
    Bx = B @ x
    obj = float(np.vdot(x, Bx).real - 2.0 * np.vdot(b, x).real)
    if trace is not None:
        trace.append(obj)
    # (lam_u I - B) x is split so the tiny margin term is not lost to cancellation
    lam = lam_u / (1.0 + MAJORIZER_MARGIN)
    delta = lam_u - lam
    for _ in range(params.max_mm):
        x = projector(delta * x + (lam * x - Bx) + b, x)
        Bx = B @ x
        new = float(np.vdot(x, Bx).real - 2.0 * np.vdot(b, x).real)
        if trace is not None:
            trace.append(new)
        done = abs(obj - new) <= params.tol_inner * abs(obj)
        obj = new
        if done:
            break
    if isinstance(x0, Waveform):
        return waveform_from(x, x0, params)
    return x


# ---------------------------------------------------------------------------
# ADMM sub-steps


@dataclass
class AdmmState:
    """Iterates of the splitting: ``x_tilde`` and ``upsilon`` hold one column per user."""

    x: np.ndarray
    x_hat: np.ndarray
    x_tilde: np.ndarray
    nu: np.ndarray
    upsilon: np.ndarray


@dataclass(frozen=True, eq=False)
class AdmmContext:
    """Per-run constants: ``T^{1/2}``, ``B = T + sum_m H_m^H H_m`` and its majorizer constant."""

    T_sqrt: np.ndarray
    B: np.ndarray
    lam_u: float
    projector: object

    @classmethod
    def build(cls, T, spec: CommSpec, projector, T_sqrt=None) -> AdmmContext:
        T = np.asarray(T, dtype=np.complex128)
        L = spec.symbols.shape[1]
        B = T + np.kron(np.eye(L), spec.channel.conj().T @ spec.channel)
        B = hermitian(B)
        root = psd_sqrt(T) if T_sqrt is None else T_sqrt
        return cls(root, B, majorizer_constant(B), projector)


def compute_b(state: AdmmState, T_sqrt, spec: CommSpec) -> np.ndarray:
    """``T^{1/2}(x_hat + nu) + sum_m H_m^H (x_tilde_m + s_m + upsilon_m)``."""
    sq = T_sqrt.matvec if isinstance(T_sqrt, SpectralLowRank) else T_sqrt.__matmul__
    return sq(state.x_hat + state.nu) + apply_H_adjoint(state.x_tilde + spec.symbols.T + state.upsilon, spec.channel)


def admm_step_x(state: AdmmState, ctx: AdmmContext, spec: CommSpec, params: SolverParams) -> np.ndarray:
    b = compute_b(state, ctx.T_sqrt, spec)
    return mm_uqp(ctx.B, b, state.x, params, ctx.projector, ctx.lam_u)


def admm_step_xhat(q, mu: float) -> np.ndarray:
    """Minimizer of ``-||x_hat||^2 + (mu/2) ||x_hat - q||^2``, i.e. ``mu/(mu-2) q``."""
    if not mu > 2:
        raise InvalidParameterError(f"mu must exceed 2, got {mu}")
    return (mu / (mu - 2.0)) * np.asarray(q, dtype=np.complex128)


def admm_step_xtilde(p, budget: float) -> np.ndarray:
    """Euclidean projection of ``p`` onto the ball ``||v||^2 <= budget``."""
    if not budget > 0:
        raise InvalidParameterError("budget must be positive")
    p = np.asarray(p, dtype=np.complex128)
    nrm2 = float(np.vdot(p, p).real)
    if nrm2 <= budget:
        return p.copy()
    return (np.sqrt(budget) / np.sqrt(nrm2)) * p


def project_users(P: np.ndarray, budgets: np.ndarray) -> np.ndarray:
    out = np.empty_like(P)
    for m in range(P.shape[1]):
        out[:, m] = admm_step_xtilde(P[:, m], budgets[m])
    return out


def residuals(state: AdmmState, prev: AdmmState, T_sqrt, spec: CommSpec) -> tuple[np.ndarray, np.ndarray]:
    """Primal norms (users, then the T^{1/2} split) and dual norms (users, x_hat, x)."""
    sq = T_sqrt.matvec if isinstance(T_sqrt, SpectralLowRank) else T_sqrt.__matmul__
    L = spec.symbols.shape[1]
    Hx = apply_H(state.x, spec.channel, L)
    primal = np.append(
        np.linalg.norm(Hx - spec.symbols.T - state.x_tilde, axis=0),
        np.linalg.norm(sq(state.x) - state.x_hat),
    )
    dual = np.append(
        np.linalg.norm(state.x_tilde - prev.x_tilde, axis=0),
        [np.linalg.norm(state.x_hat - prev.x_hat), np.linalg.norm(state.x - prev.x)],
    )
    return primal, dual
