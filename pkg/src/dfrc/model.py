"""Radar signal model: steering vectors, the block operator A(theta), SINR and beampattern.

Waveforms are stacked per subpulse, ``x = [x_1; ...; x_L]`` with each
``x_l`` of length ``n_tx``. ``A(theta) = I_L kron (a_R a_T^T)`` is applied
blockwise and never materialized outside the dense oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidAngleError, InvalidInputError
from .linalg import LowRankPlusIdentity, solve_hpd, woodbury_solve

BEAMPATTERN_FLOOR = 1e-30
DEFAULT_INTERFERERS = ((-40.0, 1000.0), (-20.0, 1000.0), (40.0, 1000.0), (50.0, 1000.0))


def _check_angle(angle_deg: float) -> float:
    a = float(angle_deg)
    if not np.isfinite(a) or abs(a) >= 90.0:
        raise InvalidAngleError(f"angle must lie in (-90, 90) degrees, got {angle_deg}")
    return a


@dataclass(frozen=True)
class ArrayConfig:
    n_tx: int = 16
    n_rx: int = 8
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if int(self.n_tx) != self.n_tx or self.n_tx < 1:
            raise InvalidInputError(f"n_tx must be a positive integer, got {self.n_tx}")
        if int(self.n_rx) != self.n_rx or self.n_rx < 1:
            raise InvalidInputError(f"n_rx must be a positive integer, got {self.n_rx}")
        if not self.spacing_wavelengths > 0:
            raise InvalidInputError("element spacing must be positive")


@dataclass(frozen=True)
class Scenario:
    """Target, clutter sources, noise and transmit budget. Powers are linear."""

    array: ArrayConfig = field(default_factory=ArrayConfig)
    target_angle_deg: float = 20.0
    target_power: float = 1.0
    interferers: tuple[tuple[float, float], ...] = DEFAULT_INTERFERERS
    noise_power: float = 1.0
    total_energy: float = 20.0
    code_length: int = 20

    def __post_init__(self):
        _check_angle(self.target_angle_deg)
        interferers = tuple((float(a), float(p)) for a, p in self.interferers)
        object.__setattr__(self, "interferers", interferers)
        for angle, power in interferers:
            _check_angle(angle)
            if angle == self.target_angle_deg:
                raise InvalidInputError(f"interferer at the target angle {angle}")
            if not power > 0:
                raise InvalidInputError(f"interferer power must be positive, got {power}")
        for name in ("target_power", "noise_power", "total_energy"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        if int(self.code_length) != self.code_length or self.code_length < 1:
            raise InvalidInputError(f"code_length must be a positive integer, got {self.code_length}")

    @property
    def n_tx(self) -> int:
        return self.array.n_tx

    @property
    def n_rx(self) -> int:
        return self.array.n_rx

    @property
    def n_x(self) -> int:
        """Length of the stacked waveform, ``L * n_tx``."""
        return self.code_length * self.array.n_tx

    @property
    def n_y(self) -> int:
        return self.code_length * self.array.n_rx

    @property
    def p_s(self) -> float:
        return self.total_energy / self.n_x

    def sinr_upper_bound(self) -> float:
        return self.target_power * self.n_tx * self.n_rx * self.total_energy / self.noise_power

    def replace(self, **changes) -> Scenario:
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Waveform:
    """Transmit code stored through its phases.

    With ``magnitudes=None`` every entry has modulus ``sqrt(energy / n)``, so the
    constant-modulus property holds by construction. PAPR-mode designs carry
    explicit per-entry magnitudes.
    """

    phases: np.ndarray
    n_tx: int
    code_length: int
    energy: float
    magnitudes: np.ndarray | None = None

    def __post_init__(self):
        ph = np.asarray(self.phases, dtype=np.float64).reshape(-1)
        if ph.shape[0] != self.n_tx * self.code_length:
            raise InvalidInputError(
                f"expected {self.n_tx * self.code_length} phases, got {ph.shape[0]}"
            )
        if not np.all(np.isfinite(ph)):
            raise InvalidInputError("phases must be finite")
        if not self.energy > 0:
            raise InvalidInputError("waveform energy must be positive")
        ph.setflags(write=False)
        object.__setattr__(self, "phases", ph)
        if self.magnitudes is not None:
            mag = np.asarray(self.magnitudes, dtype=np.float64).reshape(-1)
            if mag.shape != ph.shape or np.any(mag < 0) or not np.all(np.isfinite(mag)):
                raise InvalidInputError("magnitudes must be finite, non-negative and match phases")
            mag.setflags(write=False)
            object.__setattr__(self, "magnitudes", mag)

    @property
    def n(self) -> int:
        return self.phases.shape[0]

    @property
    def amplitude(self) -> float:
        return float(np.sqrt(self.energy / self.n))

    @property
    def is_constant_modulus(self) -> bool:
        return self.magnitudes is None

    @cached_property
    def x(self) -> np.ndarray:
        mag = self.amplitude if self.magnitudes is None else self.magnitudes
        out = mag * np.exp(1j * self.phases)
        out.setflags(write=False)
        return out

    @classmethod
    def from_vector(cls, x, n_tx: int, code_length: int, energy: float, cm: bool = True) -> Waveform:
        """Wrap a complex vector. With ``cm=True`` only its phases are kept."""
        x = np.asarray(x, dtype=np.complex128).reshape(-1)
        mags = None if cm else np.abs(x)
        return cls(np.angle(x), n_tx, code_length, energy, mags)

    @classmethod
    def lfm(cls, scenario: Scenario) -> Waveform:
        return lfm_waveform(scenario)

    @classmethod
    def random(cls, scenario: Scenario, rng: np.random.Generator) -> Waveform:
        return random_waveform(scenario, rng)


def lfm_waveform(scenario: Scenario) -> Waveform:
    """Chirp reference ``sqrt(p_s) exp(j pi (n-1)^2 / (L n_tx))``, n = 1..L n_tx."""
    n = scenario.n_x
    k = np.arange(n, dtype=np.float64)
    return Waveform(np.pi * k * k / n, scenario.n_tx, scenario.code_length, scenario.total_energy)


def random_waveform(scenario: Scenario, rng: np.random.Generator) -> Waveform:
    phases = rng.uniform(-np.pi, np.pi, scenario.n_x)
    return Waveform(phases, scenario.n_tx, scenario.code_length, scenario.total_energy)


def as_vector(x) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.x
    return np.asarray(x, dtype=np.complex128).reshape(-1)


def steering(n_elems: int, angle_deg: float, spacing: float = 0.5) -> np.ndarray:
    """ULA response with phase reference at element 0: ``exp(j 2 pi d k sin(theta))``."""
    theta = np.deg2rad(_check_angle(angle_deg))
    k = np.arange(int(n_elems), dtype=np.float64)
    return np.exp(2j * np.pi * spacing * k * np.sin(theta))


def _steering_grid(n_elems: int, angles_deg: np.ndarray, spacing: float) -> np.ndarray:
    theta = np.deg2rad(angles_deg)
    k = np.arange(int(n_elems), dtype=np.float64)
    return np.exp(2j * np.pi * spacing * np.outer(k, np.sin(theta)))


def _pair(angle_deg: float, scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    arr = scenario.array
    return (
        steering(arr.n_tx, angle_deg, arr.spacing_wavelengths),
        steering(arr.n_rx, angle_deg, arr.spacing_wavelengths),
    )


def _check_len(v: np.ndarray, n: int, what: str) -> None:
    if v.shape[0] != n:
        raise InvalidInputError(f"{what} has length {v.shape[0]}, expected {n}")


def apply_A(x, angle_deg: float, scenario: Scenario) -> np.ndarray:
    """``A(theta) x``; block l equals ``a_R (a_T^T x_l)``."""
    x = as_vector(x)
    _check_len(x, scenario.n_x, "waveform")
    a_t, a_r = _pair(angle_deg, scenario)
    v = x.reshape(scenario.code_length, scenario.n_tx) @ a_t
    return np.outer(v, a_r).reshape(-1)


def apply_A_adjoint(w, angle_deg: float, scenario: Scenario) -> np.ndarray:
    """``A(theta)^H w``; block l equals ``conj(a_T) (a_R^H w_l)``."""
    w = np.asarray(w, dtype=np.complex128).reshape(-1)
    _check_len(w, scenario.n_y, "filter")
    a_t, a_r = _pair(angle_deg, scenario)
    u = w.reshape(scenario.code_length, scenario.n_rx) @ a_r.conj()
    return np.outer(u, a_t.conj()).reshape(-1)


def dense_A(angle_deg: float, scenario: Scenario) -> np.ndarray:
    """Materialized ``I_L kron (a_R a_T^T)``. Test oracle only."""
    a_t, a_r = _pair(angle_deg, scenario)
    return np.kron(np.eye(scenario.code_length), np.outer(a_r, a_t))


def interference_cov(x, scenario: Scenario) -> LowRankPlusIdentity:
    """Clutter-plus-noise covariance ``sum_q s_q^2 g_q g_q^H + s_n^2 I`` with ``g_q = A(theta_q) x``."""
    x = as_vector(x)
    if scenario.interferers:
        cols = np.stack([apply_A(x, a, scenario) for a, _ in scenario.interferers], axis=1)
    else:
        cols = np.zeros((scenario.n_y, 0), np.complex128)
    weights = np.array([p for _, p in scenario.interferers], dtype=np.float64)
    return LowRankPlusIdentity(scenario.noise_power, cols, weights)


def _check_filter(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.complex128).reshape(-1)
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("filter has non-finite entries")
    if not np.any(w != 0):
        raise InvalidInputError("filter must not be identically zero")
    return w


def sinr(x, w, scenario: Scenario) -> float:
    """Output SINR (linear) of waveform ``x`` and receive filter ``w``."""
    w = _check_filter(w)
    _check_len(w, scenario.n_y, "filter")
    x = as_vector(x)
    num = scenario.target_power * abs(np.vdot(w, apply_A(x, scenario.target_angle_deg, scenario))) ** 2
    return float(num / interference_cov(x, scenario).quad(w))


def sinr_optimal(x, scenario: Scenario, dense: bool = False) -> float:
    """SINR with the optimal filter, ``s_0^2 t^H R_x^{-1} t`` where ``t = A(theta_0) x``."""
    x = as_vector(x)
    t = apply_A(x, scenario.target_angle_deg, scenario)
    cov = interference_cov(x, scenario)
    z = solve_hpd(cov.materialize(), t) if dense else woodbury_solve(cov, t)
    return float(scenario.target_power * np.vdot(t, z).real)


def beampattern(x, w, angles_deg, scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """``10 log10(|w^H A(theta) x|^2 + floor)`` on a grid, plus the peak-normalized copy."""
    angles = np.atleast_1d(np.asarray(angles_deg, dtype=np.float64))
    if angles.size == 0:
        raise InvalidInputError("angle grid is empty")
    for a in (angles.min(), angles.max()):
        _check_angle(a)
    x = as_vector(x)
    w = _check_filter(w)
    arr = scenario.array
    L = scenario.code_length
    v = x.reshape(L, arr.n_tx) @ _steering_grid(arr.n_tx, angles, arr.spacing_wavelengths)
    u = w.reshape(L, arr.n_rx).conj() @ _steering_grid(arr.n_rx, angles, arr.spacing_wavelengths)
    power = np.abs(np.sum(u * v, axis=0)) ** 2
    db = 10.0 * np.log10(power + BEAMPATTERN_FLOOR)
    return db, db - db.max()


def to_db(value: float) -> float:
    return float(10.0 * np.log10(value))
