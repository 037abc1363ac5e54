"""Downlink communication model: channels, constellations, MUI and Monte-Carlo SER.

``H_m x`` is the length-L vector whose l-th entry is ``h_m^T x_l``. With the
per-subpulse stacking of :mod:`dfrc.model` it is evaluated as
``x.reshape(L, n_tx) @ h_m`` and never materialized.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import Scenario, as_vector

# Stream identifiers mixed into seed sequences so that different consumers of
# one top-level seed never share random numbers.
STREAM_CHANNEL = 1
STREAM_SYMBOLS = 2
STREAM_INIT = 3
STREAM_SER = 4


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


@dataclass(frozen=True, eq=False)
class Constellation:
    name: str
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128).reshape(-1)
        if pts.size == 0:
            raise InvalidInputError("constellation must be non-empty")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]


QPSK = Constellation("QPSK", np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0))
# Rectangular 8-QAM: {+-1, +-3} x {+-1}, average power 6 before scaling.
QAM8 = Constellation(
    "QAM8",
    np.array([complex(re, im) for im in (1.0, -1.0) for re in (-3.0, -1.0, 1.0, 3.0)]) / np.sqrt(6.0),
)
CONSTELLATIONS = {"QPSK": QPSK, "QAM8": QAM8}


def get_constellation(name: str | Constellation) -> Constellation:
    if isinstance(name, Constellation):
        return name
    key = str(name).upper().replace("-", "")
    if key == "8QAM":
        key = "QAM8"
    try:
        return CONSTELLATIONS[key]
    except KeyError:
        raise InvalidInputError(f"unknown constellation {name!r}; choose from {sorted(CONSTELLATIONS)}") from None


@dataclass(frozen=True, eq=False)
class CommSpec:
    """Channel (M x n_tx), desired symbols (M x L), MUI budgets and receiver noise powers.

    ``constellations`` and ``symbol_indices`` are optional bookkeeping used by
    the SER receiver; they are filled in by :func:`make_comm_spec`.
    """

    channel: np.ndarray
    symbols: np.ndarray
    budgets: np.ndarray
    noise_powers: np.ndarray
    constellations: tuple[str, ...] | None = None
    symbol_indices: np.ndarray | None = None

    def __post_init__(self):
        h = np.asarray(self.channel, dtype=np.complex128)
        s = np.asarray(self.symbols, dtype=np.complex128)
        b = np.asarray(self.budgets, dtype=np.float64).reshape(-1)
        z = np.asarray(self.noise_powers, dtype=np.float64).reshape(-1)
        if h.ndim != 2 or s.ndim != 2:
            raise InvalidInputError("channel and symbols must be 2-D")
        m = h.shape[0]
        if s.shape[0] != m or b.shape[0] != m or z.shape[0] != m:
            raise InvalidInputError("channel, symbols, budgets and noise powers disagree on user count")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(s))):
            raise InvalidInputError("channel and symbols must be finite")
        if np.any(~(b > 0)) or np.any(~(z > 0)):
            raise InvalidInputError("budgets and noise powers must be positive")
        if m and np.any(~(np.sum(np.abs(s) ** 2, axis=1) > 0)):
            raise InvalidInputError("every user needs positive symbol energy")
        for arr in (h, s, b, z):
            arr.setflags(write=False)
        object.__setattr__(self, "channel", h)
        object.__setattr__(self, "symbols", s)
        object.__setattr__(self, "budgets", b)
        object.__setattr__(self, "noise_powers", z)
        if self.constellations is not None:
            names = tuple(get_constellation(c).name for c in self.constellations)
            if len(names) != m:
                raise InvalidInputError("one constellation per user required")
            object.__setattr__(self, "constellations", names)
        if self.symbol_indices is not None:
            idx = np.asarray(self.symbol_indices, dtype=np.int64)
            if idx.shape != s.shape:
                raise InvalidInputError("symbol_indices must match symbols in shape")
            idx.setflags(write=False)
            object.__setattr__(self, "symbol_indices", idx)

    @classmethod
    def empty(cls, n_tx: int, code_length: int) -> CommSpec:
        """Radar-only configuration (M = 0)."""
        return cls(
            np.zeros((0, n_tx), np.complex128),
            np.zeros((0, code_length), np.complex128),
            np.zeros(0),
            np.zeros(0),
            (),
            np.zeros((0, code_length), np.int64),
        )

    @property
    def n_users(self) -> int:
        return self.channel.shape[0]

    @property
    def energies(self) -> np.ndarray:
        return np.sum(np.abs(self.symbols) ** 2, axis=1)

    def check(self, scenario: Scenario) -> None:
        if self.channel.shape[1] != scenario.n_tx:
            raise InvalidInputError(f"channel has {self.channel.shape[1]} columns, scenario n_tx={scenario.n_tx}")
        if self.symbols.shape[1] != scenario.code_length:
            raise InvalidInputError(
                f"symbols have length {self.symbols.shape[1]}, scenario L={scenario.code_length}"
            )


def gen_channel(m_users: int, n_tx: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) entries (variance 1/2 per real and imaginary part)."""
    if m_users < 0 or n_tx < 1:
        raise InvalidInputError("invalid channel dimensions")
    g = rng.standard_normal((m_users, n_tx, 2))
    return (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)


def draw_symbols(constellation, length: int, energy: float, rng: np.random.Generator):
    """Uniform symbol indices and the stream scaled to energy exactly ``energy``.

    The scale is per stream: for non-constant-modulus constellations the drawn
    symbols' mean power differs from one, and the stream is rescaled so that
    ``||s||^2 == energy``. Returns ``(symbols, indices, scale)``.
    """
    c = get_constellation(constellation)
    if length < 1 or not energy > 0:
        raise InvalidInputError("need length >= 1 and energy > 0")
    idx = rng.integers(0, c.size, size=int(length))
    raw = c.points[idx]
    scale = float(np.sqrt(energy / np.sum(np.abs(raw) ** 2)))
    return raw * scale, idx, scale


def gen_symbols(constellation, length: int, energy: float, rng: np.random.Generator) -> np.ndarray:
    return draw_symbols(constellation, length, energy, rng)[0]


def make_comm_spec(
    scenario: Scenario,
    constellations,
    energies,
    budgets,
    noise_powers,
    seed: int,
    channel: np.ndarray | None = None,
) -> CommSpec:
    """Seeded channel and symbols. User m draws from its own stream, so the first
    k users are identical for any total user count (nested sweeps)."""
    names = tuple(get_constellation(c).name for c in constellations)
    m = len(names)
    if not (len(energies) == len(budgets) == len(noise_powers) == m):
        raise InvalidInputError("per-user lists must have equal length")
    if channel is None:
        rows = [gen_channel(1, scenario.n_tx, derive_rng(seed, STREAM_CHANNEL, k))[0] for k in range(m)]
        channel = np.array(rows, dtype=np.complex128).reshape(m, scenario.n_tx)
    syms = np.zeros((m, scenario.code_length), np.complex128)
    idx = np.zeros((m, scenario.code_length), np.int64)
    for k in range(m):
        syms[k], idx[k], _ = draw_symbols(
            names[k], scenario.code_length, energies[k], derive_rng(seed, STREAM_SYMBOLS, k)
        )
    spec = CommSpec(channel, syms, budgets, noise_powers, names, idx)
    spec.check(scenario)
    return spec


def apply_H(x, channel: np.ndarray, code_length: int) -> np.ndarray:
    """All users at once: column m of the (L, M) result is ``H_m x``."""
    x = as_vector(x)
    return x.reshape(code_length, -1) @ channel.T


def apply_H_adjoint(v: np.ndarray, channel: np.ndarray) -> np.ndarray:
    """``sum_m H_m^H v_m`` for ``v`` of shape (L, M)."""
    return (v @ channel.conj()).reshape(-1)


def dense_H(h_m: np.ndarray, code_length: int) -> np.ndarray:
    """Materialized ``I_L kron h_m^T``. Test oracle only."""
    return np.kron(np.eye(code_length), np.asarray(h_m).reshape(1, -1))


def mui(x, h_m, s_m) -> float:
    """Synthesis error ``||H_m x - s_m||^2`` for one user."""
    x = as_vector(x)
    h_m = np.asarray(h_m, dtype=np.complex128).reshape(-1)
    s_m = np.asarray(s_m, dtype=np.complex128).reshape(-1)
    if x.shape[0] != h_m.shape[0] * s_m.shape[0]:
        raise InvalidInputError("waveform length must equal n_tx * L")
    r = x.reshape(s_m.shape[0], h_m.shape[0]) @ h_m - s_m
    return float(np.vdot(r, r).real)


def mui_all(x, spec: CommSpec) -> np.ndarray:
    L = spec.symbols.shape[1]
    r = apply_H(x, spec.channel, L) - spec.symbols.T
    return np.sum(np.abs(r) ** 2, axis=0)


def comm_sinr_and_rate(x, spec: CommSpec, m: int) -> tuple[float, float, float]:
    """Plug-in SINR, its rate ``log2(1 + sinr)``, and the rate floor implied by the budget."""
    L = spec.symbols.shape[1]
    p_m = spec.energies[m] / L
    noise = spec.noise_powers[m]
    psi = mui(x, spec.channel[m], spec.symbols[m])
    s = p_m / (psi / L + noise)
    floor = np.log2(1.0 + p_m / (spec.budgets[m] / L + noise))
    return float(s), float(np.log2(1.0 + s)), float(floor)


def demodulate(observed, points) -> np.ndarray | int:
    """Nearest-point indices; ``argmin`` returns the lowest index on ties."""
    pts = np.asarray(points, dtype=np.complex128).reshape(-1)
    if pts.size == 0:
        raise InvalidInputError("constellation is empty")
    obs = np.asarray(observed, dtype=np.complex128)
    idx = np.argmin(np.abs(obs[..., None] - pts) ** 2, axis=-1)
    return int(idx) if idx.ndim == 0 else idx


@dataclass(frozen=True, eq=False)
class SERCurve:
    user: int
    constellation: str
    snr_db: np.ndarray
    ser_synthesized: np.ndarray
    ser_ideal: np.ndarray
    trials: int
    symbols_per_trial: int


def _user_reference(spec: CommSpec, m: int, constellation: Constellation):
    """Transmitted indices and the per-stream constellation scale."""
    s = spec.symbols[m]
    if spec.symbol_indices is not None:
        idx = spec.symbol_indices[m]
    else:
        # Undo the energy normalization approximately, then classify.
        rms = np.sqrt(np.mean(np.abs(s) ** 2))
        idx = demodulate(s / rms, constellation.points)
    scale = float(np.linalg.norm(s) / np.linalg.norm(constellation.points[idx]))
    return np.asarray(idx), scale


def _ser_chunk(args):
    seed, m, trials, synth, ideal, sigmas, pts, idx = args
    L = synth.shape[0]
    err_s = np.zeros(len(sigmas), np.int64)
    err_i = np.zeros(len(sigmas), np.int64)
    for t in trials:
        g = derive_rng(seed, STREAM_SER, m, t).standard_normal((L, 2))
        unit = (g[:, 0] + 1j * g[:, 1]) / np.sqrt(2.0)
        for k, sig in enumerate(sigmas):
            z = sig * unit
            err_s[k] += np.count_nonzero(demodulate(synth + z, pts) != idx)
            err_i[k] += np.count_nonzero(demodulate(ideal + z, pts) != idx)
    return err_s, err_i


def ser_simulate(
    x,
    spec: CommSpec,
    constellations=None,
    snr_grid_db=(0.0,),
    trials: int = 2000,
    seed: int = 0,
    workers: int = 1,
) -> list[SERCurve]:
    """Monte-Carlo SER of the synthesized and the ideal signal for every user.

    The noise for trial ``t`` of user ``m`` comes from the stream
    ``(seed, m, t)`` and is shared by both receivers and across SNR points,
    so results do not depend on how trials are split among workers.
    """
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    snr = np.asarray(snr_grid_db, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(snr)):
        raise InvalidInputError("SNR grid must be finite")
    if constellations is None:
        if spec.constellations is None:
            raise InvalidInputError("constellations unknown for this CommSpec")
        constellations = spec.constellations
    x = as_vector(x)
    L = spec.symbols.shape[1]
    synth_all = apply_H(x, spec.channel, L)
    curves = []
    workers = max(1, int(workers))
    for m in range(spec.n_users):
        c = get_constellation(constellations[m])
        idx, scale = _user_reference(spec, m, c)
        p_m = spec.energies[m] / L
        sigmas = np.sqrt(p_m / 10.0 ** (snr / 10.0))
        pts = scale * c.points
        chunks = [list(r) for r in np.array_split(np.arange(trials), min(workers, trials))]
        jobs = [(seed, m, ch, synth_all[:, m], spec.symbols[m], sigmas, pts, idx) for ch in chunks]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_ser_chunk, jobs))
        else:
            parts = [_ser_chunk(j) for j in jobs]
        err_s = sum(p[0] for p in parts)
        err_i = sum(p[1] for p in parts)
        n = trials * L
        curves.append(SERCurve(m, c.name, snr, err_s / n, err_i / n, trials, L))
    return curves
