"""Hermitian linear-algebra kernels and low-rank structured operators.

Dense routines delegate to LAPACK through numpy/scipy. The structured types
let the solver work with matrices of the form ``c I + G diag(s) G^H`` without
ever materializing them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NotPositiveDefiniteError, NotPSDError

PSD_BAND = 1e-8


def _as_square(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInputError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    return a.astype(np.complex128, copy=False)


def hermitian(a) -> np.ndarray:
    """Return the Hermitian part ``(A + A^H)/2``.

    The result is conjugate-symmetric bit for bit and has an exactly real
    diagonal, so it can stand in for canonical triangle storage.
    """
    a = _as_square(a)
    return 0.5 * (a + a.conj().T)


def hermitian_eig(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    h = hermitian(h)
    lam, vec = np.linalg.eigh(h)
    return lam, vec


def psd_sqrt(t, band: float = PSD_BAND) -> np.ndarray:
    """Principal square root of a numerically PSD Hermitian matrix.

    Eigenvalues in ``[-band * max(1, ||T||_2), 0)`` are clamped to zero;
    anything more negative raises :class:`NotPSDError`.
    """
    lam, vec = hermitian_eig(t)
    tol = band * max(1.0, float(np.max(np.abs(lam))))
    if lam[0] < -tol:
        raise NotPSDError(f"minimum eigenvalue {lam[0]:.3e} below tolerance -{tol:.3e}")
    root = np.sqrt(np.clip(lam, 0.0, None))
    return hermitian((vec * root) @ vec.conj().T)


def solve_hpd(r, y) -> np.ndarray:
    """Solve ``R z = y`` for Hermitian positive definite ``R`` via Cholesky."""
    r = hermitian(r)
    y = np.asarray(y, dtype=np.complex128)
    if y.shape[0] != r.shape[0]:
        raise InvalidInputError(f"dimension mismatch: R is {r.shape}, y has {y.shape[0]} rows")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("right-hand side has non-finite entries")
    try:
        factor = scipy.linalg.cho_factor(r, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return scipy.linalg.cho_solve(factor, y, check_finite=False)


@dataclass(frozen=True)
class LowRankPlusIdentity:
    """``c I + sum_k weights[k] * g_k g_k^H`` with the ``g_k`` as columns of ``columns``."""

    c: float
    columns: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.complex128)
        if cols.ndim == 1:
            cols = cols[:, None]
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if cols.ndim != 2 or cols.shape[1] != w.shape[0]:
            raise InvalidInputError(f"{cols.shape[1]} columns but {w.shape[0]} weights")
        if not (np.isfinite(self.c) and np.all(np.isfinite(cols)) and np.all(np.isfinite(w))):
            raise InvalidInputError("non-finite structured operator")
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "weights", w)

    @classmethod
    def identity(cls, n: int, c: float) -> LowRankPlusIdentity:
        return cls(c, np.zeros((n, 0), np.complex128), np.zeros(0))

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    def materialize(self) -> np.ndarray:
        g = self.columns
        dense = (g * self.weights) @ g.conj().T
        dense[np.diag_indices(self.n)] += self.c
        return hermitian(dense)

    def matvec(self, v) -> np.ndarray:
        g = self.columns
        return self.c * v + g @ (self.weights * (g.conj().T @ v))

    def quad(self, v) -> float:
        """Real quadratic form ``v^H S v``."""
        proj = self.columns.conj().T @ v
        return float(self.c * np.vdot(v, v).real + np.sum(self.weights * np.abs(proj) ** 2))

    def spectral(self) -> SpectralLowRank:
        """Exact eigen-structure via a thin QR of the columns."""
        if self.rank == 0:
            return SpectralLowRank(self.c, np.zeros((self.n, 0), np.complex128), np.zeros(0))
        q, r = np.linalg.qr(self.columns)
        core = hermitian((r * self.weights) @ r.conj().T)
        gains, z = np.linalg.eigh(core)
        return SpectralLowRank(self.c, q @ z, gains)


@dataclass(frozen=True)
class SpectralLowRank:
    """``shift I + basis diag(gains) basis^H`` with an orthonormal ``basis``.

    On span(basis) the eigenvalues are ``shift + gains``; on its orthogonal
    complement every eigenvalue equals ``shift``.
    """

    shift: float
    basis: np.ndarray
    gains: np.ndarray

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def has_complement(self) -> bool:
        return self.basis.shape[1] < self.basis.shape[0]

    def eigenvalues_span(self) -> np.ndarray:
        return self.shift + self.gains

    def lambda_min(self) -> float:
        vals = list(self.eigenvalues_span())
        if self.has_complement:
            vals.append(self.shift)
        return float(min(vals))

    def lambda_max(self) -> float:
        vals = list(self.eigenvalues_span())
        if self.has_complement:
            vals.append(self.shift)
        return float(max(vals))

    def shifted(self, delta: float) -> SpectralLowRank:
        """Return the operator plus ``delta * I``."""
        return SpectralLowRank(self.shift + delta, self.basis, self.gains)

    def scaled(self, factor: float) -> SpectralLowRank:
        return SpectralLowRank(self.shift * factor, self.basis, self.gains * factor)

    def sqrt(self, band: float = PSD_BAND) -> SpectralLowRank:
        """Principal square root under the same clamping rule as :func:`psd_sqrt`."""
        span = self.eigenvalues_span()
        tol = band * max(1.0, abs(self.lambda_max()), abs(self.lambda_min()))
        if self.lambda_min() < -tol:
            raise NotPSDError(f"minimum eigenvalue {self.lambda_min():.3e} below -{tol:.3e}")
        root_shift = np.sqrt(max(self.shift, 0.0))
        root_span = np.sqrt(np.clip(span, 0.0, None))
        return SpectralLowRank(float(root_shift), self.basis, root_span - root_shift)

    def matvec(self, v) -> np.ndarray:
        u = self.basis
        return self.shift * v + u @ (self.gains * (u.conj().T @ v))

    def materialize(self) -> np.ndarray:
        u = self.basis
        dense = (u * self.gains) @ u.conj().T
        dense[np.diag_indices(self.n)] += self.shift
        return hermitian(dense)


def woodbury_solve(s: LowRankPlusIdentity, y) -> np.ndarray:
    """Solve ``(c I + G diag(w) G^H) z = y`` in ``O(n r^2 + r^3)``.

    Requires ``c > 0`` and non-negative weights; zero-weight columns are ignored.
    """
    if not s.c > 0:
        raise InvalidInputError(f"identity coefficient must be positive, got {s.c}")
    if np.any(s.weights < 0):
        raise InvalidInputError("woodbury_solve needs non-negative weights")
    y = np.asarray(y, dtype=np.complex128)
    if y.shape[0] != s.n:
        raise InvalidInputError(f"dimension mismatch: operator n={s.n}, y has {y.shape[0]} rows")
    keep = s.weights > 0
    if not np.any(keep):
        return y / s.c
    g = s.columns[:, keep]
    small = g.conj().T @ g
    small[np.diag_indices(small.shape[0])] += s.c / s.weights[keep]
    return (y - g @ solve_hpd(small, g.conj().T @ y)) / s.c
