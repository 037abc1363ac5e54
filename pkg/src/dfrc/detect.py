"""Neyman-Pearson detection probability for a known-SINR target.

``P_D = erfc(erfcinv(2 P_FA) - sqrt(SINR)) / 2``. The curve is an upper bound
on achievable performance: it assumes the receiver knows the clutter
statistics exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.special

from .errors import DomainError

_TWO_OVER_SQRT_PI = 2.0 / np.sqrt(np.pi)


def erfc(x):
    """Complementary error function (scipy/Cephes, relative error near 1 ulp)."""
    return scipy.special.erfc(x)


def erfcinv(p, newton_steps: int = 2):
    """Inverse of :func:`erfc` on ``(0, 2)``.

    Starts from scipy's approximation and applies Newton steps on
    ``erfc(x) - p`` to remove residual error.
    """
    arr = np.asarray(p, dtype=np.float64)
    if np.any(~((arr > 0) & (arr < 2))):
        raise DomainError(f"erfcinv needs 0 < p < 2, got {p}")
    x = scipy.special.erfcinv(arr)
    for _ in range(newton_steps):
        slope = -_TWO_OVER_SQRT_PI * np.exp(-x * x)
        step = np.where(slope != 0, (erfc(x) - arr) / np.where(slope != 0, slope, 1.0), 0.0)
        x = x - step
    return float(x) if np.ndim(x) == 0 else x


def detection_probability(sinr_linear, pfa):
    s = np.asarray(sinr_linear, dtype=np.float64)
    f = np.asarray(pfa, dtype=np.float64)
    if np.any(~(s >= 0)) or np.any(~np.isfinite(s)):
        raise DomainError(f"SINR must be finite and non-negative, got {sinr_linear}")
    if np.any(~((f > 0) & (f < 1))):
        raise DomainError(f"false-alarm probability must lie in (0, 1), got {pfa}")
    pd = 0.5 * erfc(erfcinv(2.0 * f) - np.sqrt(s))
    return float(pd) if np.ndim(pd) == 0 else pd


def miss_probability(sinr_linear, pfa):
    """``1 - P_D`` evaluated without cancellation, useful once ``P_D`` rounds to 1."""
    s = np.asarray(sinr_linear, dtype=np.float64)
    detection_probability(s, pfa)  # same domain checks
    pm = 0.5 * erfc(np.sqrt(s) - erfcinv(2.0 * np.asarray(pfa, dtype=np.float64)))
    return float(pm) if np.ndim(pm) == 0 else pm


@dataclass(frozen=True, eq=False)
class DetectionCurve:
    pfa: float
    sinr_db: np.ndarray
    p_d: np.ndarray
    p_miss: np.ndarray


def detection_curve(sinr_db, pfa: float) -> DetectionCurve:
    grid = np.asarray(sinr_db, dtype=np.float64).reshape(-1)
    lin = 10.0 ** (grid / 10.0)
    return DetectionCurve(float(pfa), grid, np.asarray(detection_probability(lin, pfa)),
                          np.asarray(miss_probability(lin, pfa)))
