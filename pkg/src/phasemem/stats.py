"""Circular statistics over per-trial phase pairs (all angles in degrees)."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import (
    AmbiguousSlopeError,
    DegenerateInputError,
    InputError,
    InsufficientSamplesError,
    UndefinedMeanError,
)
from .gaussian_core import wrap_degrees
from .phase_extract import fold_degrees

__all__ = [
    "SLOPE_TIE_TOL",
    "CorrelationReport",
    "SlopeFit",
    "circular_mean_std",
    "circular_correlation",
    "fit_slope_pm1",
    "phase_sum_concentration",
    "correlation_report",
]

SLOPE_TIE_TOL = 1e-9
_R_FLOOR = 1e-12


@dataclass(frozen=True)
class CorrelationReport:
    n: int
    circ_corr: float
    best_slope: int
    residual_circ_std_deg: float
    mean_offset_deg: float
    gamma_abs: Optional[float] = None
    folded: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CorrelationReport":
        return cls(**d)


class SlopeFit(NamedTuple):
    best_slope: int
    residual_circ_std_deg: float
    mean_offset_deg: float


def _as_degrees(phases, min_n: int = 1) -> np.ndarray:
    a = np.ravel(np.asarray(phases, dtype=float))
    if a.size < min_n:
        raise InsufficientSamplesError(f"need at least {min_n} phases, got {a.size}")
    return a


def _pair(x, y, min_n: int = 3) -> tuple[np.ndarray, np.ndarray]:
    x = np.ravel(np.asarray(x, dtype=float))
    y = np.ravel(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise InputError(f"phase lists differ in length ({x.size} vs {y.size})")
    if x.size < min_n:
        raise InsufficientSamplesError(f"need at least {min_n} phase pairs, got {x.size}")
    return x, y


def circular_mean_std(phases) -> tuple[float, float]:
    """Circular mean and circular standard deviation ``sqrt(-2 ln R)``.

    Raises UndefinedMeanError when the mean resultant length R vanishes.
    """
    rad = np.radians(_as_degrees(phases))
    z = np.mean(np.exp(1j * rad))
    R = abs(z)
    if R < _R_FLOOR:
        raise UndefinedMeanError("mean resultant length is zero; circular mean undefined")
    std = math.sqrt(max(0.0, -2.0 * math.log(min(R, 1.0))))
    return wrap_degrees(math.degrees(math.atan2(z.imag, z.real))), math.degrees(std)


def circular_correlation(x, y) -> float:
    """Fisher-Lee circular-circular correlation coefficient.

    Uses the closed form of the pairwise statistic
    ``sum sin(x_i - x_j) sin(y_i - y_j)`` normalized by its Cauchy-Schwarz
    bound, so it is invariant under independent rotations of ``x`` and ``y``.
    """
    x, y = _pair(x, y)
    x, y = np.radians(x), np.radians(y)
    n = x.size
    cx, sx, cy, sy = np.cos(x), np.sin(x), np.cos(y), np.sin(y)
    A = np.sum(cx * cy)
    B = np.sum(sx * sy)
    C = np.sum(cx * sy)
    D = np.sum(sx * cy)
    vx = n * n - np.sum(np.cos(2 * x)) ** 2 - np.sum(np.sin(2 * x)) ** 2
    vy = n * n - np.sum(np.cos(2 * y)) ** 2 - np.sum(np.sin(2 * y)) ** 2
    if vx <= 1e-12 * n * n or vy <= 1e-12 * n * n:
        raise DegenerateInputError("circular correlation undefined for zero-spread input")
    rho = 4.0 * (A * B - C * D) / math.sqrt(vx * vy)
    return float(min(1.0, max(-1.0, rho)))


def fit_slope_pm1(x, y, folded: bool = False) -> SlopeFit:
    """Decide between ``y = x + c`` and ``y = -x + c`` on the circle.

    Each candidate slope is scored by the circular std of ``y - s*x``; the
    smaller one wins and its circular mean is the offset.

    ``folded=True`` is for phases measured as arccos (range [0, 180]). Both
    coordinates are then folded onto [0, 180] and the slope is the one seen
    in that folded plane. The sign of the underlying (unfolded) relation
    cannot be recovered from folded data, so the folded slope also depends on
    the offset.
    """
    x, y = _pair(x, y)
    if folded:
        x, y = fold_degrees(x), fold_degrees(y)
    scores = {}
    for s in (1, -1):
        resid = y - s * x
        try:
            offset, std = circular_mean_std(resid)
        except UndefinedMeanError:
            offset, std = float("nan"), math.inf
        scores[s] = (std, offset)
    (std_p, off_p), (std_m, off_m) = scores[1], scores[-1]
    if math.isinf(std_p) and math.isinf(std_m) or abs(std_p - std_m) <= SLOPE_TIE_TOL:
        raise AmbiguousSlopeError(f"slopes +1 and -1 fit equally well (std {std_p:.6g} deg)")
    if std_p < std_m:
        return SlopeFit(1, std_p, off_p)
    return SlopeFit(-1, std_m, off_m)


def phase_sum_concentration(spin_phases, stokes_phases) -> float:
    """Circular std (degrees) of the per-trial phase sum."""
    spin, stokes = _pair(spin_phases, stokes_phases)
    return circular_mean_std(wrap_degrees(spin + stokes))[1]


def correlation_report(x, y, *, folded: bool = False,
                       gamma_abs: Optional[float] = None) -> CorrelationReport:
    """Correlation, slope decision and residual spread for one phase pair."""
    x, y = _pair(x, y)
    fx, fy = (fold_degrees(x), fold_degrees(y)) if folded else (x, y)
    fit = fit_slope_pm1(x, y, folded=folded)
    return CorrelationReport(n=int(x.size), circ_corr=circular_correlation(fx, fy),
                             best_slope=fit.best_slope,
                             residual_circ_std_deg=fit.residual_circ_std_deg,
                             mean_offset_deg=fit.mean_offset_deg,
                             gamma_abs=gamma_abs, folded=folded)
