"""Relative-phase recovery from detector records.

Two methods are provided: locating the first fringe maximum of a beat trace
relative to its reference time (``extract_phase_peak``), and the zero-beat
three-detector intensity formula (``extract_phase_three_detector``) with its
efficiency calibration.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import signal

from .errors import (
    CalibrationError,
    InconsistentCurrentsError,
    InputError,
    InsufficientFringesError,
    NoPeakError,
)
from .gaussian_core import wrap_degrees
from .signal_model import BeatTrace

__all__ = [
    "COSINE_CLAMP_TOL",
    "PhaseEstimate",
    "EfficiencyRatios",
    "parabolic_vertex",
    "find_peaks",
    "extract_phase_peak",
    "calibrate_efficiencies",
    "extract_phase_three_detector",
    "fold_degrees",
]

COSINE_CLAMP_TOL = 0.05


@dataclass(frozen=True)
class PhaseEstimate:
    """Extracted phase.

    ``phi_deg`` is in [0, 360) for the peak method and in [0, 180] for the
    three-detector method. ``period_us`` is only set by the peak method.
    """

    phi_deg: float
    method: str
    period_us: Optional[float] = None
    quality: float = 1.0
    flags: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class EfficiencyRatios:
    r13: float
    r23: float

    def __post_init__(self):
        for name in ("r13", "r23"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise CalibrationError(f"{name} must be positive and finite, got {v}")


def fold_degrees(deg):
    """Map angles onto [0, 180], the range of an arccos measurement."""
    w = wrap_degrees(deg)
    if np.ndim(w) == 0:
        return 360.0 - w if w > 180.0 else w
    return np.where(w > 180.0, 360.0 - w, w)


def parabolic_vertex(y_prev: float, y_mid: float, y_next: float) -> tuple[float, float]:
    """Vertex of the parabola through three equally spaced samples.

    Returns ``(offset, height)`` with ``offset`` in samples relative to the
    middle one. A flat triple gives offset 0.
    """
    denom = y_prev - 2.0 * y_mid + y_next
    if denom == 0:
        return 0.0, y_mid
    offset = 0.5 * (y_prev - y_next) / denom
    return offset, y_mid - 0.25 * (y_prev - y_next) * offset


def _smooth_width(trace: BeatTrace, smooth_frac: float, n: int) -> int:
    if smooth_frac <= 0 or trace.beat_freq_mhz <= 0:
        return 0
    width = int(round(smooth_frac / (trace.beat_freq_mhz * trace.dt_us)))
    if width % 2 == 0:
        width += 1
    if width < 5 or width > n:
        return 0
    return width


@lru_cache(maxsize=64)
def _savgol_kernel(width: int) -> np.ndarray:
    return signal.savgol_coeffs(width, 2, use="conv")


def _edge_peak(y: np.ndarray, at_start: bool, threshold: float) -> Optional[float]:
    """Index position of a maximum sitting on a window boundary, if any."""
    if at_start:
        y0, y1, y2 = y[0], y[1], y[2]
    else:
        y0, y1, y2 = y[-1], y[-2], y[-3]
    if not y0 > y1:
        return None
    offset, _ = parabolic_vertex(y0, y1, y2)
    # vertex relative to the boundary sample, counted inward
    pos = 1.0 + offset
    if y0 - 2.0 * y1 + y2 >= 0 or abs(pos) > 0.5:
        return None
    # prominence: drop from the boundary sample to the lowest point before
    # the signal rises again
    seg = y if at_start else y[::-1]
    rising = np.nonzero(np.diff(seg) > 0)[0]
    stop = rising[0] + 1 if rising.size else seg.size
    if seg[0] - seg[:stop].min() < threshold:
        return None
    return pos if at_start else (y.size - 1) - pos


def find_peaks(trace: BeatTrace, min_prominence: float = 0.0, *,
               rel_prominence: float = 0.0, smooth_frac: float = 0.5) -> np.ndarray:
    """Times (us) of fringe maxima inside the trace window, ascending.

    Discrete maxima whose prominence exceeds
    ``max(min_prominence, rel_prominence * in-window range)`` are refined by
    3-point parabolic interpolation.

    When ``smooth_frac > 0`` the window is first smoothed with a quadratic
    Savitzky-Golay filter spanning that fraction of the nominal beat period;
    the filter is symmetric, so fringe maxima do not move. Boundary maxima
    are only reported for unsmoothed traces (``smooth_frac=0``), because the
    filter's edge fit is biased; in smoothed mode the edge zones are skipped.
    """
    if min_prominence < 0 or rel_prominence < 0:
        raise InputError("prominence thresholds must be >= 0")
    sl = trace.window_slice()
    y = trace.samples[sl]
    if y.size < 3:
        raise InputError(f"trace window holds {y.size} samples, need at least 3")
    t_start = trace.t0_us + sl.start * trace.dt_us

    width = _smooth_width(trace, smooth_frac, y.size)
    offset0 = 0
    if width:
        # only the fully overlapped part is kept; edge zones are skipped
        y = np.convolve(y, _savgol_kernel(width), mode="valid")
        offset0 = width // 2
    threshold = max(min_prominence, rel_prominence * float(y.max() - y.min()))

    idx, _ = signal.find_peaks(y, prominence=threshold if threshold > 0 else None)
    positions = []
    for i in idx:
        offset, _ = parabolic_vertex(y[i - 1], y[i], y[i + 1])
        positions.append(offset0 + i + min(max(offset, -0.5), 0.5))
    if not width and y.size >= 3:
        for at_start in (True, False):
            pos = _edge_peak(y, at_start, threshold)
            if pos is not None:
                positions.append(pos)
    if not positions:
        raise NoPeakError("no fringe maximum exceeds the prominence threshold")
    return t_start + trace.dt_us * np.sort(np.asarray(positions))


def extract_phase_peak(trace: BeatTrace, min_prominence: float = 0.0, *,
                       rel_prominence: float = 0.25, smooth_frac: float = 0.5) -> PhaseEstimate:
    """Phase from the location of the first beat maximum.

    ``phi = 360 * tau / T`` where ``T`` is the mean spacing of all maxima in
    the window and ``tau`` is the delay of the first maximum after the
    reference time, reduced modulo ``T``. For a trace built as
    ``cos(2 pi dnu (t - t_ref) + phi_true)`` this returns
    ``(-phi_true) mod 360``.
    """
    try:
        peaks = find_peaks(trace, min_prominence, rel_prominence=rel_prominence,
                           smooth_frac=smooth_frac)
    except NoPeakError as exc:
        raise InsufficientFringesError(str(exc)) from exc
    if peaks.size < 2:
        raise InsufficientFringesError(f"found {peaks.size} fringe maximum, need at least 2")
    spacings = np.diff(peaks)
    period = float(spacings.mean())
    if not period > 0:
        raise InsufficientFringesError("degenerate fringe spacing")
    quality = max(0.0, 1.0 - float(spacings.std()) / period)
    tau = math.fmod(peaks[0] - trace.reference_time_us, period)
    phi = wrap_degrees(360.0 * tau / period)
    return PhaseEstimate(phi_deg=phi, method="peak", period_us=period, quality=quality)


def _mean_currents(record) -> np.ndarray:
    arr = np.asarray(record, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
        raise CalibrationError("a calibration record is one or more (i1, i2, i3) triples")
    return arr.mean(axis=0)


def calibrate_efficiencies(blocked_arm1, blocked_arm2) -> EfficiencyRatios:
    """Efficiency ratios from records taken with one interfering field blocked.

    With arm 2 blocked, D1 and D3 see the same field, so ``i1/i3`` gives
    ``eff1/eff3``; with arm 1 blocked, ``i2/i3`` gives ``eff2/eff3``. Each
    record may be a single triple or a stack of triples, which is averaged.
    """
    i1, _, i3_a = _mean_currents(blocked_arm2)
    _, i2, i3_b = _mean_currents(blocked_arm1)
    if not (i1 > 0 and i3_a > 0):
        raise CalibrationError(f"arm-2-blocked currents must be positive (i1={i1}, i3={i3_a})")
    if not (i2 > 0 and i3_b > 0):
        raise CalibrationError(f"arm-1-blocked currents must be positive (i2={i2}, i3={i3_b})")
    return EfficiencyRatios(r13=float(i1 / i3_a), r23=float(i2 / i3_b))


def extract_phase_three_detector(i1: float, i2: float, i3: float,
                                 cal: EfficiencyRatios) -> PhaseEstimate:
    """Phase in [0, 180] from the individual and combined photocurrents.

    The efficiency-corrected interference term gives ``cos(phi)``; values that
    overshoot [-1, 1] by at most ``COSINE_CLAMP_TOL`` are clamped and flagged,
    larger overshoots are rejected.
    """
    if not (i1 > 0 and i2 > 0):
        raise InputError(f"individual currents must be positive (i1={i1}, i2={i2})")
    cos_phi = (i3 * math.sqrt(cal.r13 * cal.r23)
               - i2 * math.sqrt(cal.r13 / cal.r23)
               - i1 * math.sqrt(cal.r23 / cal.r13)) / (2.0 * math.sqrt(i1 * i2))
    overshoot = abs(cos_phi) - 1.0
    flags: tuple = ()
    quality = 1.0
    if overshoot > COSINE_CLAMP_TOL:
        raise InconsistentCurrentsError(f"cos(phi) = {cos_phi:.4f} outside the clamp tolerance")
    if overshoot > 0:
        cos_phi = math.copysign(1.0, cos_phi)
        flags = ("clamped-cosine",)
        quality = 1.0 - overshoot / COSINE_CLAMP_TOL
    return PhaseEstimate(phi_deg=math.degrees(math.acos(cos_phi)), method="three-detector",
                         quality=quality, flags=flags)
