"""Detector records synthesized from per-trial field intensities and phases."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError, SamplingRateError, TraceMismatchError

__all__ = [
    "MIN_SAMPLES_PER_PERIOD",
    "PulseTiming",
    "DetectorParams",
    "BeatTrace",
    "synthesize_beat_trace",
    "synthesize_three_detector",
    "compose_shot_trace",
]

MIN_SAMPLES_PER_PERIOD = 20


@dataclass(frozen=True)
class PulseTiming:
    """Write pulse, delay, then read pulse (all in microseconds)."""

    write_start_us: float = 0.0
    write_duration_us: float = 3.0
    delay_us: float = 0.1
    read_duration_us: float = 16.0

    def __post_init__(self):
        for name in ("write_start_us", "write_duration_us", "delay_us", "read_duration_us"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")

    @property
    def write_window(self) -> tuple[float, float]:
        return (self.write_start_us, self.write_start_us + self.write_duration_us)

    @property
    def read_start_us(self) -> float:
        return self.write_window[1] + self.delay_us

    @property
    def read_window(self) -> tuple[float, float]:
        return (self.read_start_us, self.read_start_us + self.read_duration_us)


@dataclass(frozen=True)
class DetectorParams:
    eff1: float = 1.0
    eff2: float = 1.0
    eff3: float = 1.0
    noise_std: float = 0.0
    dark_level: float = 0.0
    sample_interval_us: float = 0.01

    def __post_init__(self):
        for name in ("eff1", "eff2", "eff3"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ParameterError(f"{name} must lie in (0, 1], got {v}")
        if self.noise_std < 0 or self.dark_level < 0:
            raise ParameterError("noise_std and dark_level must be >= 0")
        if not self.sample_interval_us > 0:
            raise ParameterError("sample_interval_us must be > 0")


@dataclass
class BeatTrace:
    """Uniformly sampled detector intensity.

    ``window_us`` bounds the pulse (in-window) part of the record; phase
    extraction only looks inside it. ``markers`` holds named reference times
    of composed records (A for the write segment, B for the read segment).
    """

    t0_us: float
    dt_us: float
    samples: np.ndarray
    reference_time_us: float
    beat_freq_mhz: float
    label: str = "write"
    window_us: Optional[tuple[float, float]] = None
    markers: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not np.all(np.isfinite(self.samples)):
            raise ParameterError("trace samples must be finite")
        if self.window_us is None:
            self.window_us = (self.t0_us, self.t0_us + self.samples.size * self.dt_us)
        else:
            self.window_us = (float(self.window_us[0]), float(self.window_us[1]))

    @property
    def times(self) -> np.ndarray:
        return self.t0_us + self.dt_us * np.arange(self.samples.size)

    def window_slice(self) -> slice:
        lo = int(round((self.window_us[0] - self.t0_us) / self.dt_us))
        hi = int(round((self.window_us[1] - self.t0_us) / self.dt_us))
        return slice(max(lo, 0), min(hi, self.samples.size))


def _check_sampling(delta_nu_mhz: float, dt_us: float):
    if delta_nu_mhz < 0:
        raise ParameterError("beat frequency must be >= 0")
    if delta_nu_mhz > 0 and 1.0 / (delta_nu_mhz * dt_us) < MIN_SAMPLES_PER_PERIOD - 1e-9:
        raise SamplingRateError(
            f"{1.0 / (delta_nu_mhz * dt_us):.3g} samples per beat period; at least "
            f"{MIN_SAMPLES_PER_PERIOD} required")


def _noise(rng, std, size):
    if std == 0:
        return 0.0
    if rng is None:
        raise ParameterError("an rng is required when noise_std > 0")
    return rng.normal(0.0, std, size=size)


def synthesize_beat_trace(I1: float, I2: float, phi: float, delta_nu_mhz: float,
                          window: tuple[float, float], det: DetectorParams,
                          rng: Optional[np.random.Generator] = None, *,
                          label: str = "write",
                          reference_time_us: Optional[float] = None,
                          span: Optional[tuple[float, float]] = None,
                          decay_us: Optional[float] = None) -> BeatTrace:
    """Detected intensity of two superposed fields beating at ``delta_nu_mhz``.

    Inside ``window`` the signal is
    ``eff3 * envelope * (I1 + I2 + 2 sqrt(I1 I2) cos(2 pi dnu (t - t_ref) + phi))``;
    outside it only the dark level remains. ``span`` sets the recorded time
    range (defaults to the window itself). The envelope is rectangular unless
    ``decay_us`` gives an exponential decay time.
    """
    if I1 < 0 or I2 < 0:
        raise ParameterError("intensities must be >= 0")
    dt = det.sample_interval_us
    _check_sampling(delta_nu_mhz, dt)
    w0, w1 = window
    if w1 < w0:
        raise ParameterError("window end precedes its start")
    t_ref = w0 if reference_time_us is None else reference_time_us
    s0, s1 = window if span is None else span
    n = int(round((s1 - s0) / dt))
    t = s0 + dt * np.arange(n)
    # half-sample tolerance keeps boundaries stable under float round-off
    inside = (t >= w0 - 0.5 * dt) & (t < w1 - 0.5 * dt)

    fringe = I1 + I2 + 2.0 * math.sqrt(I1 * I2) * np.cos(
        2.0 * math.pi * delta_nu_mhz * (t - t_ref) + math.radians(phi))
    envelope = inside.astype(float)
    if decay_us is not None:
        envelope = envelope * np.exp(-np.clip(t - w0, 0.0, None) / decay_us)
    samples = det.eff3 * envelope * fringe + det.dark_level + _noise(rng, det.noise_std, n)
    return BeatTrace(t0_us=s0, dt_us=dt, samples=samples, reference_time_us=t_ref,
                     beat_freq_mhz=delta_nu_mhz, label=label, window_us=(w0, w1))


def synthesize_three_detector(I1: float, I2: float, phi: float, det: DetectorParams,
                              rng: Optional[np.random.Generator] = None) -> tuple[float, float, float]:
    """Window-averaged photocurrents (i1, i2, i3) of the zero-beat scheme.

    D1 and D2 see one field each, D3 sees their superposition. Currents are
    dark-subtracted, so only the additive noise is applied.
    """
    if I1 < 0 or I2 < 0:
        raise ParameterError("intensities must be >= 0")
    i12 = I1 + I2 + 2.0 * math.sqrt(I1 * I2) * math.cos(math.radians(phi))
    clean = np.array([det.eff1 * I1, det.eff2 * I2, det.eff3 * i12])
    noisy = clean + _noise(rng, det.noise_std, 3)
    return tuple(float(x) for x in noisy)


def compose_shot_trace(write: BeatTrace, read: BeatTrace, timing: PulseTiming,
                       fill: float = 0.0) -> BeatTrace:
    """Concatenate write segment, delay gap and read segment into one record.

    Markers A and B are the write and read reference times. The gap is filled
    with ``fill`` (normally the dark level). An empty read segment yields a
    write-only record.
    """
    if not math.isclose(write.dt_us, read.dt_us, rel_tol=1e-12):
        raise TraceMismatchError(f"sample intervals differ: {write.dt_us} vs {read.dt_us}")
    dt = write.dt_us
    markers = {"A": write.reference_time_us}
    if read.samples.size == 0:
        samples = write.samples.copy()
        end = write.window_us[1]
    else:
        n_gap = int(round(timing.delay_us / dt))
        samples = np.concatenate([write.samples, np.full(n_gap, float(fill)), read.samples])
        end = read.window_us[1]
        markers["B"] = read.reference_time_us
    return BeatTrace(t0_us=write.t0_us, dt_us=dt, samples=samples,
                     reference_time_us=write.reference_time_us,
                     beat_freq_mhz=write.beat_freq_mhz, label="shot",
                     window_us=(write.window_us[0], end), markers=markers)
