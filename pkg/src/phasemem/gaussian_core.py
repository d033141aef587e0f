"""Phase-space sampling of the write squeezer, the read amplifier and the
anti-Stokes readout.

Every bosonic mode is represented by a complex amplitude drawn in the
symmetric (Wigner) convention: a vacuum mode has independent quadratures
``x = sqrt(2) Re(alpha)`` and ``p = sqrt(2) Im(alpha)`` with variance 1/2, so
the mean of ``|alpha|^2`` over vacuum samples is 1/2. Classical averages over samples then
reproduce symmetrically ordered moments; the estimators below apply the
explicit +/- 1/2 corrections needed for normally or anti-normally ordered
quantities.

All transforms accept Python complex scalars or numpy complex arrays and are
applied elementwise, so a batch of trials can be evolved in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from .errors import (
    InsufficientGainError,
    InsufficientSamplesError,
    ParameterError,
    UndefinedPhaseError,
)

__all__ = [
    "VACUUM_VARIANCE",
    "SqueezeParams",
    "ReadParams",
    "WriteOutcome",
    "MomentEstimate",
    "sample_vacuum",
    "apply_two_mode_squeeze",
    "apply_read_amplifier",
    "apply_antistokes_readout",
    "phase_of",
    "wrap_degrees",
    "estimate_correlations",
    "read_coherence",
]

# vacuum quadrature variance in the symmetric convention; this is also the
# vacuum value of mean |alpha|^2 and the size of the ordering corrections
VACUUM_VARIANCE = 0.5

Amplitude = Union[complex, np.ndarray]


def wrap_degrees(deg):
    """Reduce angles to [0, 360), mapping values that round up to 360 onto 0."""
    out = np.mod(deg, 360.0)
    out = np.where(out >= 360.0, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class SqueezeParams:
    """Effective write-stage parameters.

    ``r`` lumps the coupling rate and the write duration into one squeezing
    parameter; ``pump_phase`` (degrees) is the phase of the write field and
    sets the constant in phi_stokes + phi_spin = const.
    """

    r: float
    pump_phase: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.r) or self.r < 0:
            raise ParameterError(f"squeeze parameter r must be finite and >= 0, got {self.r}")
        if not (0.0 <= self.pump_phase < 360.0):
            raise ParameterError(f"pump_phase must lie in [0, 360), got {self.pump_phase}")


@dataclass(frozen=True)
class ReadParams:
    """Read-stage parameters shared by the amplifier and anti-Stokes maps.

    ``T2_us`` is an optional spin-wave amplitude decay time; ``math.inf``
    (the default) disables decay during the write-to-read delay.
    """

    G: float = 2.0
    phi_R: float = 0.0
    eta_as: float = 0.9
    tau_delay_us: float = 0.1
    T2_us: float = math.inf

    def __post_init__(self):
        if not math.isfinite(self.G) or self.G < 1.0:
            raise ParameterError(f"amplitude gain G must be >= 1, got {self.G}")
        if not (0.0 <= self.eta_as <= 1.0):
            raise ParameterError(f"eta_as must lie in [0, 1], got {self.eta_as}")
        if self.tau_delay_us < 0:
            raise ParameterError(f"tau_delay_us must be >= 0, got {self.tau_delay_us}")
        if not self.T2_us > 0:
            raise ParameterError(f"T2_us must be > 0, got {self.T2_us}")

    @property
    def decay(self) -> float:
        """Amplitude factor picked up by the spin wave during the delay."""
        if math.isinf(self.T2_us):
            return 1.0
        return math.exp(-self.tau_delay_us / self.T2_us)


class WriteOutcome(NamedTuple):
    alpha_stokes: Amplitude
    alpha_spin: Amplitude


@dataclass(frozen=True)
class MomentEstimate:
    value: complex
    std_error: float
    n: int


def sample_vacuum(rng: np.random.Generator, size=None) -> Amplitude:
    """Draw vacuum amplitude(s) with quadrature variance 1/2.

    Real and imaginary parts of ``alpha`` each have variance 1/4, so
    ``E|alpha|^2 = 1/2``.

    Returns a Python complex when ``size`` is None, otherwise a complex array
    of that shape.
    """
    scale = math.sqrt(VACUUM_VARIANCE / 2.0)
    if size is None:
        re, im = rng.normal(0.0, scale, size=2)
        return complex(re, im)
    shape = (size,) if np.isscalar(size) else tuple(size)
    q = rng.normal(0.0, scale, size=(2,) + shape)
    return q[0] + 1j * q[1]


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ParameterError("transform produced a non-finite amplitude")


def _as_output(x):
    if np.ndim(x) == 0:
        return complex(x)
    return x


def apply_two_mode_squeeze(v1: Amplitude, v2: Amplitude, p: SqueezeParams) -> WriteOutcome:
    """Evolve Stokes input ``v1`` and spin-wave input ``v2`` through the write
    two-mode squeezer.

    Each output mixes its own input with the conjugate of the other one, which
    is what ties the Stokes and spin-wave phases together.
    """
    c, s = math.cosh(p.r), math.sinh(p.r)
    pump = np.exp(1j * math.radians(p.pump_phase))
    v1 = np.asarray(v1, dtype=complex)
    v2 = np.asarray(v2, dtype=complex)
    stokes = v1 * c + pump * np.conj(v2) * s
    spin = v2 * c + pump * np.conj(v1) * s
    _check_finite(stokes, spin)
    return WriteOutcome(_as_output(stokes), _as_output(spin))


def apply_read_amplifier(v_fresh: Amplitude, alpha_spin: Amplitude, p: ReadParams) -> Amplitude:
    """Read-Stokes amplitude of the seeded Raman amplifier.

    The stored spin wave (decayed over the delay) enters conjugated, so the
    read Stokes phase is ``phi_R - phi_spin``. With G == 1 the spin wave does
    not contribute at all.
    """
    spin = np.asarray(alpha_spin, dtype=complex) * p.decay
    idler = math.sqrt(p.G * p.G - 1.0)
    out = p.G * np.asarray(v_fresh, dtype=complex) + np.exp(1j * math.radians(p.phi_R)) * idler * np.conj(spin)
    _check_finite(out)
    return _as_output(out)


def apply_antistokes_readout(v_fresh: Amplitude, alpha_spin: Amplitude, p: ReadParams) -> Amplitude:
    """Anti-Stokes readout modelled as a beam splitter with efficiency ``eta_as``.

    Unlike the amplifier, this map carries the spin-wave phase itself (not its
    conjugate); the remaining ``1 - eta_as`` of the output is vacuum.
    """
    spin = np.asarray(alpha_spin, dtype=complex) * p.decay
    out = (np.exp(1j * math.radians(p.phi_R)) * math.sqrt(p.eta_as) * spin
           + math.sqrt(1.0 - p.eta_as) * np.asarray(v_fresh, dtype=complex))
    _check_finite(out)
    return _as_output(out)


def phase_of(a: Amplitude):
    """Phase of an amplitude in degrees, in [0, 360).

    Raises UndefinedPhaseError if any amplitude is exactly zero.
    """
    a = np.asarray(a, dtype=complex)
    if np.any(a == 0):
        raise UndefinedPhaseError("phase of a zero amplitude is undefined")
    return wrap_degrees(np.degrees(np.angle(a)))


def _mean_estimate(x: np.ndarray) -> MomentEstimate:
    n = x.size
    if n < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {n}")
    mean = x.mean()
    # for complex x this is sqrt(mean |x - mean|^2 * n/(n-1))
    se = float(np.std(x, ddof=1) / math.sqrt(n))
    value = complex(mean) if np.iscomplexobj(x) else float(mean)
    return MomentEstimate(value, se, n)


def _stack_outcomes(trials) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(trials, WriteOutcome):
        stokes, spin = trials
    else:
        trials = list(trials)
        stokes = [t.alpha_stokes for t in trials]
        spin = [t.alpha_spin for t in trials]
    stokes = np.ravel(np.asarray(stokes, dtype=complex))
    spin = np.ravel(np.asarray(spin, dtype=complex))
    if stokes.shape != spin.shape:
        raise InsufficientSamplesError("Stokes and spin-wave samples differ in length")
    return stokes, spin


def estimate_correlations(trials: Union[WriteOutcome, Iterable[WriteOutcome]]) -> tuple[MomentEstimate, MomentEstimate]:
    """Phase-sensitive cross-correlation and its normalized form.

    Parameters
    ----------
    trials : WriteOutcome of arrays, or iterable of WriteOutcome
        Write-stage samples, one per trial.

    Returns
    -------
    cross : MomentEstimate
        ``mean(alpha_stokes * alpha_spin)``. The product of two different
        modes needs no ordering correction.
    gamma : MomentEstimate
        ``cross / sqrt(<S^dag S> <a a^dag>)`` with the normally ordered spin
        occupation ``mean|alpha_spin|^2 - 1/2`` and the anti-normally ordered
        Stokes moment ``mean|alpha_stokes|^2 + 1/2``. The standard error comes
        from the linearized (delta-method) influence of each sample.

    Raises
    ------
    InsufficientGainError
        If the corrected denominator is not positive.
    """
    stokes, spin = _stack_outcomes(trials)
    n = stokes.size
    if n < 2:
        raise InsufficientSamplesError(f"need at least 2 trials, got {n}")
    prod = stokes * spin
    cross = _mean_estimate(prod)

    n_spin = np.abs(spin) ** 2
    n_stokes = np.abs(stokes) ** 2
    spin_occ = n_spin.mean() - VACUUM_VARIANCE
    stokes_anti = n_stokes.mean() + VACUUM_VARIANCE
    if not (spin_occ > 0 and stokes_anti > 0):
        raise InsufficientGainError(
            f"ordering-corrected moments not positive (spin {spin_occ:.3g}, stokes {stokes_anti:.3g})")
    norm = math.sqrt(spin_occ * stokes_anti)
    gamma = cross.value / norm
    influence = ((prod - cross.value) / norm
                 - 0.5 * gamma * ((n_spin - n_spin.mean()) / spin_occ
                                  + (n_stokes - n_stokes.mean()) / stokes_anti))
    se = float(np.sqrt(np.mean(np.abs(influence) ** 2) / (n - 1)))
    return cross, MomentEstimate(complex(gamma), se, n)


def read_coherence(alpha_read1: Sequence[complex], alpha_read2: Sequence[complex]) -> MomentEstimate:
    """First-order coherence ``mean(conj(alpha_read1) * alpha_read2)`` between
    the two read Stokes fields, one pair per realization."""
    a1 = np.ravel(np.asarray(alpha_read1, dtype=complex))
    a2 = np.ravel(np.asarray(alpha_read2, dtype=complex))
    if a1.shape != a2.shape:
        raise InsufficientSamplesError("read arms differ in length")
    return _mean_estimate(np.conj(a1) * a2)
