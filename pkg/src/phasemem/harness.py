"""Seeded end-to-end runs: write, interfere, read, interfere, extract, analyze.

Every trial draws from its own counter-based (Philox) random stream keyed by
``(master_seed, trial_index)``, so a run is bit-identical however the trials
are distributed over worker processes.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import gaussian_core as gc
from .errors import ConfigError, EmptyReportError, ParameterError, PhaseMemError
from .phase_extract import (
    EfficiencyRatios,
    PhaseEstimate,
    calibrate_efficiencies,
    extract_phase_peak,
    extract_phase_three_detector,
)
from .signal_model import (
    BeatTrace,
    DetectorParams,
    PulseTiming,
    compose_shot_trace,
    synthesize_beat_trace,
    synthesize_three_detector,
)
from .stats import CorrelationReport, correlation_report, phase_sum_concentration

__all__ = [
    "RETRIEVAL_MODES",
    "EXTRACTION_METHODS",
    "TRIALS_HEADER",
    "ExperimentConfig",
    "TrialRecord",
    "ExperimentReport",
    "trial_rng",
    "load_config",
    "parse_config",
    "format_config",
    "run_trial",
    "run_experiment",
    "analyze_records",
    "emit_outputs",
    "write_trials",
    "read_trials",
    "analyze_trial_rows",
    "write_trace",
    "read_trace",
]

RETRIEVAL_MODES = ("stokes", "antistokes", "both")
EXTRACTION_METHODS = ("peak", "three-detector")
TRIALS_HEADER = ["trial", "phi_SW_deg", "phi_SR_deg", "phi_ASR_deg", "quality_SW", "quality_R", "flags"]

# spawn-key namespaces of the per-run random streams
_TRIAL_STREAM = 0
_CALIBRATION_STREAM = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """All effective parameters of a run, flat so that config-file keys are
    exactly the field names.

    ``noise_rel`` sets the additive detector noise of every record as a
    fraction of that record's ensemble-mean fringe amplitude.
    ``min_prominence`` is the absolute detection floor (intensity units) a
    fringe must clear to count as a peak. ``read_decay_us`` is a cosmetic
    exponential decay of the read envelope (``inf`` disables it).
    """

    r1: float = 2.0
    r2: float = 2.0
    pump_phase1: float = 0.0
    pump_phase2: float = 0.0
    G: float = 2.0
    phi_R1: float = 0.0
    phi_R2: float = 0.0
    eta_as: float = 0.9
    T2_us: float = math.inf
    retrieval_mode: str = "stokes"
    extraction_method: str = "peak"
    write_start_us: float = 0.0
    write_duration_us: float = 3.0
    delay_us: float = 0.1
    read_duration_us: float = 16.0
    eff1: float = 1.0
    eff2: float = 1.0
    eff3: float = 1.0
    noise_rel: float = 0.01
    dark_level: float = 0.0
    sample_interval_us: float = 0.01
    read_decay_us: float = math.inf
    delta_nu_write_mhz: float = 1.0
    delta_nu_read_mhz: float = 0.4
    min_prominence: float = 3.0
    calibration_shots: int = 100
    trials: int = 10_000
    master_seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.retrieval_mode not in RETRIEVAL_MODES:
            raise ConfigError(f"retrieval_mode must be one of {RETRIEVAL_MODES}")
        if self.extraction_method not in EXTRACTION_METHODS:
            raise ConfigError(f"extraction_method must be one of {EXTRACTION_METHODS}")
        if self.noise_rel < 0 or self.min_prominence < 0:
            raise ConfigError("noise_rel and min_prominence must be >= 0")
        if self.calibration_shots < 1:
            raise ConfigError("calibration_shots must be >= 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be >= 0")
        if not self.read_decay_us > 0:
            raise ConfigError("read_decay_us must be > 0")
        try:
            self.timing
            self.detector()
            for k in (1, 2):
                self.squeeze(k)
                self.read(k)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def timing(self) -> PulseTiming:
        return PulseTiming(self.write_start_us, self.write_duration_us,
                           self.delay_us, self.read_duration_us)

    def detector(self, noise_std: float = 0.0) -> DetectorParams:
        return DetectorParams(self.eff1, self.eff2, self.eff3, noise_std,
                              self.dark_level, self.sample_interval_us)

    def squeeze(self, k: int) -> gc.SqueezeParams:
        if k == 1:
            return gc.SqueezeParams(self.r1, self.pump_phase1)
        return gc.SqueezeParams(self.r2, self.pump_phase2)

    def read(self, k: int) -> gc.ReadParams:
        return gc.ReadParams(self.G, self.phi_R1 if k == 1 else self.phi_R2,
                             self.eta_as, self.delay_us, self.T2_us)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# --------------------------------------------------------------------------
# config files

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, raw: str, lineno: int):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} expects {kind}, got {raw!r}") from None
    return raw


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw, lineno)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), **overrides)


def format_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items())


# --------------------------------------------------------------------------
# trials


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent counter-based stream for one trial."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(_TRIAL_STREAM, trial_index))
    return np.random.Generator(np.random.Philox(seq))


def _mean_intensities(cfg: ExperimentConfig) -> dict[str, tuple[float, float]]:
    """Ensemble-mean detected intensity of each arm, per record type."""
    out = {"write": [], "read_stokes": [], "read_antistokes": []}
    for k in (1, 2):
        m_write = math.sinh(cfg.squeeze(k).r) ** 2 + gc.VACUUM_VARIANCE
        spin = m_write * cfg.read(k).decay ** 2
        out["write"].append(m_write)
        out["read_stokes"].append(cfg.G ** 2 * gc.VACUUM_VARIANCE + (cfg.G ** 2 - 1) * spin)
        out["read_antistokes"].append(cfg.eta_as * spin + (1 - cfg.eta_as) * gc.VACUUM_VARIANCE)
    return {k: tuple(v) for k, v in out.items()}


@dataclass
class _RunContext:
    noise: dict[str, float]
    calibration: dict[str, EfficiencyRatios]


def _build_context(cfg: ExperimentConfig) -> _RunContext:
    means = _mean_intensities(cfg)
    # E[sqrt(I)] = sqrt(pi m)/2 for an exponentially distributed intensity
    noise = {seg: cfg.noise_rel * cfg.eff3 * 0.5 * math.pi * math.sqrt(m1 * m2)
             for seg, (m1, m2) in means.items()}
    needed = {f"read_{'stokes' if name == 'SR' else 'antistokes'}"
              for name, m in _read_methods(cfg).items() if m == "three-detector"}
    if cfg.extraction_method == "three-detector":
        needed.add("write")
    calibration = {}
    for stream, seg in enumerate(sorted(needed)):
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(cfg.master_seed, spawn_key=(_CALIBRATION_STREAM, stream))))
        det = cfg.detector(noise[seg])
        m1, m2 = means[seg]
        blocked2 = [synthesize_three_detector(m1, 0.0, 0.0, det, rng) for _ in range(cfg.calibration_shots)]
        blocked1 = [synthesize_three_detector(0.0, m2, 0.0, det, rng) for _ in range(cfg.calibration_shots)]
        calibration[seg] = calibrate_efficiencies(blocked1, blocked2)
    return _RunContext(noise, calibration)


@dataclass
class TrialRecord:
    """One shot: sampled amplitudes of both ensembles and the extracted phases.

    Amplitude pairs are ``(ensemble 1, ensemble 2)``. A phase is None when
    its extraction failed; the reason is in ``flags`` as ``<field>:<error>``.
    """

    trial_index: int
    stokes_write: tuple
    spin_write: tuple
    stokes_read: Optional[tuple] = None
    antistokes_read: Optional[tuple] = None
    phi_SW_deg: Optional[float] = None
    phi_SR_deg: Optional[float] = None
    phi_ASR_deg: Optional[float] = None
    quality_SW: Optional[float] = None
    quality_SR: Optional[float] = None
    quality_ASR: Optional[float] = None
    flags: list = field(default_factory=list)
    traces: Optional[dict] = None

    @property
    def required_phases(self) -> tuple[str, ...]:
        names = ["SW"]
        if self.stokes_read is not None:
            names.append("SR")
        if self.antistokes_read is not None:
            names.append("ASR")
        return tuple(names)

    @property
    def analyzed(self) -> bool:
        return all(getattr(self, f"phi_{n}_deg") is not None for n in self.required_phases)


def _error_tag(exc: Exception) -> str:
    name = type(exc).__name__.removesuffix("Error")
    return re.sub(r"(?<!^)(?=[A-Z])", "-", name).lower()


def _relative_phase(a1: complex, a2: complex) -> float:
    return math.degrees(math.atan2(a1.imag, a1.real) - math.atan2(a2.imag, a2.real))


def _measure(pair, segment: str, method: str, window, delta_nu: float, label: str,
             cfg: ExperimentConfig, ctx: _RunContext, rng, traces: Optional[dict],
             decay_us: Optional[float] = None) -> PhaseEstimate:
    a1, a2 = pair
    I1, I2 = abs(a1) ** 2, abs(a2) ** 2
    phi = _relative_phase(a1, a2)
    det = cfg.detector(ctx.noise[segment])
    if method == "peak":
        trace = synthesize_beat_trace(I1, I2, phi, delta_nu, window, det, rng,
                                      label=label, decay_us=decay_us)
        if traces is not None:
            traces[label] = trace
        return extract_phase_peak(trace, cfg.min_prominence)
    currents = synthesize_three_detector(I1, I2, phi, det, rng)
    if traces is not None:
        traces[f"{label}_currents"] = currents
    return extract_phase_three_detector(*currents, ctx.calibration[segment])


def run_trial(cfg: ExperimentConfig, trial_index: int, ctx: Optional[_RunContext] = None,
              keep_traces: bool = False) -> TrialRecord:
    """Simulate and analyze one shot.

    Draw order on the trial stream: four write vacua (Stokes and spin of
    ensemble 1, then ensemble 2), four fresh read vacua (two for the read
    Stokes arms, two for the anti-Stokes arms, drawn whatever the retrieval
    mode), then detector noise for the write record and the read record(s).
    Extraction failures are recorded in ``flags``, never raised.
    """
    if ctx is None:
        ctx = _build_context(cfg)
    rng = trial_rng(cfg.master_seed, trial_index)
    v = gc.sample_vacuum(rng, 4)
    fresh = gc.sample_vacuum(rng, 4)

    writes = [gc.apply_two_mode_squeeze(v[0], v[1], cfg.squeeze(1)),
              gc.apply_two_mode_squeeze(v[2], v[3], cfg.squeeze(2))]
    stokes = tuple(complex(w.alpha_stokes) for w in writes)
    spin = tuple(complex(w.alpha_spin) for w in writes)
    rec = TrialRecord(trial_index, stokes, spin, traces={} if keep_traces else None)
    mode = cfg.retrieval_mode
    if mode in ("stokes", "both"):
        rec.stokes_read = tuple(complex(gc.apply_read_amplifier(fresh[k], spin[k], cfg.read(k + 1)))
                                for k in (0, 1))
    if mode in ("antistokes", "both"):
        rec.antistokes_read = tuple(complex(gc.apply_antistokes_readout(fresh[2 + k], spin[k], cfg.read(k + 1)))
                                    for k in (0, 1))

    timing = cfg.timing
    decay = None if math.isinf(cfg.read_decay_us) else cfg.read_decay_us
    methods = _read_methods(cfg)
    jobs = [("SW", stokes, "write", cfg.extraction_method, timing.write_window, cfg.delta_nu_write_mhz, None)]
    if rec.stokes_read is not None:
        jobs.append(("SR", rec.stokes_read, "read_stokes", methods["SR"], timing.read_window,
                     cfg.delta_nu_read_mhz, decay))
    if rec.antistokes_read is not None:
        jobs.append(("ASR", rec.antistokes_read, "read_antistokes", methods["ASR"], timing.read_window,
                     cfg.delta_nu_read_mhz, decay))

    for name, pair, segment, method, window, dnu, decay_us in jobs:
        label = "write" if name == "SW" else f"read_{name}"
        try:
            est = _measure(pair, segment, method, window, dnu, label, cfg, ctx, rng,
                           rec.traces, decay_us)
        except PhaseMemError as exc:
            rec.flags.append(f"{name}:{_error_tag(exc)}")
            continue
        setattr(rec, f"phi_{name}_deg", float(est.phi_deg))
        setattr(rec, f"quality_{name}", float(est.quality))
        rec.flags.extend(f"{name}:{f}" for f in est.flags)
    return rec


def _run_chunk(args) -> list[TrialRecord]:
    cfg, indices = args
    ctx = _build_context(cfg)
    return [run_trial(cfg, i, ctx) for i in indices]


# --------------------------------------------------------------------------
# analysis


@dataclass
class ExperimentReport:
    """Run summary.

    ``correlations`` maps a pair name (``SR_vs_SW``, ``ASR_vs_SW``) to a
    CorrelationReport, or to an error string when statistics could not be
    formed. ``cross`` and ``gamma`` hold one moment estimate per ensemble
    (as dicts with ``re``, ``im``, ``std_error``, ``n``) or an error string.
    """

    config: dict
    n_trials: int
    n_analyzed: int
    n_flagged: int
    correlations: dict
    cross: list
    gamma: list
    phase_sum_std_deg: list

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["correlations"] = {k: v.to_dict() if isinstance(v, CorrelationReport) else v
                             for k, v in self.correlations.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        d = dict(d)
        d["correlations"] = {k: CorrelationReport.from_dict(v) if isinstance(v, dict) else v
                             for k, v in d["correlations"].items()}
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))


def _moment_dict(m: gc.MomentEstimate) -> dict:
    v = complex(m.value)
    return {"re": v.real, "im": v.imag, "abs": abs(v), "std_error": m.std_error, "n": m.n}


def _pair_reports(rows: list[dict], folded: dict[str, bool], gamma_abs=None) -> dict:
    out = {}
    for name in ("SR", "ASR"):
        pairs = [(r["phi_SW_deg"], r[f"phi_{name}_deg"]) for r in rows
                 if r.get(f"phi_{name}_deg") is not None and r.get("phi_SW_deg") is not None]
        if not any(r.get(f"phi_{name}_deg") is not None for r in rows) and name not in folded:
            continue
        key = f"{name}_vs_SW"
        try:
            if not pairs:
                raise EmptyReportError("no trial yielded both phases")
            x, y = np.array(pairs, dtype=float).T
            out[key] = correlation_report(x, y, folded=folded.get(name, False), gamma_abs=gamma_abs)
        except PhaseMemError as exc:
            out[key] = f"{type(exc).__name__}: {exc}"
    return out


def _read_methods(cfg: ExperimentConfig) -> dict[str, str]:
    """Extraction method of each read phase; ``both`` pairs the beat-note
    method for the read Stokes with the three-detector one for anti-Stokes."""
    mode, method = cfg.retrieval_mode, cfg.extraction_method
    out = {}
    if mode in ("stokes", "both"):
        out["SR"] = "peak" if mode == "both" else method
    if mode in ("antistokes", "both"):
        out["ASR"] = "three-detector" if mode == "both" else method
    return out


def _folded_phases(cfg: ExperimentConfig) -> dict[str, bool]:
    """Whether each (read, write) pair involves an arccos-range phase."""
    sw = cfg.extraction_method == "three-detector"
    return {name: sw or m == "three-detector" for name, m in _read_methods(cfg).items()}


def _record_row(rec: TrialRecord) -> dict:
    return {"phi_SW_deg": rec.phi_SW_deg, "phi_SR_deg": rec.phi_SR_deg, "phi_ASR_deg": rec.phi_ASR_deg}


def analyze_records(records: list[TrialRecord], cfg: ExperimentConfig) -> ExperimentReport:
    """Phase-pair statistics over analyzed trials plus amplitude-level
    estimators (cross-correlation, gamma, phase-sum spread) over all trials."""
    analyzed = [r for r in records if r.analyzed]
    if not analyzed:
        raise EmptyReportError(f"all {len(records)} trials were flagged")

    cross, gamma, spread = [], [], []
    for k in (0, 1):
        s = np.array([r.stokes_write[k] for r in records])
        a = np.array([r.spin_write[k] for r in records])
        try:
            c, g = gc.estimate_correlations(gc.WriteOutcome(s, a))
            cross.append(_moment_dict(c))
            gamma.append(_moment_dict(g))
        except PhaseMemError as exc:
            cross.append(f"{type(exc).__name__}: {exc}")
            gamma.append(f"{type(exc).__name__}: {exc}")
        try:
            spread.append(phase_sum_concentration(gc.phase_of(a), gc.phase_of(s)))
        except PhaseMemError as exc:
            spread.append(f"{type(exc).__name__}: {exc}")

    gamma_abs = None
    if cfg.r1 == cfg.r2 and cfg.pump_phase1 == cfg.pump_phase2 and len(records) >= 2:
        s = np.array([r.stokes_write for r in records]).ravel()
        a = np.array([r.spin_write for r in records]).ravel()
        try:
            gamma_abs = abs(gc.estimate_correlations(gc.WriteOutcome(s, a))[1].value)
        except PhaseMemError:
            pass

    correlations = _pair_reports([_record_row(r) for r in analyzed], _folded_phases(cfg), gamma_abs)
    return ExperimentReport(config=cfg.to_dict(), n_trials=len(records), n_analyzed=len(analyzed),
                            n_flagged=len(records) - len(analyzed), correlations=correlations,
                            cross=cross, gamma=gamma, phase_sum_std_deg=spread)


def run_experiment(cfg: ExperimentConfig, workers: int = 1,
                   chunk_size: int = 500) -> tuple[list[TrialRecord], ExperimentReport]:
    """Run ``cfg.trials`` trials (optionally over a process pool) and analyze."""
    indices = list(range(cfg.trials))
    if workers <= 1 or cfg.trials <= chunk_size:
        ctx = _build_context(cfg)
        records = [run_trial(cfg, i, ctx) for i in indices]
    else:
        chunks = [(cfg, indices[i:i + chunk_size]) for i in range(0, len(indices), chunk_size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = [rec for chunk in pool.map(_run_chunk, chunks) for rec in chunk]
    records.sort(key=lambda r: r.trial_index)
    return records, analyze_records(records, cfg)


# --------------------------------------------------------------------------
# files


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def _trial_row(rec: TrialRecord) -> list[str]:
    q_read = rec.quality_SR if rec.quality_SR is not None else rec.quality_ASR
    return [str(rec.trial_index), _fmt(rec.phi_SW_deg), _fmt(rec.phi_SR_deg), _fmt(rec.phi_ASR_deg),
            _fmt(rec.quality_SW), _fmt(q_read), ";".join(rec.flags)]


def write_trials(records: list[TrialRecord], path) -> Path:
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIALS_HEADER)
    for rec in sorted(records, key=lambda r: r.trial_index):
        w.writerow(_trial_row(rec))
    _write_text(path, buf.getvalue())
    return path


def read_trials(path) -> list[dict]:
    """Rows of a trials file with phases as floats (None where empty)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != TRIALS_HEADER:
        raise ConfigError(f"{path}: unexpected trials header {reader.fieldnames}")
    rows = []
    for row in reader:
        parsed = {"trial": int(row["trial"]), "flags": [f for f in row["flags"].split(";") if f]}
        for key in TRIALS_HEADER[1:6]:
            parsed[key] = float(row[key]) if row[key] else None
        rows.append(parsed)
    return rows


def analyze_trial_rows(rows: list[dict], folded: Optional[dict[str, bool]] = None) -> dict:
    """Correlation reports from a parsed trials file.

    A phase column counts as required when any row fills it; as for a live
    run, only rows holding every required phase take part.
    """
    folded = folded or {}
    required = [k for k in TRIALS_HEADER[1:4] if any(r.get(k) is not None for r in rows)]
    usable = [r for r in rows if all(r.get(k) is not None for k in required)]
    if "phi_SW_deg" not in required or len(required) < 2 or not usable:
        raise EmptyReportError("no analyzable trial rows")
    return {k: v.to_dict() if isinstance(v, CorrelationReport) else v
            for k, v in _pair_reports(usable, folded).items()}


def _write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def write_trace(trace: BeatTrace, path) -> Path:
    """Write ``t_us,intensity`` rows plus a JSON sidecar (same stem, .json)."""
    path = Path(path)
    lines = ["t_us,intensity"]
    lines += [f"{t!r},{y!r}" for t, y in zip(trace.times.tolist(), trace.samples.tolist())]
    _write_text(path, "\n".join(lines) + "\n")
    meta = {"t0_us": trace.t0_us, "dt_us": trace.dt_us, "reference_time_us": trace.reference_time_us,
            "beat_freq_mhz": trace.beat_freq_mhz, "label": trace.label,
            "window_us": list(trace.window_us), "markers": trace.markers}
    _write_text(path.with_suffix(".json"), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_trace(path) -> BeatTrace:
    path = Path(path)
    try:
        meta = json.loads(path.with_suffix(".json").read_text())
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"{exc.filename or path}: {exc.strerror or exc}") from exc
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["t_us", "intensity"]:
        raise ConfigError(f"{path}: expected header t_us,intensity, got {header}")
    samples = [float(row[1]) for row in reader if row]
    return BeatTrace(t0_us=meta["t0_us"], dt_us=meta["dt_us"], samples=np.array(samples),
                     reference_time_us=meta["reference_time_us"], beat_freq_mhz=meta["beat_freq_mhz"],
                     label=meta.get("label", "write"), window_us=tuple(meta.get("window_us") or ()) or None,
                     markers=meta.get("markers", {}))


def _write_scatter(records: list[TrialRecord], name: str, path: Path) -> Optional[Path]:
    rows = [(r.phi_SW_deg, getattr(r, f"phi_{name}_deg")) for r in records
            if r.analyzed and getattr(r, f"phi_{name}_deg") is not None]
    if not rows and all(getattr(r, f"phi_{name}_deg") is None for r in records):
        return None
    text = f"phi_SW_deg,phi_{name}_deg\n" + "".join(f"{x!r},{y!r}\n" for x, y in rows)
    _write_text(path, text)
    return path


def emit_outputs(records: list[TrialRecord], report: ExperimentReport, out_dir,
                 cfg: Optional[ExperimentConfig] = None, trace_trials=(0,)) -> list[Path]:
    """Write trials.csv, report.json and the read-vs-write scatter files.

    When ``cfg`` is given, the trials in ``trace_trials`` are re-simulated to
    also write their detector traces and the composed write/read shot record.
    """
    out = Path(out_dir)
    paths = [write_trials(records, out / "trials.csv")]
    report_path = out / "report.json"
    _write_text(report_path, report.to_json())
    paths.append(report_path)
    for name in ("SR", "ASR"):
        p = _write_scatter(records, name, out / f"scatter_{name}.csv")
        if p is not None:
            paths.append(p)
    if cfg is not None:
        ctx = _build_context(cfg)
        for i in trace_trials:
            if i >= cfg.trials:
                continue
            rec = run_trial(cfg, i, ctx, keep_traces=True)
            for label, tr in rec.traces.items():
                if isinstance(tr, BeatTrace):
                    paths.append(write_trace(tr, out / f"trace_{label}_{i:04d}.csv"))
            write = rec.traces.get("write")
            read = rec.traces.get("read_SR", rec.traces.get("read_ASR"))
            if write is not None and read is not None:
                shot = compose_shot_trace(write, read, cfg.timing, fill=cfg.dark_level)
                paths.append(write_trace(shot, out / f"trace_shot_{i:04d}.csv"))
    return paths
