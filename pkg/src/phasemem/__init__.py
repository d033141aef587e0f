"""Phase-space simulation of Raman phase memory in two atomic ensembles."""
from .errors import PhaseMemError
from .gaussian_core import (
    MomentEstimate,
    ReadParams,
    SqueezeParams,
    WriteOutcome,
    apply_antistokes_readout,
    apply_read_amplifier,
    apply_two_mode_squeeze,
    estimate_correlations,
    phase_of,
    read_coherence,
    sample_vacuum,
)
from .harness import ExperimentConfig, ExperimentReport, TrialRecord, run_experiment, run_trial
from .phase_extract import (
    EfficiencyRatios,
    PhaseEstimate,
    calibrate_efficiencies,
    extract_phase_peak,
    extract_phase_three_detector,
    find_peaks,
)
from .signal_model import (
    BeatTrace,
    DetectorParams,
    PulseTiming,
    compose_shot_trace,
    synthesize_beat_trace,
    synthesize_three_detector,
)
from .stats import (
    CorrelationReport,
    circular_correlation,
    circular_mean_std,
    fit_slope_pm1,
    phase_sum_concentration,
)

__version__ = "0.1.0"
