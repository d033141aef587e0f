import csv
import json
import math

import numpy as np
import pytest

from phasemem import gaussian_core as gc
from phasemem import harness
from phasemem.errors import ConfigError, EmptyReportError
from phasemem.phase_extract import extract_phase_peak


def _circ_err(a, b):
    return (np.asarray(a, dtype=float) - np.asarray(b, dtype=float) + 180.0) % 360.0 - 180.0


def _rel_phase(pair):
    return math.degrees(math.atan2(pair[0].imag, pair[0].real) - math.atan2(pair[1].imag, pair[1].real))


# --------------------------------------------------------------------------
# configuration


def test_config_defaults():
    cfg = harness.ExperimentConfig()
    assert cfg.timing.write_window == (0.0, 3.0)
    assert cfg.read(2).G == 2.0
    assert cfg.squeeze(1).r == 2.0


def test_config_text_round_trip():
    cfg = harness.ExperimentConfig(r1=1.5, retrieval_mode="both", T2_us=5.0, trials=7)
    assert harness.parse_config(harness.format_config(cfg)) == cfg


def test_config_comments_and_overrides():
    text = "# demo\nr1 = 3   # strong\nr2=3\n\ntrials = 50\n"
    cfg = harness.parse_config(text, trials=10, master_seed=None)
    assert (cfg.r1, cfg.r2, cfg.trials, cfg.master_seed) == (3.0, 3.0, 10, 0)


@pytest.mark.parametrize("text", ["bogus = 1", "r1 = abc", "r1 3", "trials = 0",
                                  "retrieval_mode = sideways", "G = 0.5", "eff1 = 0"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        harness.parse_config(text)


def test_load_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("r1 = 1\nr2 = 1\n")
    assert harness.load_config(p).r1 == 1.0


# --------------------------------------------------------------------------
# single trials


def test_trial_streams_are_independent_and_reproducible():
    a = harness.trial_rng(5, 3).random(4)
    np.testing.assert_array_equal(a, harness.trial_rng(5, 3).random(4))
    assert not np.array_equal(a, harness.trial_rng(5, 4).random(4))
    assert not np.array_equal(a, harness.trial_rng(6, 3).random(4))


def test_run_trial_is_reproducible():
    cfg = harness.ExperimentConfig(trials=10)
    a, b = harness.run_trial(cfg, 4), harness.run_trial(cfg, 4)
    assert a.stokes_write == b.stokes_write
    assert a.phi_SW_deg == b.phi_SW_deg and a.phi_SR_deg == b.phi_SR_deg


def test_run_trial_amplitudes_follow_the_write_map():
    cfg = harness.ExperimentConfig(r1=1.2, r2=0.7, pump_phase2=30.0)
    rec = harness.run_trial(cfg, 0)
    v = gc.sample_vacuum(harness.trial_rng(cfg.master_seed, 0), 4)
    w1 = gc.apply_two_mode_squeeze(v[0], v[1], cfg.squeeze(1))
    w2 = gc.apply_two_mode_squeeze(v[2], v[3], cfg.squeeze(2))
    assert rec.stokes_write == (w1.alpha_stokes, w2.alpha_stokes)
    assert rec.spin_write == (w1.alpha_spin, w2.alpha_spin)


def test_noiseless_extraction_tracks_amplitude_chain():
    cfg = harness.ExperimentConfig(r1=3.0, r2=3.0, noise_rel=0.0, trials=500)
    records, report = harness.run_experiment(cfg)
    ok = 0
    for rec in records:
        if not rec.analyzed:
            continue
        # extracted beat phases are the negated relative phases
        e_sw = _circ_err(rec.phi_SW_deg, -_rel_phase(rec.stokes_write))
        e_sr = _circ_err(rec.phi_SR_deg, -_rel_phase(rec.stokes_read))
        ok += abs(e_sw) < 2 and abs(e_sr) < 2
    assert ok >= 0.99 * len(records)
    assert report.correlations["SR_vs_SW"].best_slope == 1


def test_read_phase_chain_at_amplitude_level():
    # without vacuum in the read arm the read Stokes relative phase is
    # (phi_R1 - phi_R2) minus the spin-wave relative phase
    cfg = harness.ExperimentConfig(r1=3.0, r2=3.0, phi_R1=40.0, phi_R2=10.0)
    for i in range(200):
        rec = harness.run_trial(cfg, i)
        s1, s2 = (gc.apply_read_amplifier(0j, a, cfg.read(k + 1)) for k, a in enumerate(rec.spin_write))
        diff = _circ_err(_rel_phase((s1, s2)), 30.0 - _rel_phase(rec.spin_write))
        assert abs(diff) < 1e-9


def test_vacuum_only_run_flags_most_trials():
    cfg = harness.ExperimentConfig(r1=0.0, r2=0.0, noise_rel=0.0, trials=300)
    records = [harness.run_trial(cfg, i) for i in range(cfg.trials)]
    flagged = [r for r in records if "SW:insufficient-fringes" in r.flags]
    assert len(flagged) > 0.5 * len(records)
    mean_write = np.mean([abs(a) ** 2 for r in records for a in r.stokes_write])
    assert mean_write == pytest.approx(0.5, rel=0.15)


def test_lossless_antistokes_chain_is_exact():
    cfg = harness.ExperimentConfig(r1=2.0, r2=2.0, retrieval_mode="antistokes", eta_as=1.0,
                                   phi_R1=25.0, phi_R2=5.0, noise_rel=0.0)
    for i in range(200):
        rec = harness.run_trial(cfg, i)
        diff = _circ_err(_rel_phase(rec.antistokes_read), 20.0 + _rel_phase(rec.spin_write))
        assert abs(diff) < 1e-6


def test_both_mode_uses_two_methods():
    cfg = harness.ExperimentConfig(r1=3.0, r2=3.0, retrieval_mode="both", trials=60)
    records, report = harness.run_experiment(cfg)
    rec = next(r for r in records if r.analyzed)
    assert rec.phi_SR_deg is not None and 0.0 <= rec.phi_ASR_deg <= 180.0
    assert not report.correlations["SR_vs_SW"].folded
    assert report.correlations["ASR_vs_SW"].folded


def test_three_detector_extraction_runs():
    cfg = harness.ExperimentConfig(r1=3.0, r2=3.0, extraction_method="three-detector",
                                   eff1=0.5, eff2=0.5, eff3=0.25, trials=400)
    records, report = harness.run_experiment(cfg)
    rep = report.correlations["SR_vs_SW"]
    assert rep.folded
    assert all(0.0 <= r.phi_SW_deg <= 180.0 for r in records if r.phi_SW_deg is not None)
    assert report.n_analyzed > 0.9 * cfg.trials


def test_phase_sum_spread_decreases_with_squeezing():
    spreads = []
    for r in (0.25, 0.5, 1.0, 2.0, 4.0):
        _, report = harness.run_experiment(harness.ExperimentConfig(r1=r, r2=r, trials=1000))
        spreads.append(report.phase_sum_std_deg[0])
    assert all(a > b for a, b in zip(spreads, spreads[1:]))


def test_single_trial_run_records_statistics_errors():
    records, report = harness.run_experiment(harness.ExperimentConfig(r1=3, r2=3, trials=1))
    assert len(records) == 1 and records[0].analyzed
    assert "InsufficientSamples" in report.correlations["SR_vs_SW"]
    assert all(isinstance(g, str) for g in report.gamma)


def test_all_flagged_run_raises():
    cfg = harness.ExperimentConfig(r1=0.0, r2=0.0, noise_rel=0.0, trials=3, min_prominence=1e6)
    records = [harness.run_trial(cfg, i) for i in range(3)]
    with pytest.raises(EmptyReportError):
        harness.analyze_records(records, cfg)


@pytest.mark.slow
def test_default_run_gamma_is_unity():
    _, report = harness.run_experiment(harness.ExperimentConfig(trials=200_000))
    for g in report.gamma:
        assert abs(g["abs"] - 1) < 0.01


# --------------------------------------------------------------------------
# outputs


@pytest.fixture(scope="module")
def small_run():
    cfg = harness.ExperimentConfig(r1=3.0, r2=3.0, retrieval_mode="both", trials=100)
    records, report = harness.run_experiment(cfg)
    return cfg, records, report


def test_emit_outputs(tmp_path, small_run):
    cfg, records, report = small_run
    paths = harness.emit_outputs(records, report, tmp_path, cfg=cfg, trace_trials=range(2))
    names = {p.name for p in paths}
    assert {"trials.csv", "report.json", "scatter_SR.csv", "scatter_ASR.csv",
            "trace_write_0000.csv", "trace_read_SR_0001.csv", "trace_shot_0000.csv"} <= names

    lines = (tmp_path / "trials.csv").read_text().splitlines()
    assert len(lines) == 101
    assert lines[0].split(",") == harness.TRIALS_HEADER

    parsed = harness.ExperimentReport.from_json((tmp_path / "report.json").read_text())
    assert parsed == report

    with open(tmp_path / "scatter_SR.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["phi_SW_deg", "phi_SR_deg"]
    first = next(r for r in records if r.analyzed)
    assert float(rows[1][0]) == first.phi_SW_deg


def test_trace_file_round_trip(tmp_path, small_run):
    cfg, records, _ = small_run
    rec = harness.run_trial(cfg, 0, keep_traces=True)
    path = harness.write_trace(rec.traces["write"], tmp_path / "w.csv")
    back = harness.read_trace(path)
    np.testing.assert_array_equal(back.samples, rec.traces["write"].samples)
    assert extract_phase_peak(back, cfg.min_prominence).phi_deg == records[0].phi_SW_deg


def test_shot_trace_markers(tmp_path, small_run):
    cfg, records, report = small_run
    harness.emit_outputs(records, report, tmp_path, cfg=cfg)
    meta = json.loads((tmp_path / "trace_shot_0000.json").read_text())
    assert meta["markers"] == {"A": 0.0, "B": pytest.approx(3.1)}
    assert meta["label"] == "shot"


def test_trials_file_reanalysis_matches(tmp_path, small_run):
    _, records, report = small_run
    harness.write_trials(records, tmp_path / "t.csv")
    rows = harness.read_trials(tmp_path / "t.csv")
    again = harness.analyze_trial_rows(rows, {"ASR": True})
    for key in ("SR_vs_SW", "ASR_vs_SW"):
        expected = report.correlations[key].to_dict()
        expected["gamma_abs"] = None
        assert again[key] == pytest.approx(expected)


def test_read_trials_rejects_bad_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError):
        harness.read_trials(p)


def test_missing_trials_file(tmp_path):
    with pytest.raises(OSError):
        harness.read_trials(tmp_path / "nope.csv")


def test_flag_accounting():
    cfg = harness.ExperimentConfig(r1=0.5, r2=0.5, trials=200)
    records, report = harness.run_experiment(cfg)
    assert report.n_flagged > 0
    assert report.n_flagged + report.n_analyzed == cfg.trials
    assert report.n_flagged == sum(1 for r in records if r.flags and not r.analyzed)


@pytest.mark.parametrize("seed", [1, 2])
def test_seed_isolation(seed):
    base = harness.ExperimentConfig(r1=3.0, r2=3.0, retrieval_mode="antistokes", trials=2000)
    records0, _ = harness.run_experiment(base.replace(trials=5))
    records, report = harness.run_experiment(base.replace(master_seed=seed))
    assert records[0].stokes_write != records0[0].stokes_write
    rep = report.correlations["ASR_vs_SW"]
    assert rep.best_slope == -1 and rep.residual_circ_std_deg < 12.0
    assert all(abs(g["abs"] - 1) < 0.05 for g in report.gamma)
