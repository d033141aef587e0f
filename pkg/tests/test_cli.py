import json
import subprocess
import sys

import pytest

from phasemem import harness, signal_model as sm
from phasemem.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_RUNTIME, main


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("r1 = 3\nr2 = 3\nretrieval_mode = both\ntrials = 40\n")
    return p


def _currents_file(path, rows):
    path.write_text("i1,i2,i3\n" + "".join(",".join(map(repr, r)) + "\n" for r in rows))
    return path


def test_simulate_then_report(tmp_path, cfg_file, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg_file), "--out", str(out), "--trials", "30"]) == EXIT_OK
    assert len((out / "trials.csv").read_text().splitlines()) == 31
    assert (out / "trace_shot_0000.csv").exists()
    capsys.readouterr()
    assert main(["report", "--in", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "trials: 30" in text
    assert "SR_vs_SW: slope +1" in text


def test_extract_peak_from_emitted_trace(tmp_path, cfg_file, capsys):
    out = tmp_path / "out"
    main(["simulate", "--config", str(cfg_file), "--out", str(out)])
    row = harness.read_trials(out / "trials.csv")[0]
    capsys.readouterr()
    assert main(["extract", "--trace", str(out / "trace_write_0000.csv"), "--method", "peak",
                 "--min-prominence", "3"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "phi_deg,period_us,quality"
    assert float(lines[1].split(",")[0]) == row["phi_SW_deg"]


def test_calibrate_and_extract_three_detector(tmp_path, capsys):
    det = sm.DetectorParams(eff1=0.5, eff2=0.5, eff3=0.25)
    b1 = _currents_file(tmp_path / "b1.csv", [sm.synthesize_three_detector(0, 1, 0, det)])
    b2 = _currents_file(tmp_path / "b2.csv", [sm.synthesize_three_detector(1, 0, 0, det)])
    cal = tmp_path / "cal.json"
    assert main(["calibrate", "--blocked", "1", "--in", str(b1), "--out", str(cal)]) == EXIT_OK
    assert main(["calibrate", "--blocked", "2", "--in", str(b2), "--out", str(cal)]) == EXIT_OK
    assert json.loads(cal.read_text()) == {"r13": 2.0, "r23": 2.0}

    shots = _currents_file(tmp_path / "s.csv", [sm.synthesize_three_detector(1, 1, phi, det)
                                                 for phi in (0, 90, 180)])
    capsys.readouterr()
    assert main(["extract", "--trace", str(shots), "--method", "three-detector",
                 "--cal", str(cal)]) == EXIT_OK
    phis = [float(line.split(",")[0]) for line in capsys.readouterr().out.splitlines()[1:]]
    assert phis == pytest.approx([0.0, 90.0, 180.0])


def test_extract_three_detector_inconsistent_row(tmp_path, capsys):
    cal = tmp_path / "cal.json"
    cal.write_text('{"r13": 1.0, "r23": 1.0}')
    shots = _currents_file(tmp_path / "s.csv", [(1.0, 1.0, 4.0), (1.0, 1.0, 9.0)])
    assert main(["extract", "--trace", str(shots), "--method", "three-detector",
                 "--cal", str(cal)]) == EXIT_RUNTIME
    assert capsys.readouterr().out.splitlines()[2] == ",,InconsistentCurrentsError"


def test_extract_three_detector_needs_full_calibration(tmp_path):
    cal = tmp_path / "cal.json"
    cal.write_text('{"r13": 1.0}')
    shots = _currents_file(tmp_path / "s.csv", [(1.0, 1.0, 4.0)])
    assert main(["extract", "--trace", str(shots), "--method", "three-detector",
                 "--cal", str(cal)]) == EXIT_CONFIG
    assert main(["extract", "--trace", str(shots), "--method", "three-detector"]) == EXIT_CONFIG


def test_analyze(tmp_path, cfg_file):
    out = tmp_path / "out"
    main(["simulate", "--config", str(cfg_file), "--out", str(out)])
    target = tmp_path / "corr.json"
    assert main(["analyze", "--trials", str(out / "trials.csv"), "--out", str(target),
                 "--folded", "ASR"]) == EXIT_OK
    result = json.loads(target.read_text())
    assert result["SR_vs_SW"]["best_slope"] == 1
    assert result["ASR_vs_SW"]["folded"] is True


def test_exit_codes(tmp_path, cfg_file):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == EXIT_IO
    flat = tmp_path / "flat.csv"
    flat.write_text("t_us,intensity\n" + "".join(f"{k * 0.01!r},1.0\n" for k in range(300)))
    flat.with_suffix(".json").write_text(json.dumps(
        {"t0_us": 0.0, "dt_us": 0.01, "reference_time_us": 0.0, "beat_freq_mhz": 1.0}))
    assert main(["extract", "--trace", str(flat), "--method", "peak"]) == EXIT_RUNTIME
    (tmp_path / "report.json").write_text("{not json")
    assert main(["report", "--in", str(tmp_path)]) == EXIT_CONFIG


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "phasemem", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
