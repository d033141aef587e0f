"""Command-line entry point.

Exit codes: 0 success, 1 config error, 2 runtime/statistics error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .errors import ConfigError, PhaseMemError
from .phase_extract import (
    EfficiencyRatios,
    calibrate_efficiencies,
    extract_phase_peak,
    extract_phase_three_detector,
)

log = logging.getLogger("phasemem")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3


def _read_currents(path) -> np.ndarray:
    """Rows of an ``i1,i2,i3`` currents file as an (n, 3) array."""
    text = Path(path).read_text()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["i1", "i2", "i3"]:
        raise ConfigError(f"{path}: expected header i1,i2,i3, got {header}")
    try:
        rows = [[float(v) for v in row] for row in reader if row]
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not rows or any(len(r) != 3 for r in rows):
        raise ConfigError(f"{path}: need one or more rows of three currents")
    return np.array(rows)


def _load_cal(path) -> EfficiencyRatios:
    data = json.loads(Path(path).read_text())
    try:
        return EfficiencyRatios(float(data["r13"]), float(data["r23"]))
    except KeyError as exc:
        raise ConfigError(f"{path}: calibration is missing {exc.args[0]} "
                          "(run calibrate with both --blocked 1 and --blocked 2)") from None


def cmd_simulate(args) -> int:
    cfg = harness.load_config(args.config, trials=args.trials, master_seed=args.seed)
    log.info("running %d trials (seed %d, %d workers)", cfg.trials, cfg.master_seed, args.workers)
    records, report = harness.run_experiment(cfg, workers=args.workers)
    paths = harness.emit_outputs(records, report, args.out, cfg=cfg, trace_trials=range(args.traces))
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_extract(args) -> int:
    if args.method == "peak":
        trace = harness.read_trace(args.trace)
        est = extract_phase_peak(trace, args.min_prominence)
        print("phi_deg,period_us,quality")
        print(f"{est.phi_deg!r},{est.period_us!r},{est.quality!r}")
        return EXIT_OK
    if args.cal is None:
        raise ConfigError("--cal is required for the three-detector method")
    cal = _load_cal(args.cal)
    print("phi_deg,quality,flags")
    status = EXIT_OK
    for i1, i2, i3 in _read_currents(args.trace):
        try:
            est = extract_phase_three_detector(i1, i2, i3, cal)
        except PhaseMemError as exc:
            print(f",,{type(exc).__name__}")
            status = EXIT_RUNTIME
            continue
        print(f"{est.phi_deg!r},{est.quality!r},{';'.join(est.flags)}")
    return status


def cmd_calibrate(args) -> int:
    currents = _read_currents(args.input)
    out = Path(args.out)
    existing = json.loads(out.read_text()) if out.exists() else {}
    # calibrate_efficiencies needs both records; feed the unused side a dummy
    # positive triple and keep only the ratio this record determines
    dummy = np.ones(3)
    if args.blocked == 2:
        existing["r13"] = calibrate_efficiencies(dummy, currents).r13
    else:
        existing["r23"] = calibrate_efficiencies(currents, dummy).r23
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(existing, indent=2, sort_keys=True) + "\n")
    print(out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    rows = harness.read_trials(args.trials)
    folded = {name: True for name in args.folded}
    reports = harness.analyze_trial_rows(rows, folded)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(reports, indent=2, sort_keys=True) + "\n")
    print(out)
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.input) / "report.json"
    report = harness.ExperimentReport.from_json(path.read_text())
    print(f"trials: {report.n_trials} (analyzed {report.n_analyzed}, flagged {report.n_flagged})")
    for k, g in enumerate(report.gamma, 1):
        if isinstance(g, dict):
            print(f"ensemble {k}: |gamma| = {g['abs']:.4f} +/- {g['std_error']:.4f}")
        else:
            print(f"ensemble {k}: gamma unavailable ({g})")
    for k, s in enumerate(report.phase_sum_std_deg, 1):
        if isinstance(s, float):
            print(f"ensemble {k}: circular std of stokes+spin phase = {s:.3f} deg")
    for name, c in report.correlations.items():
        if isinstance(c, str):
            print(f"{name}: {c}")
            continue
        print(f"{name}: slope {c.best_slope:+d}, residual std {c.residual_circ_std_deg:.2f} deg, "
              f"offset {c.mean_offset_deg:.2f} deg, circ corr {c.circ_corr:.4f}, n={c.n}"
              + (" (folded)" if c.folded else ""))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phasemem", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a seeded experiment and write outputs")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--traces", type=int, default=1, help="number of trials whose traces are written")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("extract", help="extract phases from a trace or currents file")
    e.add_argument("--trace", required=True)
    e.add_argument("--method", choices=harness.EXTRACTION_METHODS, required=True)
    e.add_argument("--cal")
    e.add_argument("--min-prominence", type=float, default=0.0)
    e.set_defaults(func=cmd_extract)

    c = sub.add_parser("calibrate", help="efficiency ratio from a blocked-arm currents file")
    c.add_argument("--blocked", type=int, choices=(1, 2), required=True)
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_calibrate)

    a = sub.add_parser("analyze", help="correlation reports from a trials file")
    a.add_argument("--trials", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--folded", action="append", default=[], choices=("SR", "ASR"),
                   help="treat this read phase pair as arccos-range (repeatable)")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("report", help="print the summary of a simulate output directory")
    r.add_argument("--in", dest="input", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"config error: malformed input ({exc})", file=sys.stderr)
        return EXIT_CONFIG
    except PhaseMemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
