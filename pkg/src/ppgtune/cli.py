"""Command-line entry point.

Exit codes: 0 success, 2 invalid input, 3 runtime or numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .beats import detect_ecg_beats, detect_ppg_beats
from .config import Config, load_config
from .errors import InvalidInput, PpgTuneError, ValidationError
from .filters import Family, FilterSpec, bandpass
from .io import (
    load_manifest,
    load_recordings,
    read_any_signal,
    read_beats_csv,
    write_beats_csv,
    write_signal_csv,
    write_synth_dataset,
)
from .metrics import best_lag, match_beats, se_ppv_f1
from .optimize import Dataset, evaluate_cutoffs, front_ranks, grid_combinations
from .pipeline import CONDITION_NAMES, condition_stats, prepare_recording, run_pipeline
from .report import (
    SEGMENT_COLUMNS,
    STATS_COLUMNS,
    SUMMARY_COLUMNS,
    read_table,
    render_figures,
    summarize_by_task,
    write_table,
)
from .signals import Role, Signal, Window, tile_windows
from .synth import demo_cohort, synth_recording

log = logging.getLogger("ppgtune")

SYNTH_EPOCH_MS = 1_600_000_000_000


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="TOML run configuration")
    p.add_argument("--seed", type=int, default=d, help="random seed (overrides the config)")
    p.add_argument("--jobs", type=int, default=d, help="worker processes (overrides the config)")
    p.add_argument("--out-dir", default=d, help="output directory (default: current directory)")
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ppgtune", description="PPG band-pass cutoff optimization against ECG reference beats")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        _global_flags(sp, suppress=True)
        return sp

    s = cmd("synth", "generate a synthetic dataset with ground-truth beats")
    s.add_argument("--participants", type=int, default=6)
    s.add_argument("--tasks", default="rest,stress", help="comma-separated task names")
    s.add_argument("--duration", type=float, default=120.0, help="seconds per recording")
    s.add_argument("--ppg-fs", type=float, default=64.0)
    s.add_argument("--ecg-fs", type=float, default=250.0)
    s.add_argument("--acc-fs", type=float, default=32.0)
    s.add_argument("--generic", action="store_true", help="write PPG as generic CSV instead of the E4 layout")

    s = cmd("ingest", "load and validate a manifest, list its channels")
    s.add_argument("manifest")

    s = cmd("filter", "zero-phase band-pass one signal file")
    s.add_argument("input")
    s.add_argument("--low", type=float, default=0.5)
    s.add_argument("--high", type=float, default=4.0)
    s.add_argument("--family", choices=[f.value for f in Family], default=Family.CHEBYSHEV2.value)
    s.add_argument("--order", type=int, default=4)
    s.add_argument("--stopband-db", type=float, default=40.0)
    s.add_argument("--ripple-db", type=float, default=1.0)
    s.add_argument("--fs", type=float, help="sampling rate for generic CSV input")
    s.add_argument("--output", help="output CSV (default: <out-dir>/filtered.csv)")

    s = cmd("detect", "detect beats in a PPG or ECG file")
    s.add_argument("input")
    s.add_argument("--kind", choices=["ppg", "ecg"], default="ppg")
    s.add_argument("--fs", type=float, help="sampling rate for generic CSV input")
    s.add_argument("--low", type=float, help="band-pass low cutoff (default 0.5 for PPG, 1.0 for ECG)")
    s.add_argument("--high", type=float, help="band-pass high cutoff (default 4.0 for PPG, 15.0 for ECG)")
    s.add_argument("--no-filter", action="store_true", help="input is already band-passed")
    s.add_argument("--output", help="beats CSV (default: <out-dir>/beats.csv)")

    s = cmd("match", "score PPG beats against ECG beats per window")
    s.add_argument("ppg_beats")
    s.add_argument("ecg_beats")
    s.add_argument("--lag", default="auto", help="lag in ms added to PPG times, or 'auto'")
    s.add_argument("--output", help="segment CSV (default: <out-dir>/match.csv)")

    s = cmd("sweep", "evaluate the full cutoff grid on every recording")
    s.add_argument("manifest")

    s = cmd("optimize", "run the full pipeline and write all reports")
    s.add_argument("manifest")
    s.add_argument("--scopes", help="comma-separated subset of base,global,per_person_task")

    s = cmd("stats", "condition comparison from a distributions table")
    s.add_argument("table", help="CSV with columns task,participant,condition,mean_ibi_ms,rmssd_ms")

    s = cmd("report", "rebuild the summary table and figures of a run directory")
    s.add_argument("run_dir")
    return p


def _config(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.jobs is not None:
        kw["jobs"] = args.jobs
    return cfg.with_(**kw) if kw else cfg


def _out_dir(args) -> Path:
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _signal(path, fs, role) -> Signal:
    sig = read_any_signal(path, fs, role)
    if not isinstance(sig, Signal):
        raise InvalidInput(f"{path}: expected a single-channel file")
    return sig


def cmd_synth(args, cfg):
    tasks = tuple(t.strip() for t in args.tasks.split(",") if t.strip())
    if args.participants < 1 or not tasks:
        raise InvalidInput("need at least one participant and one task")
    recs = [
        synth_recording(c, p, t, args.ppg_fs, args.ecg_fs, args.acc_fs, SYNTH_EPOCH_MS)
        for p, t, c in demo_cohort(args.participants, tasks, args.duration, cfg.seed)
    ]
    manifest = write_synth_dataset(_out_dir(args), recs, generic=args.generic)
    print(manifest)


def cmd_ingest(args, cfg):
    loaded = load_recordings(load_manifest(args.manifest))
    rows = []
    for r in loaded:
        chans = [("ppg", r.ppg)] + ([("ecg", r.ecg)] if r.ecg is not None else [])
        chans += [(a.role.value.lower(), a) for a in (r.acc or ())]
        for name, s in chans:
            rows.append(dict(participant=r.participant, task=r.task, channel=name, fs=s.fs,
                             n_samples=len(s), duration_s=s.duration_ms / 1000.0, start_time_ms=s.start_time))
        if r.ecg_beats is not None:
            rows.append(dict(participant=r.participant, task=r.task, channel="ecg_beats", fs=math.nan,
                             n_samples=len(r.ecg_beats), duration_s=math.nan, start_time_ms=r.ecg_start_ms))
    cols = ("participant", "task", "channel", "fs", "n_samples", "duration_s", "start_time_ms")
    path = _out_dir(args) / "ingest.csv"
    write_table(path, cols, rows)
    print(f"{len(loaded)} recordings, {len(rows)} channels -> {path}")


def cmd_filter(args, cfg):
    sig = _signal(args.input, args.fs, Role.PPG)
    spec = FilterSpec(Family(args.family), args.order, args.low, args.high, args.stopband_db, args.ripple_db)
    out = Path(args.output) if args.output else _out_dir(args) / "filtered.csv"
    write_signal_csv(out, bandpass(sig, spec))
    print(out)


def cmd_detect(args, cfg):
    if args.kind == "ecg":
        sig = _signal(args.input, args.fs, Role.ECG)
        e = cfg.ecg
        if not args.no_filter:
            spec = e.spec()
            spec = replace(spec, f_low=args.low if args.low is not None else spec.f_low,
                           f_high=args.high if args.high is not None else spec.f_high)
            sig = bandpass(sig, spec)
        beats = detect_ecg_beats(sig, **e.detect_kwargs())
    else:
        sig = _signal(args.input, args.fs, Role.PPG)
        ev = cfg.evaluation
        if not args.no_filter:
            low = args.low if args.low is not None else cfg.base_f_low
            high = args.high if args.high is not None else cfg.base_f_high
            sig = bandpass(sig, FilterSpec(Family.CHEBYSHEV2, ev.ppg_order, low, high, ev.stopband_atten_db))
        beats = detect_ppg_beats(sig, ma_window_ms=ev.ma_window_ms, min_bpm=ev.min_bpm, max_bpm=ev.max_bpm,
                                 lookback_ms=ev.lookback_ms)
    out = Path(args.output) if args.output else _out_dir(args) / "beats.csv"
    write_beats_csv(out, beats)
    print(f"{len(beats)} beats -> {out}")


def cmd_match(args, cfg):
    from .metrics import window_metrics

    ppg = read_beats_csv(args.ppg_beats)
    ecg = read_beats_csv(args.ecg_beats)
    ev = cfg.evaluation
    if args.lag == "auto":
        lag = best_lag(ppg, ecg, ev.tolerance_ms, ev.lag_search_ms, ev.lag_step_ms)
    else:
        try:
            lag = int(args.lag)
        except ValueError:
            raise InvalidInput("--lag must be an integer or 'auto'") from None
    m = match_beats(ppg, ecg, ev.tolerance_ms, lag)
    se, ppv, f1 = se_ppv_f1(m)
    end = int(ecg.times_ms[-1]) + 1 if len(ecg) else 0
    windows = tile_windows(end, cfg.window_ms) or [Window(0, max(1, end))]
    segs = window_metrics(ppg, ecg, lag, windows, ev.tolerance_ms, ev.min_valid_beats, ev.ibi_min_ms,
                          ev.ibi_max_ms, ev.max_dev_frac)
    rows = [dict(scope="match", participant="", task="", window_start_ms=s.window.start_ms,
                 window_length_ms=s.window.length_ms, n_ecg=s.n_ecg, n_ppg=s.n_ppg, n_correct=s.n_correct,
                 se=s.se, ppv=s.ppv, f1=s.f1, mean_ibi_ms=s.mean_ibi_ms, rmssd_ms=s.rmssd_ms,
                 ref_mean_ibi_ms=s.ref_mean_ibi_ms, ref_rmssd_ms=s.ref_rmssd_ms, abs_err_ibi_ms=s.abs_err_ibi_ms,
                 abs_err_rmssd_ms=s.abs_err_rmssd_ms, motion_auc=s.motion_auc, valid=s.valid) for s in segs]
    out = Path(args.output) if args.output else _out_dir(args) / "match.csv"
    write_table(out, SEGMENT_COLUMNS, rows)
    print(f"lag {lag} ms  matched {m.n_correct}/{m.n_ecg} ECG, {m.n_ppg} PPG  Se {se:.2f}  PPV {ppv:.2f}  F1 {f1:.2f}")


def cmd_sweep(args, cfg):
    loaded = sorted(load_recordings(load_manifest(args.manifest)), key=lambda r: (r.participant, r.task))
    recs = [prepare_recording(r, cfg) for r in loaded]
    data = Dataset(recs, cfg.evaluation, cfg.grid.step)
    g = cfg.grid
    grid = grid_combinations((g.low_min, g.low_max), (g.high_min, g.high_max), g.step)
    data.precompute(grid, cfg.jobs)
    rows = []
    for i, r in enumerate(recs):
        for pair in grid:
            t = data.triple(i, pair)
            rows.append(_sweep_row(r.participant, r.task, pair, t))
    from .optimize import Level, OptimizationScope

    pooled = [evaluate_cutoffs(pair, OptimizationScope(Level.GLOBAL), data) for pair in grid]
    ranks = front_ranks(pooled) if pooled else []
    for pair, t, rank in zip(grid, pooled, ranks):
        rows.append({**_sweep_row("*", "*", pair, t), "pooled_rank": int(rank)})
    cols = ("participant", "task", "f_low", "f_high", "f1", "mae_ibi_ms", "mae_rmssd_ms", "feasible", "pooled_rank")
    path = _out_dir(args) / "sweep.csv"
    write_table(path, cols, rows)
    print(f"{len(grid)} cutoff pairs x {len(recs)} recordings -> {path}")


def _sweep_row(participant, task, pair, t):
    ok = t.feasible
    return dict(participant=participant, task=task, f_low=pair.f_low, f_high=pair.f_high,
                f1=t.f1 if ok else math.nan, mae_ibi_ms=t.mae_ibi if ok else math.nan,
                mae_rmssd_ms=t.mae_rmssd if ok else math.nan, feasible=ok)


def cmd_optimize(args, cfg):
    if args.scopes:
        cfg = cfg.with_(scopes=tuple(s.strip() for s in args.scopes.split(",") if s.strip()))
    report = run_pipeline(load_manifest(args.manifest), cfg)
    out = report.write(_out_dir(args))
    for r in summarize_by_task([{**d, "feasible": "true" if d["feasible"] else "false"} for d in report.report_dicts()]):
        if r["task"] == "all":
            print(f"{r['scope']:>16}  F1 {r['f1']:.2f}  MAE IBI {r['mae_ibi_ms']:.2f} ms  MAE RMSSD {r['mae_rmssd_ms']:.2f} ms")
    print(f"reports -> {out}")


def cmd_stats(args, cfg):
    rows = read_table(args.table)
    need = {"task", "participant", "condition", "mean_ibi_ms", "rmssd_ms"}
    if not rows or not need <= set(rows[0]):
        raise InvalidInput(f"{args.table}: need columns {', '.join(sorted(need))}")
    order = list(CONDITION_NAMES.values())
    names = sorted({r["condition"] for r in rows}, key=lambda c: (order.index(c) if c in order else len(order), c))
    out_rows = condition_stats(rows, names, cfg.stats.alpha, cfg.stats.cohens_d)
    path = _out_dir(args) / "stats.csv"
    write_table(path, STATS_COLUMNS, out_rows)
    print(f"{len(out_rows)} tests -> {path}")


def cmd_report(args, cfg):
    run = Path(args.run_dir)
    if not (run / "report.csv").exists():
        raise InvalidInput(f"{run}: no report.csv")
    out = Path(args.out_dir) if args.out_dir else run
    out.mkdir(parents=True, exist_ok=True)
    if out != run:
        for name in ("report.csv", "distributions.csv"):
            if (run / name).exists():
                (out / name).write_bytes((run / name).read_bytes())
    write_table(out / "summary_by_task.csv", SUMMARY_COLUMNS, summarize_by_task(read_table(run / "report.csv")))
    figs = render_figures(out)
    print(f"summary and {len(figs)} figures -> {out}")


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "filter": cmd_filter,
    "detect": cmd_detect,
    "match": cmd_match,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "stats": cmd_stats,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        cfg = _config(args)
        np.seterr(all="ignore")
        COMMANDS[args.command](args, cfg)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except PpgTuneError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        print(f"error: numerical failure: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
