"""End-to-end run: ECG reference beats, cutoff selection per scope, evaluation and reports."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .beats import detect_ecg_beats
from .config import Config, dumps_config
from .errors import InvalidInput, UndefinedMetric
from .filters import Family, FilterSpec, bandpass
from .io import DatasetManifest, LoadedRecording, load_recordings
from .metrics import motion_auc_windows, pearson_r, window_ibi_stats
from .optimize import (
    CutoffPair,
    Dataset,
    Level,
    ObjectiveTriple,
    OptimizationScope,
    Recording,
    evaluate_cutoffs,
    grid_combinations,
    nsga2,
    scalarized_scores,
    select_scalarized,
    select_with_injection,
)
from .report import (
    DISTRIBUTION_COLUMNS,
    FRONT_COLUMNS,
    MOTION_COLUMNS,
    REPORT_COLUMNS,
    SEGMENT_COLUMNS,
    STATS_COLUMNS,
    SUMMARY_COLUMNS,
    render_figures,
    summarize_by_task,
    write_json,
    write_table,
)
from .signals import Window
from .stats import compare_conditions

log = logging.getLogger("ppgtune")

CONDITION_NAMES = {"ecg": "ECG", "base": "F_base", "global": "F_global", "per_person_task": "F_pt"}


# ---------------------------------------------------------------------------
# preparation


def _windows(start_ms: int, end_ms: int, window_ms: int) -> list[Window]:
    n = max(0, (end_ms - start_ms) // window_ms)
    return [Window(start_ms + k * window_ms, window_ms) for k in range(n)]


def prepare_recording(rec: LoadedRecording, cfg: Config) -> Recording:
    """ECG beats, analysis windows and motion per window, all on the ECG time axis."""
    if rec.ecg is not None:
        e = cfg.ecg
        filtered = bandpass(rec.ecg, e.spec())
        beats = detect_ecg_beats(filtered, **e.detect_kwargs())
        ecg_end = int(math.floor(rec.ecg.duration_ms))
    else:
        beats = rec.ecg_beats
        ecg_end = int(beats.times_ms[-1]) + 1 if len(beats) else 0
    offset = int(rec.ppg.start_time - rec.ecg_start_ms)
    start = max(0, offset)
    end = min(ecg_end, offset + int(math.floor(rec.ppg.duration_ms)))
    windows = _windows(start, end, cfg.window_ms)
    motion = None
    if rec.acc is not None and cfg.motion.enabled and windows:
        m = cfg.motion
        spec = FilterSpec(Family.BUTTERWORTH, m.order, m.f_low, m.f_high)
        motion = motion_auc_windows(rec.acc, windows, spec, rec.acc[0].start_time - rec.ecg_start_ms, m.resample_hz)
    return Recording(rec.participant, rec.task, rec.ppg, beats, windows, offset, motion)


# ---------------------------------------------------------------------------
# persistent cache of objective triples


def recording_fingerprint(rec: Recording, cfg: Config) -> str:
    h = hashlib.sha256()
    h.update(__version__.encode())
    h.update(np.ascontiguousarray(rec.ppg.samples).tobytes())
    h.update(repr((rec.ppg.fs, rec.ppg.start_time, rec.ppg_offset_ms, cfg.grid.step)).encode())
    h.update(np.ascontiguousarray(rec.ecg_beats.times_ms).tobytes())
    h.update(repr([(w.start_ms, w.length_ms) for w in rec.windows]).encode())
    h.update(repr(cfg.evaluation).encode())
    return h.hexdigest()


class TripleCache:
    """One JSON file per recording fingerprint under ``root``."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, fp):
        return self.root / f"{fp}.json"

    def load(self, fp) -> dict:
        p = self._path(fp)
        if not p.exists():
            return {}
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
            return {
                tuple(int(v) for v in k.split(",")): ObjectiveTriple(t[0], t[1], t[2], bool(t[3]))
                for k, t in doc["triples"].items()
            }
        except (ValueError, KeyError, IndexError, TypeError):
            log.warning("ignoring unreadable cache file %s", p)
            return {}

    def save(self, fp, triples: dict):
        doc = {"triples": {f"{k[0]},{k[1]}": [t.neg_f1, t.mae_ibi, t.mae_rmssd, t.feasible] for k, t in sorted(triples.items())}}
        tmp = self._path(fp).with_suffix(".tmp")
        tmp.write_text(json.dumps(doc), encoding="utf-8")
        tmp.replace(self._path(fp))


# ---------------------------------------------------------------------------
# run


@dataclass(frozen=True)
class ReportRow:
    scope: str
    participant: str
    task: str
    f_low: float
    f_high: float
    f1: float
    mae_ibi_ms: float
    mae_rmssd_ms: float
    feasible: bool
    lag_ms: int
    n_windows: int
    n_valid_windows: int
    score: float = math.nan
    global_score: float = math.nan


@dataclass
class RunReport:
    rows: list[ReportRow] = field(default_factory=list)
    segments: list[dict] = field(default_factory=list)
    fronts: list[dict] = field(default_factory=list)
    distributions: list[dict] = field(default_factory=list)
    stats: list[dict] = field(default_factory=list)
    motion: list[dict] = field(default_factory=list)
    global_pair: CutoffPair | None = None
    config: Config = field(default_factory=Config)

    def rows_for(self, scope: str) -> list[ReportRow]:
        return [r for r in self.rows if r.scope == scope]

    def report_dicts(self) -> list[dict]:
        return [{c: getattr(r, c) for c in REPORT_COLUMNS} for r in self.rows]

    def summary(self) -> dict:
        by_task = summarize_by_task([{**d, "feasible": "true" if d["feasible"] else "false"} for d in self.report_dicts()])
        return {
            "version": __version__,
            "seed": self.config.seed,
            "scopes": list(self.config.scopes),
            "n_recordings": len({(r.participant, r.task) for r in self.rows}),
            "global_pair": None if self.global_pair is None else [self.global_pair.f_low, self.global_pair.f_high],
            "by_task": by_task,
            "motion_correlations": self.motion,
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_table(out / "report.csv", REPORT_COLUMNS, self.report_dicts())
        write_table(out / "segments.csv", SEGMENT_COLUMNS, self.segments)
        write_table(out / "fronts.csv", FRONT_COLUMNS, self.fronts)
        write_table(out / "distributions.csv", DISTRIBUTION_COLUMNS, self.distributions)
        write_table(out / "stats.csv", STATS_COLUMNS, self.stats)
        write_table(out / "motion.csv", MOTION_COLUMNS, self.motion)
        summary = self.summary()
        write_table(out / "summary_by_task.csv", SUMMARY_COLUMNS, summary["by_task"])
        write_json(out / "summary.json", summary)
        (out / "config_used.toml").write_text(dumps_config(self.config), encoding="utf-8")
        render_figures(out)
        return out


def _slice_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([int(seed), 1, k]).generate_state(1)[0])


def _row(scope, rec: Recording, pair: CutoffPair, res, score=math.nan, global_score=math.nan) -> ReportRow:
    t = res.triple
    n_valid = sum(1 for s in res.segments if s.valid)
    return ReportRow(
        scope, rec.participant, rec.task, pair.f_low, pair.f_high,
        t.f1 if t.feasible else math.nan,
        t.mae_ibi if t.feasible else math.nan,
        t.mae_rmssd if t.feasible else math.nan,
        t.feasible, res.lag_ms, len(rec.windows), n_valid, score, global_score,
    )


def _segment_dicts(scope, rec: Recording, res) -> list[dict]:
    out = []
    for s in res.segments:
        out.append(dict(
            scope=scope, participant=rec.participant, task=rec.task,
            window_start_ms=s.window.start_ms, window_length_ms=s.window.length_ms,
            n_ecg=s.n_ecg, n_ppg=s.n_ppg, n_correct=s.n_correct, se=s.se, ppv=s.ppv, f1=s.f1,
            mean_ibi_ms=s.mean_ibi_ms, rmssd_ms=s.rmssd_ms, ref_mean_ibi_ms=s.ref_mean_ibi_ms,
            ref_rmssd_ms=s.ref_rmssd_ms, abs_err_ibi_ms=s.abs_err_ibi_ms, abs_err_rmssd_ms=s.abs_err_rmssd_ms,
            motion_auc=s.motion_auc, valid=s.valid,
        ))
    return out


def _front_dicts(scope, participant, task, front, chosen: CutoffPair) -> list[dict]:
    return [
        dict(scope=scope, participant=participant, task=task, f_low=p.f_low, f_high=p.f_high,
             f1=t.f1, mae_ibi_ms=t.mae_ibi, mae_rmssd_ms=t.mae_rmssd, selected=p.key() == chosen.key())
        for p, t in front
    ]


def run_pipeline(manifest, cfg: Config = Config(), jobs: int | None = None) -> RunReport:
    """Runs every configured scope over the manifest's recordings.

    ``manifest`` is a ``DatasetManifest`` or an already loaded list of
    ``LoadedRecording``. ``jobs`` overrides ``cfg.jobs``.
    """
    loaded = load_recordings(manifest) if isinstance(manifest, DatasetManifest) else list(manifest)
    seen = set()
    for r in loaded:
        if (r.participant, r.task) in seen:
            raise InvalidInput(f"duplicate recording {r.participant}/{r.task}")
        seen.add((r.participant, r.task))
    loaded.sort(key=lambda r: (r.participant, r.task))
    jobs = cfg.jobs if jobs is None else jobs
    report = RunReport(config=cfg)
    if not loaded:
        return report

    recs = [prepare_recording(r, cfg) for r in loaded]
    data = Dataset(recs, cfg.evaluation, cfg.grid.step)
    cache = TripleCache(cfg.cache_dir) if cfg.cache_dir else None
    fingerprints = [recording_fingerprint(r, cfg) for r in recs] if cache else []
    for i, fp in enumerate(fingerprints):
        for k, t in cache.load(fp).items():
            data.seed_triple(i, k, t)

    g = cfg.grid
    bounds = ((g.low_min, g.low_max), (g.high_min, g.high_max))
    optimizing = any(s != "base" for s in cfg.scopes)
    if optimizing and jobs > 1:
        data.precompute(grid_combinations(bounds[0], bounds[1], g.step), jobs)

    base_pair = CutoffPair(cfg.base_f_low, cfg.base_f_high)
    for i, rec in enumerate(recs):
        res = data.result(i, base_pair)
        report.rows.append(_row("base", rec, base_pair, res))
        report.segments.extend(_segment_dicts("base", rec, res))
    log.info("base scope done (%d recordings)", len(recs))

    global_pair = None
    if "global" in cfg.scopes:
        p = cfg.nsga_for("global")
        scope = OptimizationScope(Level.GLOBAL)
        front = nsga2(lambda c: evaluate_cutoffs(c, scope, data), bounds, p.pop_size, p.generations, cfg.seed,
                      p.eta_c, p.p_c, p.eta_m, p.p_m, g.step)
        global_pair, _ = select_scalarized(front)
        report.global_pair = global_pair
        report.fronts.extend(_front_dicts("global", "", "", front, global_pair))
        for i, rec in enumerate(recs):
            res = data.result(i, global_pair)
            report.rows.append(_row("global", rec, global_pair, res))
            report.segments.extend(_segment_dicts("global", rec, res))
        log.info("global scope done: %s", global_pair)

    if "per_person_task" in cfg.scopes:
        p = cfg.nsga_for("per_person_task")
        for k, rec in enumerate(recs):
            scope = OptimizationScope(Level.PER_PERSON_TASK, rec.participant, rec.task)
            front = nsga2(lambda c: evaluate_cutoffs(c, scope, data), bounds, p.pop_size, p.generations,
                          _slice_seed(cfg.seed, k), p.eta_c, p.p_c, p.eta_m, p.p_m, g.step)
            if global_pair is not None:
                injected = (global_pair, evaluate_cutoffs(global_pair, scope, data))
                (pair, _), score, g_score = select_with_injection(front, injected)
            else:
                pair, _ = select_scalarized(front)
                score = float(scalarized_scores([t for c, t in front if c.key() == pair.key()], [t for _, t in front])[0])
                g_score = math.nan
            res = data.result(k, pair)
            report.rows.append(_row("per_person_task", rec, pair, res, score, g_score))
            report.segments.extend(_segment_dicts("per_person_task", rec, res))
            report.fronts.extend(_front_dicts("per_person_task", rec.participant, rec.task, front, pair))
        log.info("per-person/task scope done")

    if cache:
        for i, fp in enumerate(fingerprints):
            cache.save(fp, data.triples_for(i))

    report.distributions = _distributions(recs, report, cfg)
    names = [CONDITION_NAMES["ecg"]] + [CONDITION_NAMES[s] for s in cfg.scopes]
    report.stats = condition_stats(report.distributions, names, cfg.stats.alpha, cfg.stats.cohens_d)
    report.motion = _motion_rows(report.segments)
    return report


# ---------------------------------------------------------------------------
# condition comparison


def _nanmean(values) -> float:
    v = [x for x in values if not math.isnan(x)]
    return float(np.mean(v)) if v else math.nan


def _distributions(recs, report: RunReport, cfg: Config) -> list[dict]:
    """Per-participant mean IBI and RMSSD per condition (ECG reference and each scope)."""
    ev = cfg.evaluation
    out = []
    segs: dict = {}
    for s in report.segments:
        segs.setdefault((s["scope"], s["participant"], s["task"]), []).append(s)
    for rec in recs:
        ref = window_ibi_stats(rec.ecg_beats, rec.windows, ev.min_valid_beats, ev.ibi_min_ms, ev.ibi_max_ms, ev.max_dev_frac)
        out.append(dict(
            task=rec.task, participant=rec.participant, condition=CONDITION_NAMES["ecg"],
            mean_ibi_ms=_nanmean([a for a, _ in ref]), rmssd_ms=_nanmean([b for _, b in ref]),
        ))
        for scope in cfg.scopes:
            rows = [s for s in segs.get((scope, rec.participant, rec.task), []) if s["valid"]]
            out.append(dict(
                task=rec.task, participant=rec.participant, condition=CONDITION_NAMES[scope],
                mean_ibi_ms=_nanmean([s["mean_ibi_ms"] for s in rows]),
                rmssd_ms=_nanmean([s["rmssd_ms"] for s in rows]),
            ))
    out.sort(key=lambda d: (d["task"], d["participant"]))
    return out


def condition_stats(dist: list[dict], names, alpha: float = 0.05, d_variant: str = "paired") -> list[dict]:
    """RM-ANOVA and Bonferroni-corrected paired t-tests per task and metric.

    ``dist`` rows follow the distributions table layout; ``names`` orders
    the conditions. Tasks with fewer than two participants are skipped.
    """
    out = []
    for task in sorted({d["task"] for d in dist}):
        rows = [d for d in dist if d["task"] == task]
        participants = sorted({d["participant"] for d in rows})
        if len(participants) < 2:
            continue
        for metric in ("mean_ibi_ms", "rmssd_ms"):
            lookup = {(d["participant"], d["condition"]): float(d[metric]) for d in rows}
            matrix = [[lookup.get((p, c), math.nan) for c in names] for p in participants]
            anova, tests, n = compare_conditions(names, matrix, d_variant)
            if anova is not None:
                out.append(dict(
                    task=task, metric=metric, test="rm_anova", a="all", b="", statistic=anova.f_stat,
                    df1=anova.df_treatment, df2=anova.df_error, p=anova.p_value, n=n,
                    significant=anova.p_value < alpha,
                ))
            for t in tests:
                out.append(dict(
                    task=task, metric=metric, test="paired_t", a=t.a, b=t.b, statistic=t.t, df1=n - 1,
                    p=t.p, p_bonferroni=t.p_bonferroni, cohens_d=t.cohens_d, n=n,
                    significant=(not math.isnan(t.p_bonferroni)) and t.p_bonferroni < alpha,
                ))
    return out


def _motion_rows(segments: list[dict]) -> list[dict]:
    """Pearson r between window motion AUC and each accuracy metric over valid windows."""
    out = []
    keys = sorted({(s["scope"], s["task"]) for s in segments}, key=lambda k: (list(CONDITION_NAMES).index(k[0]), k[1]))
    for scope, task in keys:
        rows = [s for s in segments if s["scope"] == scope and s["task"] == task and s["valid"]
                and not math.isnan(s["motion_auc"])]
        for metric in ("f1", "abs_err_ibi_ms", "abs_err_rmssd_ms"):
            x = [s["motion_auc"] for s in rows]
            y = [s[metric] for s in rows]
            try:
                r = pearson_r(x, y)
            except (UndefinedMetric, InvalidInput):
                r = math.nan
            out.append(dict(scope=scope, task=task, metric=metric, n=len(rows), r=r))
    return out
