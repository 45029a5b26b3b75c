"""Report tables (CSV with fixed column order), JSON summary and small SVG plots.

All numbers are written with six decimals so repeated runs produce
byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import fields
from pathlib import Path

import numpy as np

REPORT_COLUMNS = (
    "scope", "participant", "task", "f_low", "f_high", "f1", "mae_ibi_ms", "mae_rmssd_ms",
    "feasible", "lag_ms", "n_windows", "n_valid_windows", "score", "global_score",
)
SEGMENT_COLUMNS = (
    "scope", "participant", "task", "window_start_ms", "window_length_ms", "n_ecg", "n_ppg", "n_correct",
    "se", "ppv", "f1", "mean_ibi_ms", "rmssd_ms", "ref_mean_ibi_ms", "ref_rmssd_ms",
    "abs_err_ibi_ms", "abs_err_rmssd_ms", "motion_auc", "valid",
)
SUMMARY_COLUMNS = ("scope", "task", "n_recordings", "n_feasible", "f1", "mae_ibi_ms", "mae_rmssd_ms")
DISTRIBUTION_COLUMNS = ("task", "participant", "condition", "mean_ibi_ms", "rmssd_ms")
STATS_COLUMNS = (
    "task", "metric", "test", "a", "b", "statistic", "df1", "df2", "p", "p_bonferroni", "cohens_d", "n", "significant",
)
FRONT_COLUMNS = ("scope", "participant", "task", "f_low", "f_high", "f1", "mae_ibi_ms", "mae_rmssd_ms", "selected")
MOTION_COLUMNS = ("scope", "task", "metric", "n", "r")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        s = f"{v:.6f}"
        return "0.000000" if s == "-0.000000" else s
    return str(v)


def write_table(path, columns, rows):
    """Writes dict rows in ``columns`` order; unknown keys are an error."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            extra = set(r) - set(columns)
            if extra:
                raise KeyError(f"unexpected columns {sorted(extra)}")
            w.writerow([fmt(r.get(c)) for c in columns])


def read_table(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _float(s) -> float:
    try:
        return float(s)
    except (TypeError, ValueError):
        return math.nan


def summarize_by_task(report_rows) -> list[dict]:
    """Per (scope, task) means over feasible recordings, plus an ``all`` row per scope."""
    groups: dict = {}
    for r in report_rows:
        for task in (r["task"], "all"):
            groups.setdefault((r["scope"], task), []).append(r)
    scopes = list(dict.fromkeys(r["scope"] for r in report_rows))
    tasks = sorted({r["task"] for r in report_rows}) + ["all"]
    out = []
    for scope in scopes:
        for task in tasks:
            rows = groups.get((scope, task))
            if not rows:
                continue
            ok = [r for r in rows if str(r["feasible"]) in ("true", "True")]

            def mean(col):
                return float(np.mean([_float(r[col]) for r in ok])) if ok else math.nan

            out.append(dict(
                scope=scope, task=task, n_recordings=len(rows), n_feasible=len(ok),
                f1=mean("f1"), mae_ibi_ms=mean("mae_ibi_ms"), mae_rmssd_ms=mean("mae_rmssd_ms"),
            ))
    return out


# ---------------------------------------------------------------------------
# SVG

_W, _H, _PAD = 640, 360, 50
_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def _esc(s) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _scale(lo, hi, a, b):
    if hi <= lo:
        hi = lo + 1.0
    return lambda v: a + (v - lo) / (hi - lo) * (b - a)


def _frame(title, ylabel, lo, hi):
    y = _scale(lo, hi, _H - _PAD, _PAD)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD / 2:.1f}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="14" y="{_H / 2:.1f}" transform="rotate(-90 14 {_H / 2:.1f})" text-anchor="middle">{_esc(ylabel)}</text>',
    ]
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        parts.append(f'<text x="{_PAD - 4}" y="{y(v) + 4:.1f}" text-anchor="end">{v:.1f}</text>')
    return parts, y


def _bounds(values):
    v = [x for x in values if not math.isnan(x)]
    if not v:
        return 0.0, 1.0
    lo, hi = min(v), max(v)
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    return lo - pad, hi + pad


def svg_boxplot(groups: dict, title: str, ylabel: str) -> str:
    """``groups`` maps a label to its values; one box (quartiles, 1.5 IQR whiskers) per label."""
    labels = list(groups)
    lo, hi = _bounds([x for v in groups.values() for x in v])
    parts, y = _frame(title, ylabel, lo, hi)
    n = max(1, len(labels))
    step = (_W - 1.5 * _PAD) / n
    for k, label in enumerate(labels):
        vals = np.array([x for x in groups[label] if not math.isnan(x)], dtype=float)
        cx = _PAD + step * (k + 0.5)
        parts.append(f'<text x="{cx:.1f}" y="{_H - _PAD + 14}" text-anchor="middle">{_esc(label)}</text>')
        if vals.size == 0:
            continue
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        iqr = q3 - q1
        lo_w = vals[vals >= q1 - 1.5 * iqr].min()
        hi_w = vals[vals <= q3 + 1.5 * iqr].max()
        half = min(20.0, step * 0.3)
        color = _COLORS[k % len(_COLORS)]
        parts.append(f'<line x1="{cx:.1f}" y1="{y(lo_w):.1f}" x2="{cx:.1f}" y2="{y(hi_w):.1f}" stroke="black"/>')
        parts.append(
            f'<rect x="{cx - half:.1f}" y="{y(q3):.1f}" width="{2 * half:.1f}" height="{max(0.5, y(q1) - y(q3)):.1f}" '
            f'fill="{color}" fill-opacity="0.5" stroke="black"/>'
        )
        parts.append(f'<line x1="{cx - half:.1f}" y1="{y(med):.1f}" x2="{cx + half:.1f}" y2="{y(med):.1f}" stroke="black" stroke-width="2"/>')
        for v in vals[(vals < lo_w) | (vals > hi_w)]:
            parts.append(f'<circle cx="{cx:.1f}" cy="{y(v):.1f}" r="2.5" fill="none" stroke="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_lines(series: dict, xlabels, title: str, ylabel: str) -> str:
    """``series`` maps a name to values aligned with ``xlabels``."""
    lo, hi = _bounds([x for v in series.values() for x in v])
    parts, y = _frame(title, ylabel, lo, hi)
    n = len(xlabels)
    x = _scale(0, max(1, n - 1), _PAD + 20, _W - _PAD)
    for i, lab in enumerate(xlabels):
        parts.append(f'<text x="{x(i):.1f}" y="{_H - _PAD + 14}" text-anchor="middle">{_esc(lab)}</text>')
    for k, (name, vals) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        pts = [(x(i), y(v)) for i, v in enumerate(vals) if not math.isnan(v)]
        if len(pts) > 1:
            d = " ".join(f"{px:.1f},{py:.1f}" for px, py in pts)
            parts.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="2"/>')
        for px, py in pts:
            parts.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="3" fill="{color}"/>')
        parts.append(f'<text x="{_W - _PAD - 80}" y="{_PAD + 14 * k}" fill="{color}">{_esc(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_figures(out_dir) -> list[Path]:
    """SVG figures from ``report.csv`` and ``distributions.csv`` in ``out_dir``."""
    out = Path(out_dir)
    written = []
    rep = out / "report.csv"
    if rep.exists():
        summary = [r for r in summarize_by_task(read_table(rep)) if r["task"] != "all"]
        tasks = sorted({r["task"] for r in summary})
        scopes = list(dict.fromkeys(r["scope"] for r in summary))
        for col, label in (("f1", "mean F1 (%)"), ("mae_rmssd_ms", "MAE RMSSD (ms)")):
            series = {}
            for s in scopes:
                by_task = {r["task"]: r[col] for r in summary if r["scope"] == s}
                series[s] = [by_task.get(t, math.nan) for t in tasks]
            path = out / f"fig_{col}_by_task.svg"
            path.write_text(svg_lines(series, tasks, f"{label} per task", label), encoding="utf-8")
            written.append(path)
    dist = out / "distributions.csv"
    if dist.exists():
        rows = read_table(dist)
        for col, label in (("mean_ibi_ms", "mean IBI (ms)"), ("rmssd_ms", "RMSSD (ms)")):
            groups = {}
            for r in rows:
                groups.setdefault(f"{r['task']}:{r['condition']}", []).append(_float(r[col]))
            path = out / f"fig_{col}_distribution.svg"
            path.write_text(svg_boxplot(groups, f"per-participant {label}", label), encoding="utf-8")
            written.append(path)
    return written


def write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if math.isnan(v) or math.isinf(v) else round(v, 6)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def rows_of(dataclass_rows) -> list[dict]:
    return [{f.name: getattr(r, f.name) for f in fields(r)} for r in dataclass_rows]
