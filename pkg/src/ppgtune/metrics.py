"""Beat matching, detection accuracy, windowed IBI/RMSSD errors and the motion metric."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .beats import BeatSeries
from .errors import EmptyInput, InvalidInput, UndefinedMetric
from .filters import Family, FilterSpec, apply_zero_phase, design_bandpass
from .signals import Signal, Window, resample, round_half_up


@dataclass(frozen=True)
class MatchResult:
    lag_ms: int
    pairs: tuple
    n_correct: int
    n_ecg: int
    n_ppg: int


@dataclass(frozen=True)
class SegmentMetrics:
    window: Window
    n_ecg: int
    n_ppg: int
    n_correct: int
    se: float
    ppv: float
    f1: float
    mean_ibi_ms: float
    rmssd_ms: float
    ref_mean_ibi_ms: float
    ref_rmssd_ms: float
    abs_err_ibi_ms: float
    abs_err_rmssd_ms: float
    motion_auc: float
    valid: bool


def _times(series) -> np.ndarray:
    if isinstance(series, BeatSeries):
        return series.times_ms
    return np.asarray(series, dtype=np.int64)


def match_beats(ppg, ecg, tolerance_ms: float = 150, lag_ms: int = 0) -> MatchResult:
    """One-to-one matching of PPG beats to ECG beats within ``tolerance_ms``.

    Both series are walked in time order; a PPG beat takes the earliest
    unmatched ECG beat that is still within tolerance. Because every beat
    has the same tolerance width this greedy sweep finds a
    maximum-cardinality matching. ``lag_ms`` is added to the PPG times first.
    """
    p = _times(ppg) + int(lag_ms)
    e = _times(ecg)
    ip, ie = _kernels.match_pairs(p, e, float(tolerance_ms))
    pairs = tuple((int(e[j]), int(p[i])) for i, j in zip(ip, ie))
    return MatchResult(int(lag_ms), pairs, len(pairs), len(e), len(p))


def lag_grid(search_ms: int = 2000, step_ms: int = 20) -> np.ndarray:
    k = int(search_ms // step_ms)
    return np.arange(-k, k + 1, dtype=np.int64) * int(step_ms)


def best_lag(ppg, ecg, tolerance_ms: float = 150, search_ms: int = 2000, step_ms: int = 20) -> int:
    """Lag (added to PPG times) maximizing matched beats.

    Ties go to the smallest ``|lag|``, then to the negative lag.
    """
    p = _times(ppg)
    e = _times(ecg)
    if len(p) == 0 or len(e) == 0:
        raise EmptyInput("lag search needs non-empty beat series")
    lags = lag_grid(search_ms, step_ms)
    counts = _kernels.lag_scan(p, e, lags, float(tolerance_ms))
    best = counts.max()
    cands = lags[counts == best]
    order = np.lexsort((cands > 0, np.abs(cands)))
    return int(cands[order[0]])


def se_ppv_f1(m: MatchResult) -> tuple[float, float, float]:
    if m.n_ecg <= 0 or m.n_ppg <= 0:
        raise UndefinedMetric("Se/PPV need at least one ECG and one PPG beat")
    se = m.n_correct / m.n_ecg * 100.0
    ppv = m.n_correct / m.n_ppg * 100.0
    f1 = 0.0 if se + ppv == 0 else 2 * ppv * se / (ppv + se)
    return se, ppv, f1


def clean_ibi_mask(ibis, min_ms: float = 300, max_ms: float = 2000, max_dev_frac: float = 0.25) -> np.ndarray:
    """Boolean mask of IBIs kept by the artifact rule.

    Absolute bounds first, then a relative deviation from the median of the
    survivors, repeated until nothing more is dropped (so the rule is
    idempotent).
    """
    x = np.asarray(ibis, dtype=float)
    keep = (x >= min_ms) & (x <= max_ms)
    while keep.any():
        med = np.median(x[keep])
        nxt = keep & (np.abs(x - med) <= max_dev_frac * med)
        if nxt.sum() == keep.sum():
            break
        keep = nxt
    return keep


def clean_ibis(ibis, min_ms: float = 300, max_ms: float = 2000, max_dev_frac: float = 0.25) -> list:
    x = np.asarray(ibis, dtype=float)
    mask = clean_ibi_mask(x, min_ms, max_ms, max_dev_frac)
    kept = x[mask]
    if np.issubdtype(np.asarray(ibis).dtype, np.integer):
        return [int(v) for v in kept]
    return kept.tolist()


def rmssd(ibis, valid=None) -> float:
    """Root mean square of successive differences.

    With ``valid`` (a boolean mask over ``ibis``) only differences between
    two adjacent kept IBIs count.
    """
    x = np.asarray(ibis, dtype=float)
    d = np.diff(x)
    if valid is not None:
        v = np.asarray(valid, dtype=bool)
        d = d[v[:-1] & v[1:]]
    if len(d) == 0:
        raise UndefinedMetric("RMSSD needs at least two successive valid IBIs")
    return float(np.sqrt(np.mean(d * d)))


def mae(values) -> float:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise UndefinedMetric("MAE of an empty list")
    return float(np.mean(np.abs(x)))


def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInput("pearson_r needs two equal-length 1-D sequences")
    if len(x) < 3:
        raise InvalidInput("pearson_r needs at least 3 pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedMetric("correlation of a constant sequence")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _window_side(times, w, ibi_kw):
    t = times[(times >= w.start_ms) & (times < w.end_ms)]
    ibis = np.diff(t).astype(float)
    mask = clean_ibi_mask(ibis, **ibi_kw)
    n_valid = int(mask.sum())
    mean_ibi = float(ibis[mask].mean()) if n_valid else math.nan
    try:
        r = rmssd(ibis, mask)
    except UndefinedMetric:
        r = math.nan
    return t, n_valid, mean_ibi, r


def window_ibi_stats(
    beats,
    windows,
    min_valid_beats: int = 10,
    ibi_min_ms: float = 300,
    ibi_max_ms: float = 2000,
    max_dev_frac: float = 0.25,
) -> list[tuple[float, float]]:
    """``(mean IBI, RMSSD)`` per window for a single beat series.

    Windows keeping ``min_valid_beats`` or fewer IBIs give NaNs.
    """
    t = _times(beats)
    ibi_kw = dict(min_ms=ibi_min_ms, max_ms=ibi_max_ms, max_dev_frac=max_dev_frac)
    out = []
    for w in windows:
        _, n_valid, mean_ibi, r = _window_side(t, w, ibi_kw)
        if n_valid > min_valid_beats and not math.isnan(r):
            out.append((mean_ibi, r))
        else:
            out.append((math.nan, math.nan))
    return out


def window_metrics(
    ppg,
    ecg,
    lag_ms: int,
    windows,
    tolerance_ms: float = 150,
    min_valid_beats: int = 10,
    ibi_min_ms: float = 300,
    ibi_max_ms: float = 2000,
    max_dev_frac: float = 0.25,
    motion=None,
) -> list[SegmentMetrics]:
    """Per-window accuracy and IBI/RMSSD errors.

    ``lag_ms`` is added to the PPG beat times before windowing. A window is
    valid when both sides keep more than ``min_valid_beats`` IBIs after
    cleaning and both RMSSDs are defined. ``motion`` is an optional
    per-window sequence of motion AUC values.
    """
    p = _times(ppg) + int(lag_ms)
    e = _times(ecg)
    ibi_kw = dict(min_ms=ibi_min_ms, max_ms=ibi_max_ms, max_dev_frac=max_dev_frac)
    out = []
    for k, w in enumerate(windows):
        pt, p_valid, p_ibi, p_rmssd = _window_side(p, w, ibi_kw)
        et, e_valid, e_ibi, e_rmssd = _window_side(e, w, ibi_kw)
        m = match_beats(pt, et, tolerance_ms)
        if m.n_ecg > 0 and m.n_ppg > 0:
            se, ppv, f1 = se_ppv_f1(m)
        else:
            se = ppv = f1 = math.nan
        valid = (
            p_valid > min_valid_beats
            and e_valid > min_valid_beats
            and not math.isnan(p_rmssd)
            and not math.isnan(e_rmssd)
        )
        auc = float(motion[k]) if motion is not None else math.nan
        out.append(
            SegmentMetrics(
                window=w,
                n_ecg=m.n_ecg,
                n_ppg=m.n_ppg,
                n_correct=m.n_correct,
                se=se,
                ppv=ppv,
                f1=f1,
                mean_ibi_ms=p_ibi if valid else math.nan,
                rmssd_ms=p_rmssd if valid else math.nan,
                ref_mean_ibi_ms=e_ibi if valid else math.nan,
                ref_rmssd_ms=e_rmssd if valid else math.nan,
                abs_err_ibi_ms=abs(p_ibi - e_ibi) if valid else math.nan,
                abs_err_rmssd_ms=abs(p_rmssd - e_rmssd) if valid else math.nan,
                motion_auc=auc,
                valid=valid,
            )
        )
    return out


MOTION_FS = 100.0


def motion_spec(f_low: float = 0.2, f_high: float = 5.0, order: int = 4) -> FilterSpec:
    return FilterSpec(Family.BUTTERWORTH, order, f_low, f_high)


def filtered_motion(axis: Signal, spec: FilterSpec | None = None, fs: float = MOTION_FS) -> Signal:
    """Axis resampled to ``fs``, band-passed and rectified."""
    spec = spec or motion_spec()
    r = resample(axis, fs)
    y = apply_zero_phase(design_bandpass(spec, fs), r)
    return y.replace(samples=np.abs(y.samples))


def _trapezoid_window(x: Signal, w: Window) -> float:
    i0 = round_half_up(w.start_ms * x.fs / 1000.0)
    i1 = min(round_half_up(w.end_ms * x.fs / 1000.0), len(x) - 1)
    if i1 <= i0:
        return 0.0
    seg = x.samples[i0:i1 + 1]
    return float((seg[:-1] + seg[1:]).sum() * 0.5 / x.fs)


def motion_auc(acc_x: Signal, acc_y: Signal, acc_z: Signal, window: Window, spec: FilterSpec | None = None) -> float:
    """Simplified MIMS-like motion summary for one window.

    Each axis is resampled to 100 Hz, Butterworth band-passed (0.2-5 Hz,
    zero phase) and rectified; the trapezoidal integrals over the window
    (in g*s) are summed across axes.
    """
    axes = (acc_x, acc_y, acc_z)
    if len({len(a) for a in axes}) != 1 or len({a.fs for a in axes}) != 1:
        raise InvalidInput("accelerometer axes must share length and sampling rate")
    return sum(_trapezoid_window(filtered_motion(a, spec), window) for a in axes)


def motion_auc_windows(
    acc, windows, spec: FilterSpec | None = None, offset_ms: float = 0.0, fs: float = MOTION_FS
) -> list[float]:
    """Motion AUC per window; filtering runs once per axis over the full recording.

    ``offset_ms`` is the accelerometer start relative to the window origin.
    """
    axes = tuple(acc)
    if len({len(a) for a in axes}) != 1 or len({a.fs for a in axes}) != 1:
        raise InvalidInput("accelerometer axes must share length and sampling rate")
    rect = [filtered_motion(a, spec, fs) for a in axes]
    out = []
    for w in windows:
        start = w.start_ms - offset_ms
        if start < 0:
            out.append(math.nan)
            continue
        shifted = Window(int(round(start)), w.length_ms)
        out.append(sum(_trapezoid_window(r, shifted) for r in rect))
    return out
