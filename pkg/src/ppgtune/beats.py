"""Heartbeat detection for ECG (R-peaks) and band-passed PPG (middle-amplitude points)."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import InvalidInput, NoBeatsDetected
from .signals import Signal, round_half_up

# offsets above the moving average, in percent of the 5-95 percentile range
PPG_LEVELS = (0, 5, 10, 15, 20, 25, 30, 35, 40, 50)


class Source(str, Enum):
    ECG = "ECG"
    PPG = "PPG"


@dataclass(frozen=True)
class BeatSeries:
    """Strictly increasing beat times in integer milliseconds since signal start."""

    times_ms: np.ndarray
    source: Source = Source.ECG

    def __post_init__(self):
        t = np.asarray(self.times_ms)
        if t.size and not np.all(np.isfinite(t.astype(float))):
            raise InvalidInput("beat times must be finite")
        t = np.array(t, dtype=np.int64).reshape(-1)
        if np.any(np.diff(t) <= 0):
            raise InvalidInput("beat times must be strictly increasing")
        t.flags.writeable = False
        object.__setattr__(self, "times_ms", t)
        object.__setattr__(self, "source", Source(self.source))

    def __len__(self):
        return self.times_ms.shape[0]

    def ibis(self) -> np.ndarray:
        return np.diff(self.times_ms)

    def shifted(self, lag_ms: int) -> "BeatSeries":
        return BeatSeries(self.times_ms + int(lag_ms), self.source)


def moving_average(x, width: int) -> np.ndarray:
    """Centered running mean; edges use the samples available."""
    x = np.asarray(x, dtype=float)
    width = max(1, int(width))
    c = np.concatenate(([0.0], np.cumsum(x)))
    n = len(x)
    half_lo = (width - 1) // 2
    half_hi = width - 1 - half_lo
    idx = np.arange(n)
    lo = np.clip(idx - half_lo, 0, n)
    hi = np.clip(idx + half_hi + 1, 0, n)
    return (c[hi] - c[lo]) / (hi - lo)


def _to_ms(idx, fs):
    return round_half_up(np.asarray(idx, dtype=float) * 1000.0 / fs)


def _unique_increasing(times):
    times = np.asarray(times, dtype=np.int64)
    if times.size == 0:
        return times
    keep = np.concatenate(([True], np.diff(times) > 0))
    return times[keep]


def detect_ecg_beats(
    ecg: Signal,
    smooth_ms: float = 65.0,
    refractory_ms: float = 250.0,
    refine_ms: float = 80.0,
    threshold_frac: float = 0.3,
    twave_ms: float = 360.0,
    twave_ratio: float = 0.5,
) -> BeatSeries:
    """R-peaks from a band-passed ECG via the Shannon energy envelope.

    First difference, normalized to unit peak, turned into Shannon energy
    ``-x**2 * log(x**2)`` and smoothed. Envelope peaks (at least
    ``refractory_ms`` apart, above ``threshold_frac`` of the 90th percentile
    peak height) are refined to the largest absolute ECG sample within
    ``refine_ms``. A peak closer than ``twave_ms`` to the previous beat is
    taken for a T wave and dropped when its envelope height is below
    ``twave_ratio`` times the previous beat's.
    """
    x = ecg.samples
    fs = ecg.fs
    empty = BeatSeries(np.empty(0, np.int64), Source.ECG)
    if len(x) < 3:
        return empty
    d = np.diff(x, prepend=x[0])
    peak = np.max(np.abs(d))
    if peak == 0:
        return empty
    e2 = (d / peak) ** 2
    se = np.zeros_like(e2)
    nz = e2 > 0
    se[nz] = -e2[nz] * np.log(e2[nz])
    env = moving_average(se, round_half_up(smooth_ms * fs / 1000.0))

    cand = np.flatnonzero((env[1:-1] > env[:-2]) & (env[1:-1] >= env[2:])) + 1
    if cand.size == 0:
        return empty
    refractory = max(1, round_half_up(refractory_ms * fs / 1000.0))
    keep = _kernels.select_peaks(cand.astype(np.int64), env[cand], refractory)
    cand = cand[keep]
    h = env[cand]
    ref = np.percentile(h, 90)
    if ref <= 0:
        return empty
    keep = h >= threshold_frac * ref
    cand, h = cand[keep], h[keep]
    twave = round_half_up(twave_ms * fs / 1000.0)
    kept = []
    for c, hc in zip(cand, h):
        if kept and c - kept[-1][0] < twave and hc < twave_ratio * kept[-1][1]:
            continue
        kept.append((c, hc))
    cand = np.array([c for c, _ in kept], dtype=np.int64)

    half = round_half_up(refine_ms * fs / 1000.0)
    refined = np.empty(len(cand), dtype=np.int64)
    for i, c in enumerate(cand):
        lo = max(0, c - half)
        hi = min(len(x), c + half + 1)
        refined[i] = lo + int(np.argmax(np.abs(x[lo:hi])))
    refined = np.unique(refined)
    if refined.size == 0:
        return empty
    keep = _kernels.select_peaks(refined, np.abs(x[refined]), refractory)
    return BeatSeries(_unique_increasing(_to_ms(refined[keep], fs)), Source.ECG)


def _apices_at(x, thr):
    above = x > thr
    if not above.any():
        return np.empty(0, np.int64)
    edges = np.diff(above.astype(np.int8))
    starts = np.flatnonzero(edges == 1) + 1
    ends = np.flatnonzero(edges == -1) + 1
    if above[0]:
        starts = np.concatenate(([0], starts))
    if above[-1]:
        ends = np.concatenate((ends, [len(x)]))
    apices = np.empty(len(starts), dtype=np.int64)
    for i, (s, e) in enumerate(zip(starts, ends)):
        apices[i] = s + int(np.argmax(x[s:e]))
    return apices


def detect_ppg_apices(
    ppg: Signal,
    ma_window_ms: float = 750.0,
    levels=PPG_LEVELS,
    min_bpm: float = 40.0,
    max_bpm: float = 180.0,
) -> np.ndarray:
    """Apex sample indices of a band-passed PPG.

    Regions where the signal exceeds its moving average plus an offset each
    give one apex. The offset is taken from ``levels`` (percent of the 5-95
    percentile range); the level whose apex intervals have the smallest
    standard deviation wins, provided the implied mean rate is within
    ``[min_bpm, max_bpm]``.
    """
    x = ppg.samples
    fs = ppg.fs
    if len(x) < 3:
        raise NoBeatsDetected("signal too short")
    amp = np.percentile(x, 95) - np.percentile(x, 5)
    if not amp > 0:
        raise NoBeatsDetected("flat signal")
    ma = moving_average(x, round_half_up(ma_window_ms * fs / 1000.0))
    best = None
    best_sd = np.inf
    for level in levels:
        apices = _apices_at(x, ma + level / 100.0 * amp)
        if len(apices) < 2:
            continue
        rr = np.diff(apices) * (1000.0 / fs)
        bpm = 60000.0 / rr.mean()
        if bpm < min_bpm * (1 - 1e-9) or bpm > max_bpm * (1 + 1e-9):
            continue
        sd = rr.std()
        if sd < best_sd:
            best, best_sd = apices, sd
    if best is None:
        raise NoBeatsDetected(f"no threshold level gives a rate within [{min_bpm}, {max_bpm}] bpm")
    return best


def locate_middle_amplitude(ppg: Signal, apices, lookback_ms: float = 2000.0) -> BeatSeries:
    """Beat time = first upward crossing of the foot/apex midpoint level.

    The foot is the minimum in ``(previous apex, apex]``, limited to
    ``lookback_ms`` before the apex. The crossing is interpolated linearly
    between samples and rounded to the millisecond.
    """
    x = ppg.samples
    fs = ppg.fs
    apices = np.asarray(apices, dtype=np.int64)
    if apices.size and (apices.min() < 0 or apices.max() >= len(x) or np.any(np.diff(apices) <= 0)):
        raise InvalidInput("apex indices must be increasing and within the signal")
    lookback = round_half_up(lookback_ms * fs / 1000.0)
    out = []
    prev = -1
    for a in apices:
        lo = max(prev + 1, a - lookback, 0)
        prev = a
        if lo >= a:
            continue
        seg = x[lo:a + 1]
        foot = int(np.argmin(seg))
        top = seg[-1]
        base = seg[foot]
        if not top > base:
            continue
        level = 0.5 * (base + top)
        rise = seg[foot:]
        k = np.flatnonzero((rise[:-1] < level) & (rise[1:] >= level))
        if k.size == 0:
            continue
        k0 = int(k[0])
        frac = (level - rise[k0]) / (rise[k0 + 1] - rise[k0])
        out.append((lo + foot + k0 + frac) * 1000.0 / fs)
    times = _unique_increasing(round_half_up(np.array(out, dtype=float))) if out else np.empty(0, np.int64)
    return BeatSeries(times, Source.PPG)


def detect_ppg_beats(ppg: Signal, **kwargs) -> BeatSeries:
    lookback_ms = kwargs.pop("lookback_ms", 2000.0)
    return locate_middle_amplitude(ppg, detect_ppg_apices(ppg, **kwargs), lookback_ms)
