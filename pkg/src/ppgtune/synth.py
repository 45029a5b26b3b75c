"""Synthetic ECG / PPG / accelerometer signals with known beat times.

Random draws use numpy's PCG64 bit generator. Each channel gets its own
stream, seeded with ``[seed, stream_id]``, so regenerating one channel never
shifts the draws of another.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInput
from .signals import Role, Signal

SYSTOLIC_SIGMA_MS = 80.0
DIASTOLIC_SIGMA_MS = 100.0
DIASTOLIC_DELAY_MS = 300.0
R_SIGMA_MS = 10.0
# middle-amplitude crossing of a Gaussian upstroke sits sigma*sqrt(2 ln 2) before its peak
HALF_MAX_LEAD_MS = SYSTOLIC_SIGMA_MS * math.sqrt(2 * math.log(2))

_STREAM_IBI, _STREAM_PPG, _STREAM_ECG, _STREAM_ACC = 1, 2, 3, 4


def _rng(seed, stream):
    return np.random.Generator(np.random.PCG64([int(seed), stream]))


@dataclass(frozen=True)
class SynthConfig:
    duration_s: float = 60.0
    mean_hr_bpm: float = 60.0
    hrv_sd_ms: float = 0.0
    resp_rate_hz: float = 0.25
    resp_amp_frac: float = 0.0
    diastolic_frac: float = 0.4
    noise_snr_db: float | None = None  # None turns noise off
    baseline_wander_hz: float = 0.1
    baseline_wander_amp: float = 0.0
    interference_hz: float = 0.0  # extra additive sinusoid on the PPG
    interference_amp: float = 0.0
    motion_amp_g: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 30 <= self.mean_hr_bpm <= 220:
            raise InvalidInput(f"mean_hr_bpm must lie in [30, 220], got {self.mean_hr_bpm}")
        if not self.duration_s > 0:
            raise InvalidInput("duration_s must be positive")
        if not 0 <= self.diastolic_frac < 1:
            raise InvalidInput("diastolic_frac must lie in [0, 1)")
        if self.hrv_sd_ms < 0:
            raise InvalidInput("hrv_sd_ms must be non-negative")

    def with_(self, **kw) -> "SynthConfig":
        return replace(self, **kw)


def gen_beat_times(cfg: SynthConfig) -> np.ndarray:
    """Beat times in ms (float), starting at 0, IBIs ~ N(60000/hr, hrv_sd) clipped to [300, 2000]."""
    mean_ibi = 60000.0 / cfg.mean_hr_bpm
    duration_ms = cfg.duration_s * 1000.0
    n_max = int(duration_ms / 300.0) + 2
    rng = _rng(cfg.seed, _STREAM_IBI)
    ibis = mean_ibi + (rng.normal(0.0, cfg.hrv_sd_ms, n_max) if cfg.hrv_sd_ms > 0 else np.zeros(n_max))
    ibis = np.clip(ibis, 300.0, 2000.0)
    t = np.concatenate(([0.0], np.cumsum(ibis)))
    return t[t < duration_ms]


def _add_bumps(out, t_ms, centers, amps, sigma_ms):
    if len(centers) == 0:
        return
    dt = t_ms[1] - t_ms[0] if len(t_ms) > 1 else 1.0
    reach = 6 * sigma_ms
    for c, a in zip(centers, amps):
        lo = max(0, int(math.floor((c - reach - t_ms[0]) / dt)))
        hi = min(len(t_ms), int(math.ceil((c + reach - t_ms[0]) / dt)) + 1)
        if lo >= hi:
            continue
        tt = t_ms[lo:hi] - c
        out[lo:hi] += a * np.exp(-0.5 * (tt / sigma_ms) ** 2)


def _add_noise(x, snr_db, rng):
    if snr_db is None:
        return x
    power = np.mean((x - x.mean()) ** 2) if len(x) else 0.0
    if power == 0:
        power = 1e-6
    sd = math.sqrt(power / 10 ** (snr_db / 10.0))
    return x + rng.normal(0.0, sd, len(x))


def _n_samples(cfg, fs):
    return int(round(cfg.duration_s * fs))


def gen_ppg(beats_ms, fs: float, cfg: SynthConfig, start_time: int = 0) -> tuple[Signal, np.ndarray]:
    """PPG with a systolic and a delayed diastolic Gaussian bump per beat.

    Returns the signal and the ground-truth beat times: the middle-amplitude
    point of each clean systolic upstroke, ``HALF_MAX_LEAD_MS`` before the
    systolic peak.
    """
    beats = np.asarray(beats_ms, dtype=float)
    if np.any(np.diff(beats) <= 0):
        raise InvalidInput("beat times must be increasing")
    n = _n_samples(cfg, fs)
    t = np.arange(n) * (1000.0 / fs)
    pulse = np.zeros(n)
    _add_bumps(pulse, t, beats, np.ones(len(beats)), SYSTOLIC_SIGMA_MS)
    if cfg.diastolic_frac > 0:
        _add_bumps(pulse, t, beats + DIASTOLIC_DELAY_MS, np.full(len(beats), cfg.diastolic_frac), DIASTOLIC_SIGMA_MS)
    t_s = t / 1000.0
    pulse *= 1.0 + cfg.resp_amp_frac * np.sin(2 * np.pi * cfg.resp_rate_hz * t_s)
    x = pulse
    if cfg.baseline_wander_amp:
        x = x + cfg.baseline_wander_amp * np.sin(2 * np.pi * cfg.baseline_wander_hz * t_s)
    if cfg.interference_amp:
        x = x + cfg.interference_amp * np.sin(2 * np.pi * cfg.interference_hz * t_s)
    if cfg.noise_snr_db is not None:
        rng = _rng(cfg.seed, _STREAM_PPG)
        x = x + (_add_noise(pulse, cfg.noise_snr_db, rng) - pulse)
    truth = beats - HALF_MAX_LEAD_MS
    return Signal(x, fs, start_time, Role.PPG), truth


def gen_ecg(beats_ms, fs: float, cfg: SynthConfig, start_time: int = 0) -> Signal:
    """ECG with a unit R spike (sigma 10 ms) per beat plus small P and T waves."""
    if fs < 100:
        raise InvalidInput("synthetic ECG needs fs >= 100 Hz")
    beats = np.asarray(beats_ms, dtype=float)
    if np.any(np.diff(beats) <= 0):
        raise InvalidInput("beat times must be increasing")
    n = _n_samples(cfg, fs)
    t = np.arange(n) * (1000.0 / fs)
    x = np.zeros(n)
    k = len(beats)
    _add_bumps(x, t, beats, np.ones(k), R_SIGMA_MS)
    _add_bumps(x, t, beats - 160.0, np.full(k, 0.12), 25.0)
    _add_bumps(x, t, beats + 250.0, np.full(k, 0.25), 40.0)
    if cfg.noise_snr_db is not None:
        x = _add_noise(x, cfg.noise_snr_db, _rng(cfg.seed, _STREAM_ECG))
    return Signal(x, fs, start_time, Role.ECG)


def gen_acc(fs: float, cfg: SynthConfig, start_time: int = 0) -> tuple[Signal, Signal, Signal]:
    """Three-axis accelerometer in g: gravity on z plus optional 1.5 Hz sway on x/y."""
    n = _n_samples(cfg, fs)
    t_s = np.arange(n) / fs
    rng = _rng(cfg.seed, _STREAM_ACC)
    jitter = rng.normal(0.0, 0.002, (3, n))
    sway = cfg.motion_amp_g * np.sin(2 * np.pi * 1.5 * t_s)
    ax = sway + jitter[0]
    ay = 0.5 * sway + jitter[1]
    az = 1.0 + jitter[2]
    return (
        Signal(ax, fs, start_time, Role.ACC_X),
        Signal(ay, fs, start_time, Role.ACC_Y),
        Signal(az, fs, start_time, Role.ACC_Z),
    )


@dataclass(frozen=True)
class SynthRecording:
    participant: str
    task: str
    ppg: Signal
    ecg: Signal
    acc: tuple[Signal, Signal, Signal]
    beats_ms: np.ndarray  # cardiac events on the shared time axis
    ppg_truth_ms: np.ndarray


def synth_recording(
    cfg: SynthConfig,
    participant: str = "p01",
    task: str = "baseline",
    ppg_fs: float = 64.0,
    ecg_fs: float = 250.0,
    acc_fs: float = 32.0,
    start_time: int = 0,
    margin_ms: float = 500.0,
) -> SynthRecording:
    """All channels for one recording; beats are kept ``margin_ms`` away from both ends."""
    beats = gen_beat_times(cfg) + margin_ms
    beats = beats[beats <= cfg.duration_s * 1000.0 - margin_ms]
    ppg, truth = gen_ppg(beats, ppg_fs, cfg, start_time)
    ecg = gen_ecg(beats, ecg_fs, cfg, start_time)
    acc = gen_acc(acc_fs, cfg, start_time)
    return SynthRecording(participant, task, ppg, ecg, acc, beats, truth)


# per-participant traits of the demo cohort: resting rate plus one disturbance
# the fixed 0.5-4.0 Hz band handles poorly
_DEMO_TRAITS = (
    dict(mean_hr_bpm=48, diastolic_frac=0.9, hrv_sd_ms=30),
    dict(mean_hr_bpm=55, diastolic_frac=0.3, hrv_sd_ms=25, interference_hz=2.5, interference_amp=0.6),
    dict(mean_hr_bpm=62, diastolic_frac=0.8, hrv_sd_ms=25, noise_snr_db=10),
    dict(mean_hr_bpm=70, diastolic_frac=0.6, hrv_sd_ms=30, interference_hz=4.2, interference_amp=1.0, noise_snr_db=12),
    dict(mean_hr_bpm=78, diastolic_frac=0.5, hrv_sd_ms=30, noise_snr_db=8),
    dict(mean_hr_bpm=90, diastolic_frac=0.3, hrv_sd_ms=40),
)


def demo_cohort(
    n_participants: int = 6, tasks=("rest", "stress"), duration_s: float = 120.0, seed: int = 0
) -> list[tuple[str, str, SynthConfig]]:
    """Participant/task configurations with heart rates between 0.8 and 1.5 Hz.

    Later tasks raise the heart rate by 10% (capped at 90 bpm), damp the
    variability and add arm sway.
    """
    out = []
    for p in range(n_participants):
        traits = _DEMO_TRAITS[p % len(_DEMO_TRAITS)]
        for t, task in enumerate(tasks):
            hr = min(90.0, traits["mean_hr_bpm"] * (1.0 + 0.1 * t))
            cfg = SynthConfig(
                duration_s=duration_s,
                seed=int(seed) * 1000 + p * 10 + t,
                resp_amp_frac=0.1,
                motion_amp_g=0.05 * t,
                **{**traits, "mean_hr_bpm": hr, "hrv_sd_ms": traits["hrv_sd_ms"] * (0.7 ** t)},
            )
            out.append((f"p{p + 1:02d}", task, cfg))
    return out
