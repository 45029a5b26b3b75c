"""Waveform containers, resampling and fixed-length windowing."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InsufficientData, InvalidInput

DEFAULT_WINDOW_MS = 60_000


class Role(str, Enum):
    PPG = "PPG"
    ECG = "ECG"
    ACC_X = "ACC_X"
    ACC_Y = "ACC_Y"
    ACC_Z = "ACC_Z"


def round_half_up(x):
    """Round to the nearest integer, halves away from -inf. Works on scalars and arrays."""
    if np.ndim(x) == 0:
        return int(math.floor(float(x) + 0.5))
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(np.int64)


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled waveform.

    ``start_time`` is absolute epoch time in milliseconds. Samples are stored
    as a read-only float64 array.
    """

    samples: np.ndarray
    fs: float
    start_time: int = 0
    role: Role = Role.PPG

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if not (self.fs > 0 and math.isfinite(self.fs)):
            raise InvalidInput(f"sampling rate must be positive, got {self.fs}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("signal contains NaN or infinite samples")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "fs", float(self.fs))
        object.__setattr__(self, "role", Role(self.role))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_ms(self) -> float:
        return len(self) / self.fs * 1000.0

    def replace(self, samples=None, fs=None, start_time=None, role=None) -> "Signal":
        return Signal(
            self.samples if samples is None else samples,
            self.fs if fs is None else fs,
            self.start_time if start_time is None else start_time,
            self.role if role is None else role,
        )


@dataclass(frozen=True)
class Window:
    start_ms: int
    length_ms: int = DEFAULT_WINDOW_MS

    def __post_init__(self):
        if self.start_ms < 0 or self.length_ms <= 0:
            raise InvalidInput(f"invalid window ({self.start_ms}, {self.length_ms})")

    @property
    def end_ms(self) -> int:
        return self.start_ms + self.length_ms


def tile_windows(duration_ms: float, window_ms: int = DEFAULT_WINDOW_MS) -> list[Window]:
    """Non-overlapping windows from 0; a trailing partial window is dropped."""
    if window_ms <= 0:
        raise InvalidInput("window length must be positive")
    n = int(math.floor(duration_ms / window_ms + 1e-9))
    return [Window(k * window_ms, window_ms) for k in range(n)]


def resample(signal: Signal, target_fs: float) -> Signal:
    """Linear interpolation onto a uniform grid at ``target_fs``.

    The first sample time is kept. The output has
    ``floor((n - 1) * target_fs / fs) + 1`` samples, so it never extrapolates
    past the last input sample.
    """
    if not target_fs > 0:
        raise InvalidInput(f"target rate must be positive, got {target_fs}")
    n = len(signal)
    if n < 2:
        raise InsufficientData("resampling needs at least 2 samples")
    if target_fs == signal.fs:
        return signal.replace(samples=signal.samples.copy())
    ratio = signal.fs / target_fs
    n_out = int(math.floor((n - 1) / ratio + 1e-9)) + 1
    pos = np.arange(n_out) * ratio
    out = np.interp(pos, np.arange(n, dtype=float), signal.samples)
    return signal.replace(samples=out, fs=target_fs)


def segment(signal: Signal, window_ms: int = DEFAULT_WINDOW_MS) -> list[tuple[Window, Signal]]:
    if window_ms <= 0:
        raise InvalidInput("window length must be positive")
    out = []
    for w in tile_windows(signal.duration_ms, window_ms):
        i0 = round_half_up(w.start_ms * signal.fs / 1000.0)
        i1 = round_half_up(w.end_ms * signal.fs / 1000.0)
        i1 = min(i1, len(signal))
        piece = signal.replace(samples=signal.samples[i0:i1], start_time=signal.start_time + w.start_ms)
        out.append((w, piece))
    return out
