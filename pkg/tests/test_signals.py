import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppgtune.errors import InsufficientData, InvalidInput
from ppgtune.signals import Role, Signal, Window, resample, round_half_up, segment, tile_windows


def test_round_half_up_scalars_and_arrays():
    assert round_half_up(2.5) == 3
    assert round_half_up(-2.5) == -2
    assert round_half_up(1.49) == 1
    assert round_half_up(np.array([0.5, 1.5, -0.5])).tolist() == [1, 2, 0]


def test_signal_is_immutable_and_validated():
    s = Signal([1.0, 2.0, 3.0], 4.0, 1000, Role.ECG)
    assert s.duration_ms == 750.0
    with pytest.raises(ValueError):
        s.samples[0] = 5.0
    with pytest.raises(InvalidInput):
        Signal([1.0, np.nan], 4.0)
    with pytest.raises(InvalidInput):
        Signal([1.0], 0.0)
    assert s.replace(fs=8.0).duration_ms == 375.0


def test_tile_windows_drops_partial_tail():
    assert tile_windows(180_000) == [Window(0), Window(60_000), Window(120_000)]
    assert tile_windows(179_999) == [Window(0), Window(60_000)]
    assert tile_windows(59_999) == []
    with pytest.raises(InvalidInput):
        tile_windows(1000, 0)
    with pytest.raises(InvalidInput):
        Window(-1)


def test_resample_identity_returns_copy():
    s = Signal(np.arange(10.0), 10.0)
    r = resample(s, 10.0)
    assert np.array_equal(r.samples, s.samples)
    assert r.samples is not s.samples


def test_resample_linear_ramp_is_exact():
    s = Signal(np.arange(64.0) * 2.0, 32.0, 500)
    r = resample(s, 100.0)
    assert len(r) == math.floor(63 * 100 / 32) + 1
    t = np.arange(len(r)) / 100.0
    assert np.allclose(r.samples, t * 64.0, atol=1e-12)
    assert r.start_time == 500 and r.fs == 100.0


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(2, 300),
    fs=st.sampled_from([32.0, 64.0, 100.0, 250.0, 700.0]),
    target=st.sampled_from([25.0, 64.0, 100.0, 128.0]),
)
def test_resample_matches_np_interp(n, fs, target):
    x = np.sin(np.arange(n) * 0.37)
    r = resample(Signal(x, fs), target)
    t_out = np.arange(len(r)) / target
    assert t_out[-1] <= (n - 1) / fs + 1e-9
    assert np.allclose(r.samples, np.interp(t_out, np.arange(n) / fs, x), atol=1e-12)


def test_resample_errors():
    with pytest.raises(InsufficientData):
        resample(Signal([1.0], 10.0), 20.0)
    with pytest.raises(InvalidInput):
        resample(Signal([1.0, 2.0], 10.0), 0.0)


def test_segment_slices_by_window():
    s = Signal(np.arange(130 * 4.0), 4.0, 10_000)
    parts = segment(s, 60_000)
    assert len(parts) == 2
    w, piece = parts[1]
    assert w == Window(60_000)
    assert len(piece) == 240 and piece.samples[0] == 240.0
    assert piece.start_time == 70_000
