import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import signal as sps

from ppgtune import _kernels as k

sorted_times = st.lists(st.integers(0, 20_000), max_size=40, unique=True).map(lambda v: np.array(sorted(v), dtype=np.int64))


@settings(max_examples=200, deadline=None)
@given(sorted_times, sorted_times, st.integers(0, 400))
def test_match_pairs_paths_agree(a, b, tol):
    ia, ib = k.match_pairs_nb(a, b, tol)
    ja, jb = k.match_pairs_np(a, b, tol)
    assert ia.tolist() == ja.tolist() and ib.tolist() == jb.tolist()


@settings(max_examples=100, deadline=None)
@given(sorted_times, sorted_times, st.integers(10, 300))
def test_lag_scan_paths_agree(a, b, tol):
    lags = np.arange(-2000, 2001, 20, dtype=np.int64)
    assert k.lag_scan_nb(a, b, lags, tol).tolist() == k.lag_scan_np(a, b, lags, tol).tolist()
    for lag in (-2000, 0, 140):
        i = int(np.flatnonzero(lags == lag)[0])
        assert k.lag_scan_np(a, b, lags, tol)[i] == len(k.match_pairs_np(a + lag, b, tol)[0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(*[st.integers(0, 5)] * 3), max_size=60))
def test_front_rank_paths_agree(points):
    f = np.array(points, dtype=float).reshape(-1, 3)
    assert k.front_rank_nb(f).tolist() == k.front_rank_np(f).tolist()


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(0, 5000), min_size=1, max_size=50, unique=True),
    st.integers(1, 400),
    st.integers(0, 2**32 - 1),
)
def test_select_peaks_paths_agree(idx, min_dist, seed):
    idx = np.array(sorted(idx), dtype=np.int64)
    heights = np.random.default_rng(seed).integers(0, 5, len(idx)).astype(float)
    assert k.select_peaks_nb(idx, heights, min_dist).tolist() == k.select_peaks_np(idx, heights, min_dist).tolist()


def test_sosfilt_paths_agree_with_scipy(rng):
    sos = sps.cheby2(4, 40, [0.5, 4.0], "bandpass", fs=64, output="sos")
    x = rng.normal(size=5000)
    zi = sps.sosfilt_zi(sos) * x[0]
    y_ref, z_ref = sps.sosfilt(sos, x, zi=zi)
    for fn in (k.sosfilt_nb, k.sosfilt_np):
        y, z = fn(sos, x, zi.copy())
        assert np.allclose(y, y_ref, rtol=0, atol=1e-12)
        assert np.allclose(z, z_ref, rtol=0, atol=1e-12)


def test_env_flag_selects_numpy_path():
    code = "from ppgtune import _kernels as k; print(k.USE_NUMBA, k.match_pairs is k.match_pairs_np)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"PPGTUNE_DISABLE_NUMBA": "1", "PATH": ""}).stdout.split()
    assert out == ["False", "True"]


@pytest.mark.skipif(not k.NUMBA_AVAILABLE, reason="numba not installed")
def test_default_uses_numba():
    code = "from ppgtune import _kernels as k; print(k.USE_NUMBA)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"PATH": ""}).stdout.strip()
    assert out == "True"
