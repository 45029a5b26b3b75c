import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppgtune.errors import EmptyInput, InvalidInput, UndefinedMetric
from ppgtune.metrics import (
    MatchResult,
    best_lag,
    clean_ibi_mask,
    clean_ibis,
    lag_grid,
    mae,
    match_beats,
    motion_auc,
    motion_auc_windows,
    pearson_r,
    rmssd,
    se_ppv_f1,
    window_ibi_stats,
    window_metrics,
)
from ppgtune.signals import Role, Signal, Window

from .oracles import all_subsets_matching, max_matching, pearson_loop, rmssd_loop


def _random_instance(rng):
    n_p = int(rng.integers(0, 21))
    n_e = int(rng.integers(0, 21))
    p = np.unique(rng.integers(0, 6000, n_p))
    e = np.unique(rng.integers(0, 6000, n_e))
    tol = float(rng.uniform(50, 300))
    return p, e, tol


def test_match_count_equals_maximum_matching(backend):
    rng = np.random.default_rng(2024)
    for _ in range(200):
        p, e, tol = _random_instance(rng)
        m = match_beats(p, e, tol)
        assert m.n_correct == max_matching(p, e, tol)
        used_p = [pp for _, pp in m.pairs]
        used_e = [ee for ee, _ in m.pairs]
        assert len(set(used_p)) == len(used_p) and len(set(used_e)) == len(used_e)
        assert all(abs(a - b) <= tol for a, b in m.pairs)


def test_kuhn_oracle_agrees_with_exhaustive_search():
    rng = np.random.default_rng(5)
    for _ in range(40):
        p = np.unique(rng.integers(0, 1500, rng.integers(0, 6)))
        e = np.unique(rng.integers(0, 1500, rng.integers(0, 6)))
        assert max_matching(p, e, 200) == all_subsets_matching(p, e, 200)


def test_nearest_greedy_counterexample_is_handled():
    # taking the nearest ECG beat for p=0 would be -100 vs 40 (|40| wins) and strand p=140
    m = match_beats([0, 140], [-100, 40], 100)
    assert m.n_correct == 2


def test_match_examples():
    m = match_beats([0, 1000, 2000], [10, 1010, 2500], 150)
    assert m.n_correct == 2 and (m.n_ecg, m.n_ppg) == (3, 3)
    shifted = match_beats([0, 1000, 2000], [500, 1500, 2500], 150, lag_ms=500)
    assert shifted.n_correct == 3
    assert match_beats([], [1, 2], 150).n_correct == 0


def test_tolerance_boundary_inclusive():
    assert match_beats([0], [150], 150).n_correct == 1
    assert match_beats([0], [151], 150).n_correct == 0


@settings(max_examples=60, deadline=None)
@given(
    p=st.lists(st.integers(-3000, 3000), max_size=15, unique=True),
    e=st.lists(st.integers(-3000, 3000), max_size=15, unique=True),
    tol=st.integers(1, 400),
)
def test_match_property(p, e, tol):
    p, e = sorted(p), sorted(e)
    assert match_beats(p, e, tol).n_correct == max_matching(p, e, tol)


def test_lag_scan_agrees_with_direct_matching(backend):
    rng = np.random.default_rng(8)
    e = np.cumsum(rng.integers(600, 1100, 80))
    p = e + 320 + rng.integers(-30, 30, 80)
    p = np.sort(np.unique(np.concatenate((p, rng.integers(0, e[-1], 10)))))
    lag = best_lag(p, e)
    counts = {int(l): match_beats(p, e, 150, int(l)).n_correct for l in lag_grid()}
    best = max(counts.values())
    assert counts[lag] == best
    ties = [l for l, c in counts.items() if c == best]
    assert abs(lag) == min(abs(l) for l in ties)


def test_best_lag_tie_prefers_negative():
    # a single beat matches for every lag in [-150, 150] around -500 +- 150 ... use a symmetric case
    p = np.array([1000])
    e = np.array([1000])
    assert best_lag(p, e, tolerance_ms=150) == 0
    e2 = np.array([1000 - 200, 1000 + 200])
    # lags -200 +- 150 and +200 +- 150 both match one beat; smallest |lag| is 60 on either side
    assert best_lag(p, e2, tolerance_ms=150) == -60


def test_best_lag_empty_raises():
    with pytest.raises(EmptyInput):
        best_lag([], [1, 2])


def test_se_ppv_f1_formulas():
    se, ppv, f1 = se_ppv_f1(MatchResult(0, (), 45, 50, 60))
    assert se == pytest.approx(90.0)
    assert ppv == pytest.approx(75.0)
    assert f1 == pytest.approx(2 * 90 * 75 / 165)
    assert se_ppv_f1(MatchResult(0, (), 0, 3, 4)) == (0.0, 0.0, 0.0)
    with pytest.raises(UndefinedMetric):
        se_ppv_f1(MatchResult(0, (), 0, 0, 4))


def test_se_ppv_f1_random_against_counts():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n_e, n_p = int(rng.integers(1, 200)), int(rng.integers(1, 200))
        c = int(rng.integers(0, min(n_e, n_p) + 1))
        se, ppv, f1 = se_ppv_f1(MatchResult(0, (), c, n_e, n_p))
        assert se == pytest.approx(100 * c / n_e, abs=1e-12)
        assert ppv == pytest.approx(100 * c / n_p, abs=1e-12)
        assert f1 == pytest.approx(200 * c / (n_e + n_p), abs=1e-9)


def test_clean_ibis_examples():
    assert clean_ibis([800, 810, 2500, 790, 200]) == [800, 810, 790]
    assert clean_ibis([1000, 1000, 1300]) == [1000, 1000]
    assert clean_ibis([]) == []


def test_clean_ibis_single_pass_would_not_be_idempotent():
    x = [1000, 1000, 1000, 1200, 1500, 1800, 1900]
    once = clean_ibis(x)
    assert clean_ibis(once) == once


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(100, 3000), max_size=40))
def test_clean_ibis_idempotent(x):
    once = clean_ibis(x)
    assert clean_ibis(once) == once
    assert all(300 <= v <= 2000 for v in once)


def test_rmssd_examples_and_oracle():
    assert rmssd([1000, 1000, 1000]) == 0.0
    assert rmssd([800, 900]) == 100.0
    assert rmssd([800, 900, 800]) == pytest.approx(100.0)
    rng = np.random.default_rng(2)
    for _ in range(100):
        x = rng.normal(800, 60, int(rng.integers(2, 60)))
        assert rmssd(x) == pytest.approx(rmssd_loop(list(x)), rel=1e-12)
    with pytest.raises(UndefinedMetric):
        rmssd([900])


def test_rmssd_with_mask_skips_gaps():
    x = [800, 900, 5000, 1000, 1100]
    mask = [True, True, False, True, True]
    assert rmssd(x, mask) == pytest.approx(100.0)
    assert clean_ibi_mask(x).tolist() == [True, True, False, True, True]


def test_mae_and_pearson():
    assert mae([1, -2, 3]) == pytest.approx(2.0)
    with pytest.raises(UndefinedMetric):
        mae([])
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(3, 50))
        x = rng.normal(size=n)
        y = 0.5 * x + rng.normal(size=n)
        assert pearson_r(x, y) == pytest.approx(pearson_loop(list(x), list(y)), abs=1e-12)
        assert pearson_r(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)
    assert pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    with pytest.raises(UndefinedMetric):
        pearson_r([1, 1, 1], [1, 2, 3])
    with pytest.raises(InvalidInput):
        pearson_r([1, 2], [1, 2])


def _regular(start, ibi, n):
    return np.arange(n) * ibi + start


def test_window_metrics_perfect_and_shifted():
    e = _regular(100, 800, 150)
    p = e - 57
    w = [Window(0, 60000), Window(60000, 60000)]
    segs = window_metrics(p, e, 57, w)
    for s in segs:
        assert s.valid and s.f1 == 100.0
        assert s.abs_err_ibi_ms == 0.0 and s.abs_err_rmssd_ms == 0.0
        assert s.mean_ibi_ms == 800.0 and s.rmssd_ms == 0.0


def test_window_metrics_validity_threshold():
    e = _regular(0, 1000, 12)  # 11 IBIs in the window
    w = [Window(0, 60000)]
    assert window_metrics(e, e, 0, w)[0].valid
    assert not window_metrics(e[:11], e[:11], 0, w)[0].valid
    empty = window_metrics([], e, 0, w)[0]
    assert math.isnan(empty.f1) and not empty.valid


def test_window_metrics_errors_against_manual():
    rng = np.random.default_rng(4)
    e = np.cumsum(rng.integers(750, 850, 80))
    p = e + rng.integers(-20, 20, 80)
    w = [Window(0, 60000)]
    s = window_metrics(p, e, 0, w)[0]
    ie = np.diff(e[e < 60000]).astype(float)
    ip = np.diff(np.sort(p[(p >= 0) & (p < 60000)])).astype(float)
    ref = [(np.mean(ie), rmssd_loop(list(ie))), (np.mean(ip), rmssd_loop(list(ip)))]
    assert s.ref_mean_ibi_ms == pytest.approx(ref[0][0])
    assert s.ref_rmssd_ms == pytest.approx(ref[0][1])
    assert s.abs_err_ibi_ms == pytest.approx(abs(ref[1][0] - ref[0][0]))
    assert s.abs_err_rmssd_ms == pytest.approx(abs(ref[1][1] - ref[0][1]))
    stats = window_ibi_stats(e, w)
    assert stats[0] == pytest.approx(ref[0])


def test_motion_auc_of_sway_matches_rectified_sine_integral():
    fs = 32.0
    t = np.arange(int(120 * fs)) / fs
    a = 0.2
    x = Signal(a * np.sin(2 * np.pi * 1.5 * t), fs, role=Role.ACC_X)
    z = Signal(np.ones_like(t), fs, role=Role.ACC_Z)
    y = Signal(np.zeros_like(t), fs, role=Role.ACC_Y)
    w = Window(30000, 60000)
    auc = motion_auc(x, y, z, w)
    # mean of |a sin| is 2a/pi; the band-pass passes 1.5 Hz almost unchanged
    assert auc == pytest.approx(2 * a / np.pi * 60.0, rel=0.01)
    assert motion_auc_windows((x, y, z), [w]) == [pytest.approx(auc)]
    assert math.isnan(motion_auc_windows((x, y, z), [w], offset_ms=40000)[0])


def test_motion_auc_still_is_near_zero():
    fs = 32.0
    n = int(70 * fs)
    axes = [Signal(np.full(n, v), fs) for v in (0.0, 0.0, 1.0)]
    assert motion_auc(*axes, Window(0, 60000)) < 1e-6
