"""Cutoff search: grid sweep, NSGA-II and min-max scalarized selection.

All three objectives are minimized: ``(-mean F1, MAE IBI, MAE RMSSD)``.
Cutoffs are evaluated on a 0.1 Hz lattice (integer decihertz keys), so
every evaluation is memoizable and comparable with the exhaustive grid.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .beats import BeatSeries, detect_ppg_beats
from .errors import EmptyInput, InvalidInput, NoBeatsDetected
from .filters import apply_zero_phase, design_bandpass, ppg_filter
from .metrics import SegmentMetrics, best_lag, window_metrics
from .signals import Signal, Window, round_half_up

PENALTY = 1e6
LOW_BOUNDS = (0.4, 1.7)
HIGH_BOUNDS = (1.2, 5.0)
BASE_PAIR = (0.5, 4.0)
LATTICE_HZ = 0.1


@dataclass(frozen=True, order=True, slots=True)
class CutoffPair:
    f_low: float
    f_high: float

    def __post_init__(self):
        if not self.f_low < self.f_high:
            raise InvalidInput(f"f_low must be below f_high, got ({self.f_low}, {self.f_high})")

    @classmethod
    def from_key(cls, key, step=LATTICE_HZ) -> "CutoffPair":
        return cls(round(key[0] * step, 10), round(key[1] * step, 10))

    def key(self, step=LATTICE_HZ) -> tuple[int, int]:
        return lattice_key(self.f_low, self.f_high, step)


def lattice_key(f_low, f_high, step=LATTICE_HZ) -> tuple[int, int]:
    return round_half_up(f_low / step + 1e-9), round_half_up(f_high / step + 1e-9)


@dataclass(frozen=True)
class ObjectiveTriple:
    neg_f1: float
    mae_ibi: float
    mae_rmssd: float
    feasible: bool = True

    @classmethod
    def penalty(cls) -> "ObjectiveTriple":
        return cls(0.0, PENALTY, PENALTY, False)

    @property
    def f1(self) -> float:
        return -self.neg_f1

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.neg_f1, self.mae_ibi, self.mae_rmssd)


class Level(str, Enum):
    BASE = "base"
    GLOBAL = "global"
    PER_PERSON_TASK = "per_person_task"


@dataclass(frozen=True)
class OptimizationScope:
    level: Level
    participant: str | None = None
    task: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "level", Level(self.level))


def grid_combinations(low=LOW_BOUNDS, high=HIGH_BOUNDS, step: float = LATTICE_HZ) -> list[CutoffPair]:
    """All lattice pairs with ``f_low < f_high``; ranges are inclusive ``(min, max)``."""
    if not step > 0:
        raise InvalidInput("step must be positive")
    lo0, lo1 = (low, low) if np.isscalar(low) else low
    hi0, hi1 = (high, high) if np.isscalar(high) else high
    lows = range(round_half_up(lo0 / step + 1e-9), round_half_up(lo1 / step + 1e-9) + 1)
    highs = range(round_half_up(hi0 / step + 1e-9), round_half_up(hi1 / step + 1e-9) + 1)
    value = {k: round(k * step, 10) for k in (*lows, *highs)}
    return [CutoffPair(value[a], value[b]) for a in lows for b in highs if a < b]


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class EvalSettings:
    ppg_order: int = 4
    stopband_atten_db: float = 40.0
    ma_window_ms: float = 750.0
    min_bpm: float = 40.0
    max_bpm: float = 180.0
    lookback_ms: float = 2000.0
    tolerance_ms: float = 150.0
    lag_search_ms: int = 2000
    lag_step_ms: int = 20
    min_valid_beats: int = 10
    ibi_min_ms: float = 300.0
    ibi_max_ms: float = 2000.0
    max_dev_frac: float = 0.25


@dataclass
class Recording:
    """One participant/task recording ready for cutoff evaluation.

    ``ecg_beats`` and ``windows`` live on the ECG time axis;
    ``ppg_offset_ms`` converts PPG beat times onto it.
    """

    participant: str
    task: str
    ppg: Signal
    ecg_beats: BeatSeries
    windows: list[Window]
    ppg_offset_ms: int = 0
    motion: list[float] | None = None


@dataclass(frozen=True)
class RecordingResult:
    triple: ObjectiveTriple
    lag_ms: int
    segments: tuple[SegmentMetrics, ...]
    ppg_beats: BeatSeries | None = None


def aggregate_segments(segments: Sequence[SegmentMetrics]) -> ObjectiveTriple:
    valid = [s for s in segments if s.valid]
    if not valid:
        return ObjectiveTriple.penalty()
    f1 = float(np.mean([s.f1 for s in valid]))
    ibi = float(np.mean([s.abs_err_ibi_ms for s in valid]))
    rm = float(np.mean([s.abs_err_rmssd_ms for s in valid]))
    return ObjectiveTriple(-f1, ibi, rm, True)


def evaluate_recording(rec: Recording, pair: CutoffPair, settings: EvalSettings = EvalSettings()) -> RecordingResult:
    """Filter, detect, align and score one recording at one cutoff pair."""
    st = settings
    if not rec.windows or len(rec.ecg_beats) == 0:
        return RecordingResult(ObjectiveTriple.penalty(), 0, ())
    spec = ppg_filter(pair.f_low, pair.f_high, st.ppg_order, st.stopband_atten_db)
    try:
        filtered = apply_zero_phase(design_bandpass(spec, rec.ppg.fs), rec.ppg)
        beats = detect_ppg_beats(
            filtered, ma_window_ms=st.ma_window_ms, min_bpm=st.min_bpm, max_bpm=st.max_bpm, lookback_ms=st.lookback_ms
        )
    except NoBeatsDetected:
        return RecordingResult(ObjectiveTriple.penalty(), 0, ())
    if len(beats) == 0:
        return RecordingResult(ObjectiveTriple.penalty(), 0, ())
    beats = beats.shifted(rec.ppg_offset_ms)
    lag = best_lag(beats, rec.ecg_beats, st.tolerance_ms, st.lag_search_ms, st.lag_step_ms)
    segs = window_metrics(
        beats,
        rec.ecg_beats,
        lag,
        rec.windows,
        tolerance_ms=st.tolerance_ms,
        min_valid_beats=st.min_valid_beats,
        ibi_min_ms=st.ibi_min_ms,
        ibi_max_ms=st.ibi_max_ms,
        max_dev_frac=st.max_dev_frac,
        motion=rec.motion,
    )
    return RecordingResult(aggregate_segments(segs), lag, tuple(segs), beats)


def pool(triples: Iterable[ObjectiveTriple]) -> ObjectiveTriple:
    """Unweighted mean of per-recording triples; penalty if none is feasible.

    Infeasible recordings enter the mean with their penalty values, so a
    cutoff pair that breaks detection on one recording cannot look better
    than one that keeps every recording usable.
    """
    ts = list(triples)
    if not any(t.feasible for t in ts):
        return ObjectiveTriple.penalty()
    return ObjectiveTriple(
        float(np.mean([t.neg_f1 for t in ts])),
        float(np.mean([t.mae_ibi for t in ts])),
        float(np.mean([t.mae_rmssd for t in ts])),
        True,
    )


class Dataset:
    """Recordings plus per-(recording, lattice cutoff) memos.

    Two levels are kept: full results (with per-window metrics) and bare
    objective triples. Triples can be seeded from a persistent cache or a
    parallel sweep; full results are recomputed on demand.
    """

    def __init__(self, recordings: Sequence[Recording], settings: EvalSettings = EvalSettings(), step=LATTICE_HZ):
        self.recordings = list(recordings)
        self.settings = settings
        self.step = step
        self._memo: dict[tuple[int, tuple[int, int]], RecordingResult] = {}
        self._triples: dict[tuple[int, tuple[int, int]], ObjectiveTriple] = {}

    def __len__(self):
        return len(self.recordings)

    def indices(self, scope: OptimizationScope) -> list[int]:
        if scope.level is Level.PER_PERSON_TASK:
            return [
                i
                for i, r in enumerate(self.recordings)
                if (scope.participant is None or r.participant == scope.participant)
                and (scope.task is None or r.task == scope.task)
            ]
        return list(range(len(self.recordings)))

    def result(self, i: int, pair: CutoffPair) -> RecordingResult:
        key = (i, pair.key(self.step))
        res = self._memo.get(key)
        if res is None:
            res = evaluate_recording(self.recordings[i], CutoffPair.from_key(key[1], self.step), self.settings)
            self._memo[key] = res
            self._triples[key] = res.triple
        return res

    def triple(self, i: int, pair: CutoffPair) -> ObjectiveTriple:
        t = self._triples.get((i, pair.key(self.step)))
        return t if t is not None else self.result(i, pair).triple

    def seed_memo(self, i: int, key: tuple[int, int], result: RecordingResult):
        self._memo[(i, key)] = result
        self._triples[(i, key)] = result.triple

    def seed_triple(self, i: int, key: tuple[int, int], triple: ObjectiveTriple):
        self._triples[(i, key)] = triple

    def memo_items(self):
        return self._memo.items()

    def triples_for(self, i: int) -> dict[tuple[int, int], ObjectiveTriple]:
        return {k: t for (j, k), t in self._triples.items() if j == i}

    def precompute(self, pairs: Sequence[CutoffPair], jobs: int = 1):
        """Fill the triple memo for every recording at ``pairs``.

        With ``jobs > 1`` recordings are spread over worker processes; the
        evaluation is pure, so the memo content does not depend on ``jobs``.
        """
        keys = sorted({p.key(self.step) for p in pairs})
        todo = []
        for i in range(len(self.recordings)):
            missing = [k for k in keys if (i, k) not in self._triples]
            if missing:
                todo.append((i, missing))
        if not todo:
            return
        if jobs <= 1 or len(todo) == 1:
            for i, missing in todo:
                for k in missing:
                    self.triple(i, CutoffPair.from_key(k, self.step))
            return
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futs = [
                (i, ex.submit(_evaluate_keys, self.recordings[i], missing, self.settings, self.step))
                for i, missing in todo
            ]
            for i, fut in futs:
                for k, t in fut.result():
                    self._triples[(i, k)] = t


def _evaluate_keys(rec, keys, settings, step):
    return [(k, evaluate_recording(rec, CutoffPair.from_key(k, step), settings).triple) for k in keys]


def evaluate_cutoffs(pair: CutoffPair, scope: OptimizationScope, data: Dataset) -> ObjectiveTriple:
    """Objective triple of one cutoff pair over the recordings in ``scope``."""
    idx = data.indices(scope)
    if not idx:
        return ObjectiveTriple.penalty()
    return pool(data.triple(i, pair) for i in idx)


# ---------------------------------------------------------------------------
# dominance and NSGA-II


def _matrix(points) -> np.ndarray:
    rows = [p.as_tuple() if isinstance(p, ObjectiveTriple) else tuple(p) for p in points]
    if not rows:
        return np.empty((0, 3))
    return np.asarray(rows, dtype=float).reshape(len(rows), -1)


def dominates(a, b) -> bool:
    a = np.asarray(a.as_tuple() if isinstance(a, ObjectiveTriple) else a, dtype=float)
    b = np.asarray(b.as_tuple() if isinstance(b, ObjectiveTriple) else b, dtype=float)
    return bool(np.all(a <= b) and np.any(a < b))


def front_ranks(points) -> np.ndarray:
    f = _matrix(points)
    if f.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    return _kernels.front_rank(np.ascontiguousarray(f))


def non_dominated_sort(points) -> list[list[int]]:
    """Pareto fronts as lists of indices, best front first."""
    rank = front_ranks(points)
    if rank.size == 0:
        return []
    return [np.flatnonzero(rank == r).tolist() for r in range(int(rank.max()) + 1)]


def crowding_distance(f: np.ndarray) -> np.ndarray:
    n, k = f.shape
    d = np.zeros(n)
    if n <= 2:
        d[:] = np.inf
        return d
    for o in range(k):
        order = np.argsort(f[:, o], kind="mergesort")
        col = f[order, o]
        span = col[-1] - col[0]
        d[order[0]] = d[order[-1]] = np.inf
        if span > 0:
            d[order[1:-1]] += (col[2:] - col[:-2]) / span
    return d


def _rank_and_crowd(f):
    rank = _kernels.front_rank(np.ascontiguousarray(f))
    crowd = np.zeros(len(f))
    for r in np.unique(rank):
        idx = np.flatnonzero(rank == r)
        crowd[idx] = crowding_distance(f[idx])
    return rank, crowd


def _repair(x, lb, ub, eps):
    lo, hi = x
    if lo > hi:
        lo, hi = hi, lo
    lo = min(max(lo, lb[0]), ub[0])
    hi = min(max(hi, lb[1]), ub[1])
    if hi - lo < eps:
        hi = min(lo + eps, ub[1])
        if hi - lo < eps:
            lo = max(hi - eps, lb[0])
    return np.array([lo, hi])


def _sbx_pair(x1, x2, lb, ub, eta, p_c, rng):
    c1 = x1.copy()
    c2 = x2.copy()
    if rng.random() > p_c:
        return c1, c2
    for v in range(len(x1)):
        u_var = rng.random()
        u = rng.random()
        u_swap = rng.random()
        if u_var > 0.5 or abs(x1[v] - x2[v]) <= 1e-14:
            continue
        y1, y2 = min(x1[v], x2[v]), max(x1[v], x2[v])
        yl, yu = lb[v], ub[v]
        inv = 1.0 / (eta + 1.0)

        def betaq(beta):
            alpha = 2.0 - beta ** -(eta + 1.0)
            if u <= 1.0 / alpha:
                return (u * alpha) ** inv
            return (1.0 / (2.0 - u * alpha)) ** inv

        b1 = betaq(1.0 + 2.0 * (y1 - yl) / (y2 - y1))
        b2 = betaq(1.0 + 2.0 * (yu - y2) / (y2 - y1))
        a = min(max(0.5 * ((y1 + y2) - b1 * (y2 - y1)), yl), yu)
        b = min(max(0.5 * ((y1 + y2) + b2 * (y2 - y1)), yl), yu)
        if u_swap < 0.5:
            a, b = b, a
        c1[v], c2[v] = a, b
    return c1, c2


def _poly_mutation(x, lb, ub, eta, p_m, rng):
    y = x.copy()
    for v in range(len(x)):
        u_var = rng.random()
        u = rng.random()
        if u_var > p_m:
            continue
        yl, yu = lb[v], ub[v]
        span = yu - yl
        if span <= 0:
            continue
        d1 = (y[v] - yl) / span
        d2 = (yu - y[v]) / span
        p = 1.0 / (eta + 1.0)
        if u < 0.5:
            val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)
            dq = val**p - 1.0
        else:
            val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)
            dq = 1.0 - val**p
        y[v] = min(max(y[v] + dq * span, yl), yu)
    return y


@dataclass(frozen=True)
class NsgaParams:
    pop_size: int = 40
    generations: int = 25
    eta_c: float = 15.0
    p_c: float = 0.9
    eta_m: float = 20.0
    p_m: float = 0.5


def nsga2(
    evaluate: Callable[[CutoffPair], ObjectiveTriple],
    bounds=(LOW_BOUNDS, HIGH_BOUNDS),
    pop_size: int = 40,
    generations: int = 25,
    seed: int = 0,
    eta_c: float = 15.0,
    p_c: float = 0.9,
    eta_m: float = 20.0,
    p_m: float = 0.5,
    lattice: float | None = LATTICE_HZ,
) -> list[tuple[CutoffPair, ObjectiveTriple]]:
    """NSGA-II over ``(f_low, f_high)``.

    Candidates are continuous within ``bounds``; each is snapped to the
    ``lattice`` before evaluation and evaluations are memoized per lattice
    point. Returns the final first front, deduplicated on the lattice and
    sorted by cutoffs. Random draws happen only in the sequential
    generation loop, so results are fixed by ``seed``.
    """
    if pop_size < 4 or pop_size % 2:
        raise InvalidInput("pop_size must be even and >= 4")
    if generations < 0:
        raise InvalidInput("generations must be non-negative")
    (l0, l1), (h0, h1) = bounds
    if not (l0 < l1 and h0 < h1 and l0 < h1 and l0 > 0):
        raise InvalidInput(f"invalid bounds {bounds}")
    lb = np.array([l0, h0], dtype=float)
    ub = np.array([l1, h1], dtype=float)
    eps = lattice if lattice else 1e-6
    rng = np.random.Generator(np.random.PCG64(seed))
    memo: dict = {}

    def snap(x):
        if lattice:
            k = lattice_key(x[0], x[1], lattice)
            return k, (k[0] * lattice, k[1] * lattice)
        return (float(x[0]), float(x[1])), (float(x[0]), float(x[1]))

    def ev(x):
        k, (lo, hi) = snap(x)
        if k not in memo:
            if lattice and k[0] >= k[1]:
                memo[k] = ObjectiveTriple.penalty()
            else:
                pair = CutoffPair.from_key(k, lattice) if lattice else CutoffPair(lo, hi)
                memo[k] = evaluate(pair)
        return memo[k]

    X = rng.uniform(lb, ub, size=(pop_size, 2))
    X = np.array([_repair(x, lb, ub, eps) for x in X])
    T = [ev(x) for x in X]
    F = _matrix(T)
    rank, crowd = _rank_and_crowd(F)

    def better(a, b):
        if rank[a] != rank[b]:
            return a if rank[a] < rank[b] else b
        if crowd[a] != crowd[b]:
            return a if crowd[a] > crowd[b] else b
        return a

    for _ in range(generations):
        picks = rng.integers(0, pop_size, size=(pop_size, 2))
        parents = [better(int(a), int(b)) for a, b in picks]
        kids = []
        for i in range(0, pop_size, 2):
            c1, c2 = _sbx_pair(X[parents[i]], X[parents[i + 1]], lb, ub, eta_c, p_c, rng)
            kids.append(_repair(_poly_mutation(c1, lb, ub, eta_m, p_m, rng), lb, ub, eps))
            kids.append(_repair(_poly_mutation(c2, lb, ub, eta_m, p_m, rng), lb, ub, eps))
        K = np.array(kids)
        TK = [ev(x) for x in K]
        XA = np.vstack((X, K))
        TA = T + TK
        FA = _matrix(TA)
        r_all, c_all = _rank_and_crowd(FA)
        chosen = []
        for r in range(int(r_all.max()) + 1):
            idx = np.flatnonzero(r_all == r)
            if len(chosen) + len(idx) <= pop_size:
                chosen.extend(idx.tolist())
            else:
                need = pop_size - len(chosen)
                order = np.argsort(-c_all[idx], kind="mergesort")
                chosen.extend(idx[order[:need]].tolist())
            if len(chosen) >= pop_size:
                break
        chosen = np.array(chosen)
        X = XA[chosen]
        T = [TA[i] for i in chosen]
        F = FA[chosen]
        rank, crowd = _rank_and_crowd(F)

    out = {}
    for i in np.flatnonzero(rank == 0):
        k, (lo, hi) = snap(X[i])
        if k in out or (lattice and k[0] >= k[1]):
            continue
        pair = CutoffPair.from_key(k, lattice) if lattice else CutoffPair(lo, hi)
        out[k] = (pair, T[i])
    return [out[k] for k in sorted(out)]


# ---------------------------------------------------------------------------
# scalarized choice


def _normalizers(triples):
    f = _matrix(triples)
    lo = f.min(axis=0)
    span = f.max(axis=0) - lo
    return lo, span


def scalarized_scores(triples, reference=None) -> np.ndarray:
    """``-F1_norm + IBI_norm + RMSSD_norm`` with min-max bounds from ``reference``.

    A constant objective normalizes to 0.
    """
    ref = triples if reference is None else reference
    lo, span = _normalizers(ref)
    f = _matrix(triples)
    safe = np.where(span > 0, span, 1.0)
    norm = np.where(span > 0, (f - lo) / safe, 0.0)
    f1_norm = np.where(span[0] > 0, (-f[:, 0] - (-lo[0] - span[0])) / safe[0], 0.0)
    return -f1_norm + norm[:, 1] + norm[:, 2]


def _choose(front, scores):
    keys = [
        (float(s), t.mae_rmssd, t.mae_ibi, p.f_low, p.f_high)
        for (p, t), s in zip(front, scores)
    ]
    return min(range(len(front)), key=lambda i: keys[i])


def select_scalarized(front: Sequence[tuple[CutoffPair, ObjectiveTriple]]) -> tuple[CutoffPair, ObjectiveTriple]:
    """Member of ``front`` minimizing the min-max scalarized score.

    Ties go to lower MAE RMSSD, then lower MAE IBI, then lower f_low.
    """
    if not front:
        raise EmptyInput("cannot select from an empty front")
    scores = scalarized_scores([t for _, t in front])
    return front[_choose(front, scores)]


def select_with_injection(front, injected):
    """Scalarized choice after adding ``injected`` (e.g. the pooled filter) to ``front``.

    The candidate set is the non-dominated subset of ``front + [injected]``;
    normalization bounds come from it. Returns ``(choice, choice_score,
    injected_score)`` where ``injected_score`` uses the same bounds, so
    ``choice_score <= injected_score`` always holds.
    """
    cands = {}
    for p, t in list(front) + [injected]:
        cands.setdefault(p.key(), (p, t))
    items = [cands[k] for k in sorted(cands)]
    ranks = front_ranks([t for _, t in items])
    nd = [items[i] for i in np.flatnonzero(ranks == 0)]
    ref = [t for _, t in nd]
    scores = scalarized_scores(ref, ref)
    i = _choose(nd, scores)
    inj_score = float(scalarized_scores([injected[1]], ref)[0])
    return nd[i], float(scores[i]), inj_score
