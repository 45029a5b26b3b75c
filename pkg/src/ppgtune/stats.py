"""Within-subject comparisons: repeated-measures ANOVA, paired t-tests, effect sizes.

p-values come from a self-contained regularized incomplete beta function
(Lentz continued fraction).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVariance, InvalidInput

_CF_TOL = 1e-12
_CF_MAX_ITER = 300
_TINY = 1e-300


def _betacf(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            break
    return h


def betainc_pair(a: float, b: float, x: float) -> tuple[float, float]:
    """``(I_x(a, b), 1 - I_x(a, b))``, each evaluated directly for accuracy."""
    if a <= 0 or b <= 0:
        raise InvalidInput("beta parameters must be positive")
    if x <= 0:
        return 0.0, 1.0
    if x >= 1:
        return 1.0, 0.0
    ln_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        lower = front * _betacf(a, b, x) / a
        return lower, 1.0 - lower
    upper = front * _betacf(b, a, 1.0 - x) / b
    return 1.0 - upper, upper


def betainc(a: float, b: float, x: float) -> float:
    return betainc_pair(a, b, x)[0]


def f_sf(f: float, d1: float, d2: float) -> float:
    if f <= 0:
        return 1.0
    return betainc_pair(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))[0]


def f_cdf(f: float, d1: float, d2: float) -> float:
    if f <= 0:
        return 0.0
    return betainc_pair(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))[1]


def t_cdf(t: float, df: float) -> float:
    tail = 0.5 * betainc_pair(df / 2.0, 0.5, df / (df + t * t))[0]
    return 1.0 - tail if t > 0 else tail


def t_sf(t: float, df: float) -> float:
    return t_cdf(-t, df)


def t_two_sided(t: float, df: float) -> float:
    return min(1.0, betainc_pair(df / 2.0, 0.5, df / (df + t * t))[0])


@dataclass(frozen=True)
class PairedSamples:
    condition_a: np.ndarray
    condition_b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.condition_a, dtype=float).reshape(-1)
        b = np.asarray(self.condition_b, dtype=float).reshape(-1)
        if a.shape != b.shape:
            raise InvalidInput("paired samples must have equal length")
        if len(a) < 2:
            raise InvalidInput("paired samples need at least 2 subjects")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidInput("paired samples must be finite")
        object.__setattr__(self, "condition_a", a)
        object.__setattr__(self, "condition_b", b)

    @property
    def differences(self) -> np.ndarray:
        return self.condition_a - self.condition_b


@dataclass(frozen=True)
class RmAnovaTable:
    f_stat: float
    df_treatment: int
    df_error: int
    p_value: float
    means: tuple[float, ...]
    ss_treatment: float
    ss_subjects: float
    ss_error: float


def rm_anova(data) -> RmAnovaTable:
    """One-way within-subjects ANOVA on an ``n_subjects x k_conditions`` matrix."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise InvalidInput("rm_anova needs a matrix with n >= 2 subjects and k >= 2 conditions")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("rm_anova does not accept missing cells")
    n, k = x.shape
    grand = x.mean()
    row = x.mean(axis=1, keepdims=True)
    col = x.mean(axis=0, keepdims=True)
    ss_subj = float(k * np.sum((row - grand) ** 2))
    ss_treat = float(n * np.sum((col - grand) ** 2))
    ss_err = float(np.sum((x - row - col + grand) ** 2))
    df_t = k - 1
    df_e = (k - 1) * (n - 1)
    scale = max(1.0, float(np.sum((x - grand) ** 2)))
    means = tuple(float(v) for v in col.ravel())
    if ss_treat <= 1e-24 * scale:
        return RmAnovaTable(0.0, df_t, df_e, 1.0, means, 0.0, ss_subj, ss_err)
    if ss_err <= 1e-24 * scale:
        raise DegenerateVariance("error variance is zero")
    f = (ss_treat / df_t) / (ss_err / df_e)
    return RmAnovaTable(f, df_t, df_e, f_sf(f, df_t, df_e), means, ss_treat, ss_subj, ss_err)


def paired_t(s: PairedSamples) -> tuple[float, float]:
    """Paired t statistic (a - b) and two-sided p with n - 1 degrees of freedom."""
    d = s.differences
    n = len(d)
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0:
        if mean == 0:
            return 0.0, 1.0
        raise DegenerateVariance("differences have zero variance")
    t = mean / (sd / math.sqrt(n))
    return t, t_two_sided(t, n - 1)


def bonferroni(p_values, m: int) -> list[float]:
    p = list(p_values)
    if m < len(p):
        raise InvalidInput("m must be at least the number of p-values")
    return [min(1.0, m * float(v)) for v in p]


def cohens_d_paired(s: PairedSamples) -> float:
    """Mean difference over the sample SD of differences."""
    d = s.differences
    sd = float(d.std(ddof=1))
    if sd == 0:
        raise DegenerateVariance("differences have zero variance")
    return float(d.mean()) / sd


def cohens_d_pooled(s: PairedSamples) -> float:
    """Mean difference over the root-mean of the two condition variances."""
    va = float(np.var(s.condition_a, ddof=1))
    vb = float(np.var(s.condition_b, ddof=1))
    sd = math.sqrt((va + vb) / 2.0)
    if sd == 0:
        raise DegenerateVariance("both conditions have zero variance")
    return float(s.condition_a.mean() - s.condition_b.mean()) / sd


@dataclass(frozen=True)
class PairwiseTest:
    a: str
    b: str
    t: float
    p: float
    p_bonferroni: float
    cohens_d: float


def compare_conditions(names, matrix, d_variant: str = "paired"):
    """RM-ANOVA over all columns plus Bonferroni-corrected pairwise paired t-tests.

    Rows with a non-finite cell are dropped first. Degenerate tests yield NaN
    entries instead of raising.
    """
    x = np.asarray(matrix, dtype=float)
    x = x[np.all(np.isfinite(x), axis=1)]
    try:
        anova = rm_anova(x)
    except (DegenerateVariance, InvalidInput):
        anova = None
    pairs = list(itertools.combinations(range(len(names)), 2))
    raw = []
    for i, j in pairs:
        try:
            s = PairedSamples(x[:, i], x[:, j])
            t, p = paired_t(s)
        except (DegenerateVariance, InvalidInput):
            raw.append((math.nan, math.nan, math.nan))
            continue
        try:
            d = cohens_d_paired(s) if d_variant == "paired" else cohens_d_pooled(s)
        except DegenerateVariance:
            d = math.nan
        raw.append((t, p, d))
    finite_p = [r[1] for r in raw if not math.isnan(r[1])]
    corrected = iter(bonferroni(finite_p, len(pairs)))
    tests = []
    for (i, j), (t, p, d) in zip(pairs, raw):
        pb = math.nan if math.isnan(p) else next(corrected)
        tests.append(PairwiseTest(names[i], names[j], t, p, pb, d))
    return anova, tests, int(x.shape[0])
