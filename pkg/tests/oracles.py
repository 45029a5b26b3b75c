"""Reference implementations used only by the tests.

Each is written from the textbook definition, deliberately slow and
independent of the package code.
"""
import itertools
import math


def max_matching(p, e, tol):
    """Maximum bipartite matching size via augmenting paths (Kuhn)."""
    adj = [[j for j, ej in enumerate(e) if abs(pi - ej) <= tol] for pi in p]
    owner = [-1] * len(e)

    def augment(i, seen):
        for j in adj[i]:
            if j in seen:
                continue
            seen.add(j)
            if owner[j] == -1 or augment(owner[j], seen):
                owner[j] = i
                return True
        return False

    return sum(augment(i, set()) for i in range(len(p)))


def brute_force_fronts(points):
    pts = [tuple(p) for p in points]
    remaining = set(range(len(pts)))
    fronts = []

    def dom(a, b):
        return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))

    while remaining:
        front = sorted(i for i in remaining if not any(dom(pts[j], pts[i]) for j in remaining if j != i))
        fronts.append(front)
        remaining -= set(front)
    return fronts


def dominated_by_any(point, others):
    return any(
        all(o <= p for o, p in zip(other, point)) and any(o < p for o, p in zip(other, point)) for other in others
    )


def rmssd_loop(ibis):
    d = [ibis[i + 1] - ibis[i] for i in range(len(ibis) - 1)]
    return math.sqrt(sum(x * x for x in d) / len(d))


def pearson_loop(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def paired_t_formula(a, b):
    d = [x - y for x, y in zip(a, b)]
    n = len(d)
    m = sum(d) / n
    sd = math.sqrt(sum((x - m) ** 2 for x in d) / (n - 1))
    return m / (sd / math.sqrt(n))


def rm_anova_formula(x):
    """F statistic from the textbook sums of squares, with explicit loops."""
    n = len(x)
    k = len(x[0])
    grand = sum(sum(r) for r in x) / (n * k)
    col = [sum(x[i][j] for i in range(n)) / n for j in range(k)]
    row = [sum(r) / k for r in x]
    ss_total = sum((x[i][j] - grand) ** 2 for i in range(n) for j in range(k))
    ss_treat = n * sum((c - grand) ** 2 for c in col)
    ss_subj = k * sum((r - grand) ** 2 for r in row)
    ss_err = ss_total - ss_treat - ss_subj
    return (ss_treat / (k - 1)) / (ss_err / ((k - 1) * (n - 1)))


def scalarized_choice(front):
    """Spreadsheet-style recomputation of the min-max scalarized pick.

    ``front`` is a list of ((f_low, f_high), (f1, mae_ibi, mae_rmssd)).
    """
    cols = list(zip(*[t for _, t in front]))

    def norm(v, col):
        lo, hi = min(col), max(col)
        return 0.0 if hi == lo else (v - lo) / (hi - lo)

    best = None
    for (pair, (f1, ibi, rm)) in front:
        score = -norm(f1, cols[0]) + norm(ibi, cols[1]) + norm(rm, cols[2])
        key = (score, rm, ibi, pair[0], pair[1])
        if best is None or key < best[0]:
            best = (key, pair)
    return best[1]


def all_subsets_matching(p, e, tol):
    """Exhaustive matching size for tiny instances (used to cross-check Kuhn)."""
    edges = [(i, j) for i in range(len(p)) for j in range(len(e)) if abs(p[i] - e[j]) <= tol]
    best = 0
    for r in range(min(len(p), len(e)), 0, -1):
        for combo in itertools.combinations(edges, r):
            if len({i for i, _ in combo}) == r and len({j for _, j in combo}) == r:
                return r
    return best
