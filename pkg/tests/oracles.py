"""Independent reference implementations used only by the tests."""
import math
from functools import lru_cache

import numpy as np


def all_monotone_paths(n):
    """Every path from (0,0) to (n-1,n-1) with steps (1,0), (0,1), (1,1)."""
    out = []

    def walk(i, j, acc):
        if (i, j) == (n - 1, n - 1):
            out.append(list(acc))
            return
        for di, dj in ((1, 1), (1, 0), (0, 1)):
            a, b = i + di, j + dj
            if a < n and b < n:
                acc.append((a, b))
                walk(a, b, acc)
                acc.pop()

    walk(0, 0, [(0, 0)])
    return out


def brute_force_dtw_cost(a, b):
    n = len(a)
    return min(sum(abs(a[i] - b[j]) for i, j in p) for p in all_monotone_paths(n))


def recursive_dtw_cost(a, b):
    """Memoised textbook recursion; independent of the iterative table."""
    a, b = list(map(float, a)), list(map(float, b))

    @lru_cache(maxsize=None)
    def D(i, j):
        c = abs(a[i] - b[j])
        if i == 0 and j == 0:
            return c
        best = math.inf
        if i > 0 and j > 0:
            best = min(best, D(i - 1, j - 1))
        if i > 0:
            best = min(best, D(i - 1, j))
        if j > 0:
            best = min(best, D(i, j - 1))
        return c + best

    return D(len(a) - 1, len(b) - 1)


def haurwitz_scalar(z_deg):
    if z_deg >= 90:
        return 0.0
    c = math.cos(math.radians(z_deg))
    return 1098.0 * c * math.exp(-0.057 / c)


def numeric_slope_integral(f, g, t0, t1, samples=200001):
    """Riemann estimate of the mean |f - g| on [t0, t1]."""
    t = np.linspace(t0, t1, samples)
    mid = 0.5 * (t[1:] + t[:-1])
    return float(np.mean(np.abs(f(mid) - g(mid))))


def door_feasible(t, y, p, m, eps):
    """Is there a line through point p within eps of every point p+1..m?

    Solved as a 1-D interval intersection of admissible slopes, exactly:
    integer data is compared by cross-multiplication, anything else with
    fractions.
    """
    ys = np.asarray(y[p:m + 1], dtype=np.float64)
    if float(eps).is_integer() and np.all(np.mod(ys, 1) == 0) and np.all(np.abs(ys) < 2**40):
        yi = ys.astype(np.int64)
        dt = np.asarray(t[p + 1:m + 1], dtype=np.int64) - int(t[p])
        lo_num = yi[1:] - int(eps) - yi[0]
        hi_num = yi[1:] + int(eps) - yi[0]
        # distinct rationals with these magnitudes are far apart in float64,
        # so the float arg-extrema are exact; the final comparison is integral
        k = int(np.argmax(lo_num / dt))
        j = int(np.argmin(hi_num / dt))
        return int(lo_num[k]) * int(dt[j]) <= int(hi_num[j]) * int(dt[k])
    from fractions import Fraction as F
    lo, hi = -math.inf, math.inf
    for k in range(p + 1, m + 1):
        dt = F(int(t[k]) - int(t[p]))
        lo = max(lo, (F(y[k]) - F(eps) - F(y[p])) / dt)
        hi = min(hi, (F(y[k]) + F(eps) - F(y[p])) / dt)
    return lo <= hi


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def check_segmentation(series, eps, segs):
    t, y = series.timestamps, series.values
    n = len(series)
    assert segs[0].start_index == 0 and segs[-1].end_index == n - 1
    for a, b in zip(segs, segs[1:]):
        assert a.end_index == b.start_index
    for k, s in enumerate(segs):
        p, c = s.start_index, s.end_index
        assert c > p
        assert door_feasible(t, y, p, c, eps)
        if k < len(segs) - 1:
            assert not door_feasible(t, y, p, c + 1, eps)
        chord = y[p] + (y[c] - y[p]) * (t[p:c + 1] - t[p]) / (t[c] - t[p])
        assert np.all(np.abs(y[p:c + 1] - chord) <= 2 * eps + 1e-9)


def least_squares(Z, y):
    """Closed-form affine fit: (coefficients, intercept) minimising the squared error."""
    sol = np.linalg.lstsq(np.c_[Z, np.ones(len(y))], y, rcond=None)[0]
    return sol[:-1], sol[-1]
