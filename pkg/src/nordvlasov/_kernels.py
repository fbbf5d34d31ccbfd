"""Compiled inner loops: particle push, moment deposition, retarded integral.

Grids are uniform, node ``i`` at ``x_min + i*dx``. Interpolation and
deposition both use the linear (cloud-in-cell) shape.
"""

import math
import os

import numba as nb
import numpy as np

# skip the TBB probe (and its warning on old TBB builds) unless asked for
if "NUMBA_THREADING_LAYER" not in os.environ:
    nb.config.THREADING_LAYER = "omp"

# moment rows produced by deposit_moments
MU, SIGMA, KIN, MOM, JRAW = 0, 1, 2, 3, 4
N_BASE_MOMENTS = 5


@nb.njit(cache=True, inline="always")
def _lerp(grid, j, w):
    return (1.0 - w) * grid[j] + w * grid[j + 1]


@nb.njit(cache=True)
def _rhs(p1, p2, p3, ft, fx):
    g = math.sqrt(1.0 + p1 * p1 + p2 * p2 + p3 * p3)
    v1 = p1 / g
    s = ft + v1 * fx
    return v1, -s * p1 - fx / g, -s * p2, -s * p3


@nb.njit(cache=True, parallel=True)
def rk2_push(x, p, dt, x_min, dx, ft_a, fx_a, ft_b, fx_b, x_out, p_out, flags):
    """Explicit midpoint step of the slab characteristic system.

    Stage one uses the slice ``a`` (time t); stage two the average of ``a``
    and ``b`` (time t + dt/2). ``flags[k]`` is 1 if particle ``k`` left the
    grid, 2 if its speed reached 1.
    """
    n = x.shape[0]
    nx = ft_a.shape[0]
    inv_dx = 1.0 / dx
    for k in nb.prange(n):
        flags[k] = 0
        xx = x[k]
        p1 = p[k, 0]
        p2 = p[k, 1]
        p3 = p[k, 2]
        s = (xx - x_min) * inv_dx
        j = int(math.floor(s))
        if j < 0 or j > nx - 2:
            flags[k] = 1
            x_out[k] = xx
            p_out[k, 0] = p1
            p_out[k, 1] = p2
            p_out[k, 2] = p3
            continue
        w = s - j
        v1, d1, d2, d3 = _rhs(p1, p2, p3, _lerp(ft_a, j, w), _lerp(fx_a, j, w))
        xm = xx + 0.5 * dt * v1
        q1 = p1 + 0.5 * dt * d1
        q2 = p2 + 0.5 * dt * d2
        q3 = p3 + 0.5 * dt * d3
        s = (xm - x_min) * inv_dx
        j = int(math.floor(s))
        if j < 0 or j > nx - 2:
            flags[k] = 1
            x_out[k] = xx
            p_out[k, 0] = p1
            p_out[k, 1] = p2
            p_out[k, 2] = p3
            continue
        w = s - j
        ft = 0.5 * (_lerp(ft_a, j, w) + _lerp(ft_b, j, w))
        fx = 0.5 * (_lerp(fx_a, j, w) + _lerp(fx_b, j, w))
        v1m, e1, e2, e3 = _rhs(q1, q2, q3, ft, fx)
        if abs(v1) >= 1.0 or abs(v1m) >= 1.0:
            flags[k] = 2
        x_out[k] = xx + dt * v1m
        p_out[k, 0] = p1 + dt * e1
        p_out[k, 1] = p2 + dt * e2
        p_out[k, 2] = p3 + dt * e3


@nb.njit(cache=True)
def _deposit_range(lo, hi, x, p, a, c, phi, x_min, dx, qs, out, bad):
    nx = phi.shape[0]
    inv_dx = 1.0 / dx
    nq = qs.shape[0]
    for k in range(lo, hi):
        s = (x[k] - x_min) * inv_dx
        j = int(math.floor(s))
        if j < 0 or j > nx - 2:
            bad[0] += 1
            continue
        w = s - j
        ph = (1.0 - w) * phi[j] + w * phi[j + 1]
        fv = a[k] * c[k] * math.exp(ph)
        p1 = p[k, 0]
        g = math.sqrt(1.0 + p1 * p1 + p[k, 1] * p[k, 1] + p[k, 2] * p[k, 2])
        vals0 = fv / g
        vals2 = fv * g
        vals3 = fv * p1
        vals4 = fv * p1 / g
        w0 = 1.0 - w
        out[MU, j] += w0 * vals0
        out[MU, j + 1] += w * vals0
        out[SIGMA, j] += w0 * fv
        out[SIGMA, j + 1] += w * fv
        out[KIN, j] += w0 * vals2
        out[KIN, j + 1] += w * vals2
        out[MOM, j] += w0 * vals3
        out[MOM, j + 1] += w * vals3
        out[JRAW, j] += w0 * vals4
        out[JRAW, j + 1] += w * vals4
        if nq > 0:
            vol = c[k] * math.exp(-3.0 * ph)
            for iq in range(nq):
                val = a[k] ** qs[iq] * vol
                out[N_BASE_MOMENTS + iq, j] += w0 * val
                out[N_BASE_MOMENTS + iq, j + 1] += w * val


@nb.njit(cache=True, parallel=True)
def deposit_moments(x, p, a, c, phi, x_min, dx, qs, nchunks):
    """CIC deposition into ``nchunks`` private grids, merged in chunk order.

    Returns the (unnormalised) moment rows and the out-of-domain count. For
    a fixed ``nchunks`` the result is independent of thread scheduling.
    """
    n = x.shape[0]
    nx = phi.shape[0]
    nrow = N_BASE_MOMENTS + qs.shape[0]
    parts = np.zeros((nchunks, nrow, nx))
    bad = np.zeros((nchunks, 1), dtype=np.int64)
    size = (n + nchunks - 1) // nchunks
    for ch in nb.prange(nchunks):
        lo = ch * size
        hi = min(n, lo + size)
        if lo < hi:
            _deposit_range(lo, hi, x, p, a, c, phi, x_min, dx, qs, parts[ch], bad[ch])
    out = np.zeros((nrow, nx))
    nbad = 0
    for ch in range(nchunks):
        out += parts[ch]
        nbad += bad[ch, 0]
    return out, nbad


@nb.njit(cache=True)
def _segment_integral(mu, cum, x_min, dx, a, b):
    """Exact integral over [a, b] of the linear interpolant of ``mu``.

    ``mu`` is taken as zero outside the grid. Assembled from non-negative
    pieces so that the result is >= 0 in floating point whenever mu >= 0.
    """
    nx = mu.shape[0]
    x_hi = x_min + (nx - 1) * dx
    if a < x_min:
        a = x_min
    if b > x_hi:
        b = x_hi
    if b <= a:
        return 0.0
    sa = (a - x_min) / dx
    sb = (b - x_min) / dx
    ja = min(int(math.floor(sa)), nx - 2)
    jb = min(int(math.floor(sb)), nx - 2)
    xa = min(max(sa - ja, 0.0), 1.0)
    xb = min(max(sb - jb, 0.0), 1.0)
    if ja == jb:
        if xb <= xa:
            return 0.0
        m = 0.5 * (xa + xb)
        return dx * (xb - xa) * (mu[ja] * (1.0 - m) + mu[ja + 1] * m)
    tail = dx * (1.0 - xa) * (mu[ja] * 0.5 * (1.0 - xa) + mu[ja + 1] * 0.5 * (1.0 + xa))
    head = dx * xb * (mu[jb] * (1.0 - 0.5 * xb) + mu[jb + 1] * 0.5 * xb)
    # cum is a running sum of non-negative cells, so monotone in floating
    # point and this difference cannot round below zero
    mid = cum[jb] - cum[ja + 1]
    return tail + mid + head


@nb.njit(cache=True, inline="always")
def _point(mu, x_min, dx, y):
    nx = mu.shape[0]
    s = (y - x_min) / dx
    j = int(math.floor(s))
    if j < 0 or j > nx - 1:
        return 0.0
    if j == nx - 1:
        return mu[nx - 1] if s == nx - 1 else 0.0
    w = s - j
    return (1.0 - w) * mu[j] + w * mu[j + 1]


@nb.njit(cache=True, parallel=True)
def duhamel_sums(levels, cums, s_times, weights, t, xs, x_min, dx, out):
    """Quadrature sums of the retarded integral at the points ``xs``.

    For each point and each stored level ``l`` with ``r = |t - s_l|``:
    ``out[0] += w_l * int_{x-r}^{x+r} mu_l``,
    ``out[1] += w_l * (mu_l(x+r) + mu_l(x-r))``,
    ``out[2] += w_l * (mu_l(x+r) - mu_l(x-r))``.
    Levels are summed in storage order for every point.
    """
    nl = levels.shape[0]
    npt = xs.shape[0]
    for i in nb.prange(npt):
        x = xs[i]
        acc0 = 0.0
        acc1 = 0.0
        acc2 = 0.0
        for l in range(nl):
            r = abs(t - s_times[l])
            wl = weights[l]
            mu = levels[l]
            acc0 += wl * _segment_integral(mu, cums[l], x_min, dx, x - r, x + r)
            mp = _point(mu, x_min, dx, x + r)
            mm = _point(mu, x_min, dx, x - r)
            acc1 += wl * (mp + mm)
            acc2 += wl * (mp - mm)
        out[0, i] = acc0
        out[1, i] = acc1
        out[2, i] = acc2


@nb.njit(cache=True)
def interp_grid(grid, x_min, dx, xs, out):
    """Linear interpolation of ``grid`` at ``xs``; returns out-of-grid count."""
    nx = grid.shape[0]
    bad = 0
    for k in range(xs.shape[0]):
        s = (xs[k] - x_min) / dx
        j = int(math.floor(s))
        if j < 0 or j > nx - 1 or (j == nx - 1 and s != nx - 1):
            out[k] = np.nan
            bad += 1
            continue
        if j == nx - 1:
            out[k] = grid[nx - 1]
            continue
        w = s - j
        out[k] = (1.0 - w) * grid[j] + w * grid[j + 1]
    return bad
