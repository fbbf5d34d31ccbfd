"""Green's-function solver for the slab wave equation ``phi_tt - phi_xx = -mu``.

The field is kept split as ``phi = phi_hom + psi``: ``phi_hom`` is the free
wave of the initial data (d'Alembert), ``psi`` the retarded response to the
source with zero data,

    psi(t, x) = -1/2 int_{t0}^{t} int_{x-|t-s|}^{x+|t-s|} mu(s, y) dy |ds|.

``psi`` is evaluated with the trapezoid rule in ``s`` and exact integration
of the piecewise-linear ``mu`` in ``y``. Every quadrature weight is
non-negative, so ``psi <= 0`` holds exactly in floating point whenever the
stored source is non-negative. Time and space derivatives come from the
differentiated integral representations, never from differencing ``phi``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from . import _kernels
from .core import InitialData
from .errors import (HistoryGap, KernelWiderThanDomain, NegativeSource,
                     OutOfDomain)

__all__ = [
    "Mollifier", "mollify", "mollified_data", "FieldSlice", "MuHistory",
    "eval_phi_hom", "duhamel_psi", "assemble_field", "field_energy",
    "data_from_slice",
]


def _unit_bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


_BUMP_MASS = integrate.quad(lambda u: float(_unit_bump(u)), -1.0, 1.0,
                            epsabs=1e-13, epsrel=1e-12)[0]


@dataclass(frozen=True)
class Mollifier:
    """Discrete, even, non-negative, unit-sum convolution kernel.

    ``weights[k + half]`` multiplies the offset ``k * dx``. ``n == 0`` is the
    identity. Two constructions of the weights are available:

    ``sampled``
        the bump ``exp(-1/(1 - (x n)^2))`` sampled on the nodes within
        radius ``1/n`` and divided by its discrete sum. Collapses to the
        identity once ``1/n <= dx``.
    ``projected``
        the continuous bump integrated against the hat functions of the
        grid, i.e. the exact convolution of the piecewise-linear grid
        function, renormalised to unit sum. Reaches one node further than
        ``1/n`` but never degenerates while ``n`` grows.
    """

    n: int
    dx: float
    weights: np.ndarray
    kind: str = "sampled"

    @property
    def radius(self):
        return np.inf if self.n == 0 else 1.0 / self.n

    @property
    def half(self):
        return (self.weights.size - 1) // 2

    @property
    def offsets(self):
        return self.dx * np.arange(-self.half, self.half + 1)

    @classmethod
    def identity(cls, dx):
        return cls(0, dx, np.ones(1), "identity")

    @classmethod
    def build(cls, n, dx, kind="sampled"):
        if n == 0:
            return cls.identity(dx)
        r = 1.0 / n
        if kind == "sampled":
            half = int(np.floor(r / dx))
            if half * dx >= r:
                half -= 1
            k = np.arange(-half, half + 1)
            w = _unit_bump(k * dx * n)
        elif kind == "projected":
            half = int(np.ceil(r / dx))
            k = np.arange(-half, half + 1)
            w = np.array([_projected_weight(kk, dx, r) for kk in k])
        else:
            raise ValueError(f"unknown mollifier kind {kind!r}")
        w = 0.5 * (w + w[::-1])
        w = w / w.sum()
        return cls(int(n), float(dx), w, kind)


def _projected_weight(k, dx, r):
    # int delta_r(y) hat((y - k dx)/dx) dy, split at the hat's kinks
    lo, hi = max(-r, (k - 1) * dx), min(r, (k + 1) * dx)
    if hi <= lo:
        return 0.0
    pieces = [lo] + [v for v in ((k - 1) * dx, k * dx, (k + 1) * dx) if lo < v < hi] + [hi]

    def integrand(y):
        return float(_unit_bump(y / r)) / (r * _BUMP_MASS) * max(0.0, 1.0 - abs(y / dx - k))

    return sum(integrate.quad(integrand, a, b, epsabs=1e-15, epsrel=1e-13)[0]
               for a, b in zip(pieces[:-1], pieces[1:]))


def mollify(g, moll: Mollifier, times=1, periodic=False):
    """Apply the discrete convolution ``times`` times (zero padding or periodic)."""
    g = np.asarray(g, dtype=float)
    if moll.n == 0:
        return g.copy()
    if moll.weights.size > g.size:
        raise KernelWiderThanDomain(
            f"kernel of {moll.weights.size} points on a grid of {g.size}")
    out = g
    h = moll.half
    for _ in range(times):
        if periodic:
            acc = np.zeros_like(out)
            for j, w in enumerate(moll.weights):
                acc += w * np.roll(out, j - h)
            out = acc
        else:
            out = np.convolve(out, moll.weights, mode="same")
    return out


def mollified_data(data: InitialData, moll: Mollifier) -> InitialData:
    """Field data ``phi0 * delta_n`` and ``phi1 * delta_n`` on the grid stencil.

    ``f_in`` is left unchanged. Derivative and antiderivative are the same
    stencil applied to the exact ones.
    """
    if moll.n == 0:
        return data
    offs, w = moll.offsets, moll.weights

    def smear(fn):
        def out(y):
            y = np.asarray(y, dtype=float)
            acc = np.zeros_like(y)
            for o, wk in zip(offs, w):
                acc = acc + wk * fn(y - o)
            return acc
        return out

    return dataclasses.replace(
        data, phi0=smear(data.phi0), dphi0=smear(data.dphi0),
        phi1=smear(data.phi1), phi1_primitive=smear(data.phi1_primitive),
        support_radius=data.support_radius + moll.half * moll.dx,
        name=f"{data.name}*delta_{moll.n}")


@dataclass
class FieldSlice:
    t: float
    x_min: float
    dx: float
    phi_hom: np.ndarray
    hom_dt: np.ndarray
    hom_dx: np.ndarray
    psi: np.ndarray
    psi_dt: np.ndarray
    psi_dx: np.ndarray
    phi: np.ndarray = field(init=False)
    dphi_dt: np.ndarray = field(init=False)
    dphi_dx: np.ndarray = field(init=False)

    def __post_init__(self):
        self.recombine()

    def recombine(self):
        self.phi = self.phi_hom + self.psi
        self.dphi_dt = self.hom_dt + self.psi_dt
        self.dphi_dx = self.hom_dx + self.psi_dx

    @property
    def nx(self):
        return self.phi.shape[0]

    @property
    def grid(self):
        return self.x_min + self.dx * np.arange(self.nx)

    @classmethod
    def zero(cls, t, x_min, dx, nx):
        z = np.zeros(nx)
        return cls(t, x_min, dx, z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy())

    def at(self, xs):
        """``(phi, dphi_dt, dphi_dx)`` linearly interpolated at ``xs``."""
        xs = np.ascontiguousarray(xs, dtype=float)
        res = []
        for g in (self.phi, self.dphi_dt, self.dphi_dx):
            out = np.empty_like(xs)
            if _kernels.interp_grid(g, self.x_min, self.dx, xs, out):
                raise OutOfDomain("interpolation point outside the grid")
            res.append(out)
        return tuple(res)


class MuHistory:
    """Append-only record of source grids; level ``k`` sits at ``t0 + k*dt``.

    ``levels`` holds the deposited ``mu``; the retarded integral uses
    ``sources`` (``mu`` mollified twice, identical to ``levels`` when the
    mollifier is the identity) together with their running cell sums.
    """

    def __init__(self, dt, x_min, dx, moll: Optional[Mollifier] = None,
                 t0=0.0, source_times=2, tol=0.0):
        self.dt = float(dt)
        self.t0 = float(t0)
        self.x_min = float(x_min)
        self.dx = float(dx)
        self.moll = moll if moll is not None else Mollifier.identity(dx)
        self.source_times = source_times
        self.tol = tol
        self.levels = []
        self.sources = []
        self._cums = []

    def __len__(self):
        return len(self.levels)

    def time(self, k):
        return self.t0 + k * self.dt

    def _prepare(self, mu):
        mu = np.ascontiguousarray(mu, dtype=float)
        low = mu.min(initial=0.0)
        if low < -self.tol:
            raise NegativeSource(f"mu has a negative entry {low!r}")
        src = mollify(mu, self.moll, self.source_times)
        cell = 0.5 * self.dx * (src[:-1] + src[1:])
        return mu, src, np.concatenate(([0.0], np.cumsum(cell)))

    def append(self, mu):
        mu, src, cum = self._prepare(mu)
        self.levels.append(mu)
        self.sources.append(src)
        self._cums.append(cum)

    def overwrite_last(self, mu):
        mu, src, cum = self._prepare(mu)
        self.levels[-1] = mu
        self.sources[-1] = src
        self._cums[-1] = cum

    def remollified(self, moll, times):
        """Same raw levels under another mollifier (for the once-mollified variant)."""
        h = MuHistory(self.dt, self.x_min, self.dx, moll, self.t0, times, self.tol)
        for mu in self.levels:
            h.append(mu)
        return h

    def stacked(self, upto):
        return (np.array(self.sources[:upto]), np.array(self._cums[:upto]))


def eval_phi_hom(data: InitialData, t, grid, t0=0.0):
    """d'Alembert solution of the free wave equation with data at ``t0``.

    Returns ``(phi_hom, d/dt, d/dx)`` on ``grid``. The time and space
    derivatives use ``phi0'`` and ``phi1`` directly.
    """
    x = np.asarray(grid, dtype=float)
    tau = float(t) - float(t0)
    if not np.isfinite(tau):
        raise OutOfDomain("non-finite time")
    if data.support_radius + abs(tau) > max(-x[0], x[-1]) + 1e-12:
        raise OutOfDomain(
            f"free wave support R0 + |t| = {data.support_radius + abs(tau)} "
            f"leaves the grid [{x[0]}, {x[-1]}]")
    xp, xm = x + tau, x - tau
    f0p, f0m = data.phi0(xp), data.phi0(xm)
    d0p, d0m = data.dphi0(xp), data.dphi0(xm)
    f1p, f1m = data.phi1(xp), data.phi1(xm)
    prim = data.phi1_primitive
    phi = 0.5 * (f0p + f0m) + 0.5 * (prim(xp) - prim(xm))
    dphi_dt = 0.5 * (d0p - d0m) + 0.5 * (f1p + f1m)
    dphi_dx = 0.5 * (d0p + d0m) + 0.5 * (f1p - f1m)
    return phi, dphi_dt, dphi_dx


def _trapezoid_weights(nlev, dt, open_end):
    h = abs(dt)
    if open_end:
        w = np.full(nlev, h)
        if nlev:
            w[0] = 0.5 * h
        return w
    if nlev <= 1:
        return np.zeros(nlev)
    w = np.full(nlev, h)
    w[0] = w[-1] = 0.5 * h
    return w


def duhamel_psi(hist: MuHistory, t, grid, open_end=False):
    """Retarded part ``psi`` and its derivatives at time ``t`` on ``grid``.

    ``hist`` must hold every level from ``t0`` up to ``t``. With
    ``open_end=True`` the level at ``t`` itself may be missing: ``psi`` and
    ``psi_x`` do not depend on it, and ``psi_t`` then lacks the endpoint
    term ``-sign * |dt|/2 * mu(t, x)`` (see :func:`endpoint_term`).
    """
    steps = (float(t) - hist.t0) / hist.dt if hist.dt != 0 else 0.0
    nstep = int(round(steps))
    if abs(steps - nstep) > 1e-8 * max(1.0, abs(steps)) or nstep < 0:
        raise HistoryGap(f"t = {t} is not a level of the history")
    need = nstep if open_end else nstep + 1
    if len(hist) < need:
        raise HistoryGap(f"history holds {len(hist)} levels, {need} needed for t = {t}")
    x = np.ascontiguousarray(grid, dtype=float)
    if need == 0:
        z = np.zeros_like(x)
        return z, z.copy(), z.copy()
    sources, cums = hist.stacked(need)
    s_times = hist.t0 + hist.dt * np.arange(need)
    weights = _trapezoid_weights(need, hist.dt, open_end)
    out = np.zeros((3, x.size))
    _kernels.duhamel_sums(sources, cums, s_times, weights, float(t), x,
                          hist.x_min, hist.dx, out)
    sign = 1.0 if hist.dt >= 0 else -1.0
    return -0.5 * out[0], -0.5 * sign * out[1], -0.5 * out[2]


def endpoint_term(hist: MuHistory, level_source):
    """Contribution of the newest level to ``psi_t`` (zero for ``psi``, ``psi_x``)."""
    sign = 1.0 if hist.dt >= 0 else -1.0
    return -sign * 0.5 * abs(hist.dt) * level_source


def assemble_field(data: InitialData, hist: MuHistory, moll: Optional[Mollifier],
                   t, grid, t0=None, open_end=False) -> FieldSlice:
    """Full field slice: free wave of the (mollified) data plus retarded part.

    ``moll`` mollifies the field data once; the history carries its own
    mollifier for the source.
    """
    grid = np.asarray(grid, dtype=float)
    t0 = hist.t0 if t0 is None else t0
    eff = data if moll is None else mollified_data(data, moll)
    hom = eval_phi_hom(eff, t, grid, t0)
    psi = duhamel_psi(hist, t, grid, open_end=open_end)
    dx = grid[1] - grid[0]
    return FieldSlice(float(t), float(grid[0]), float(dx), *hom, *psi)


def field_energy(slc: FieldSlice, part="total"):
    """``1/2 int (phi_t^2 + phi_x^2) dx`` by the trapezoid rule."""
    if part == "hom":
        ft, fx = slc.hom_dt, slc.hom_dx
    elif part == "psi":
        ft, fx = slc.psi_dt, slc.psi_dx
    else:
        ft, fx = slc.dphi_dt, slc.dphi_dx
    dens = 0.5 * (ft * ft + fx * fx)
    return float(slc.dx * (dens.sum() - 0.5 * (dens[0] + dens[-1])))


def data_from_slice(slc: FieldSlice, template: Optional[InitialData] = None) -> InitialData:
    """Field data at ``slc.t`` as an :class:`InitialData` (restart / time reversal).

    ``phi`` uses a cubic Hermite interpolant of ``(phi, phi_x)``, ``phi_t`` a
    clamped cubic spline with its exact antiderivative; all vanish off-grid.
    """
    x = slc.grid
    lo, hi = x[0], x[-1]
    herm = CubicHermiteSpline(x, slc.phi, slc.dphi_dx)
    dherm = herm.derivative()
    s1 = CubicSpline(x, slc.dphi_dt, bc_type="clamped")
    s1i = s1.antiderivative()
    total = float(s1i(hi))

    def inside(fn):
        def out(y):
            y = np.asarray(y, dtype=float)
            return np.where((y >= lo) & (y <= hi), fn(np.clip(y, lo, hi)), 0.0)
        return out

    def prim(y):
        y = np.asarray(y, dtype=float)
        return np.where(y < lo, 0.0, np.where(y > hi, total, s1i(np.clip(y, lo, hi))))

    # support: outermost node where phi or phi_t is nonzero, plus one cell
    live = np.flatnonzero((slc.phi != 0) | (slc.dphi_dt != 0) | (slc.dphi_dx != 0))
    radius = 0.0 if live.size == 0 else float(np.max(np.abs(x[live]))) + slc.dx
    radius = min(radius, max(abs(lo), abs(hi)))

    f_in = template.f_in if template is not None else (lambda xx, pp: np.zeros(np.shape(xx)))
    p_box = template.p_box if template is not None else ((-1.0, 1.0),) * 3
    return InitialData(f_in=f_in, phi0=inside(herm), dphi0=inside(dherm),
                       phi1=inside(s1), phi1_primitive=prim,
                       support_radius=radius, p_box=p_box,
                       name=f"slice@t={slc.t:g}")
