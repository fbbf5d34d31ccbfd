"""Conserved quantities, a-priori bound monitors and local residuals.

Every monitor works on the particle ensemble, the field slice and the
deposited moments of one time level. Particle-side sums run in array order,
so quantities built only from the frozen invariants are bitwise constant.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .core import CasimirSpec, Ensemble
from .kinetic import MomentGrids
from .wavefield import FieldSlice, field_energy

__all__ = [
    "SLACK_TOL", "DiagnosticsRecord", "mass", "energy", "casimir",
    "supnorm_bound", "interpolation_bounds", "propagation_check",
    "local_conservation_residual", "momentum_support", "time_continuity_check",
    "Monitor", "MU_BOUND_CONST", "rho_bound_const",
]

SLACK_TOL = 1e-8

# mu <= C (F k)^{1/2} with F = sup f and k = int sqrt(1+p^2) f dp.
# Split at |p| = R: the core gives F int_{|p|<R} dp/sqrt(1+p^2) <=
# F int_0^R 4 pi r dr = 2 pi R^2 F; on the tail 1/sqrt(1+p^2) <=
# sqrt(1+p^2)/R^2, giving k/R^2. With R = (k/F)^{1/4} both terms are
# multiples of sqrt(F k): 2 pi + 1.
MU_BOUND_CONST = 2.0 * math.pi + 1.0


def rho_bound_const(a_sup):
    """``rho <= C k^{3/4}`` with ``C = (4 pi/3) sup a + 1``.

    With ``f = a e^{4 phi}`` the core ``e^{-phi} int_{|p|<R} f`` is at most
    ``(4 pi/3) R^3 a_sup e^{3 phi}``; the tail is ``e^{-phi} k / R``. The
    choice ``R = e^{-phi} k^{1/4}`` turns both into multiples of ``k^{3/4}``.
    """
    return 4.0 * math.pi / 3.0 * a_sup + 1.0


def _slack_ok(slack, rhs):
    return slack >= -SLACK_TOL * max(1.0, abs(rhs))


def _fV(ens: Ensemble, phi_k):
    return ens.a * ens.c * np.exp(phi_k)


def _phi_at(ens: Ensemble, slc: FieldSlice):
    if len(ens) == 0:
        z = np.zeros(0)
        return z, z
    phi, _, _ = slc.at(ens.x)
    hom = np.interp(ens.x, slc.grid, slc.phi_hom)
    return phi, hom


# ---------------------------------------------------------------------------
# conserved quantities
# ---------------------------------------------------------------------------

def mass(ens: Ensemble, slc: FieldSlice, mom: MomentGrids):
    """``(sum of particle charges, int rho dx)``."""
    return float(np.sum(ens.m)), float(np.sum(mom.rho) * mom.dx)


def energy(ens: Ensemble, slc: FieldSlice):
    """``(kinetic, field, total)``; kinetic part summed over particles."""
    if len(ens):
        phi_k, _ = _phi_at(ens, slc)
        g = np.sqrt(1.0 + np.sum(ens.p * ens.p, axis=1))
        kin = float(np.sum(_fV(ens, phi_k) * g))
    else:
        kin = 0.0
    fld = field_energy(slc)
    return kin, fld, kin + fld


@dataclass
class CasimirValues:
    q: float
    gamma: float
    exact: float
    grid: float
    est2_lhs: float
    est2_rhs: float

    @property
    def est2_slack(self):
        return self.est2_rhs - self.est2_lhs


def casimir(ens: Ensemble, slc: FieldSlice, spec: CasimirSpec,
            mom: Optional[MomentGrids] = None) -> CasimirValues:
    """L^q functionals of f in particle and grid form, plus the weighted bound.

    ``exact`` is ``(sum a^q c)^{1/q}``, the particle form of
    ``|| e^{(3/q - 4) phi} f ||_q``. ``grid`` evaluates the same functional
    from the deposited density of ``a^q V`` (needs ``mom.casimir[q]``).
    ``est2_lhs`` is ``|| e^{gamma phi} f ||_q`` in particle form and
    ``est2_rhs`` its bound ``||f_in||_q exp[7 (|phi_hom|_inf + |phi0|_inf)
    + |gamma| |phi_hom|_inf]``.
    """
    q, gamma = spec.check()
    if len(ens) == 0:
        return CasimirValues(q, gamma, 0.0, 0.0, 0.0, 0.0)
    exact = float(np.sum(ens.a**q * ens.c)) ** (1.0 / q)
    grid = math.nan
    if mom is not None and q in mom.casimir:
        grid = float(np.sum(np.exp(3.0 * slc.phi) * mom.casimir[q]) * mom.dx) ** (1.0 / q)
    phi_k, _ = _phi_at(ens, slc)
    f_k = ens.a * np.exp(4.0 * phi_k)
    vol = ens.c * np.exp(-3.0 * phi_k)
    lhs = float(np.sum((np.exp(gamma * phi_k) * f_k) ** q * vol)) ** (1.0 / q)
    f_in_q = float(np.sum(ens.f0**q) * ens.cell_volume) ** (1.0 / q)
    hom = float(np.max(np.abs(slc.phi_hom)))
    rhs = f_in_q * math.exp(7.0 * (hom + ens.phi0_sup) + abs(gamma) * hom)
    return CasimirValues(q, gamma, exact, grid, lhs, rhs)


# ---------------------------------------------------------------------------
# a-priori bounds
# ---------------------------------------------------------------------------

@dataclass
class SupBound:
    f_sup: float
    rhs: float
    phi_hom_sup: float

    @property
    def slack(self):
        return self.rhs - self.f_sup


def supnorm_bound(ens: Ensemble, slc: FieldSlice, phi_hom_sup=None) -> SupBound:
    """``sup f(t) <= sup f_in exp[4 (|phi_hom(t)|_inf + |phi0|_inf)]``.

    ``sup f`` is the maximum of the reconstructed particle values
    ``a e^{4 phi}``; an empty ensemble gives ``0 <= 0``.
    """
    hom = float(np.max(np.abs(slc.phi_hom))) if phi_hom_sup is None else float(phi_hom_sup)
    if len(ens) == 0:
        return SupBound(0.0, 0.0, hom)
    phi_k, _ = _phi_at(ens, slc)
    f_sup = float(np.max(ens.a * np.exp(4.0 * phi_k)))
    rhs = ens.f_in_sup * math.exp(4.0 * (hom + ens.phi0_sup))
    return SupBound(f_sup, rhs, hom)


def interpolation_bounds(mom: MomentGrids, f_sup, a_sup, phi=None):
    """Slack grids of the pointwise bounds on ``mu`` and ``rho``.

    ``mu <= (2 pi + 1) sqrt(sup f * k)`` and
    ``rho <= ((4 pi / 3) sup a + 1) k^{3/4}``, ``k`` the deposited kinetic
    energy density. ``phi`` is unused and kept for call-site symmetry.
    """
    k = np.maximum(mom.kinetic, 0.0)
    mu_rhs = MU_BOUND_CONST * np.sqrt(f_sup * k)
    rho_rhs = rho_bound_const(a_sup) * k**0.75
    return mu_rhs - mom.mu, rho_rhs - mom.rho


def propagation_check(moments, radius, t0=0.0):
    """Deposited mass outside ``|x| > radius + |t - t0| + dx`` per time level.

    The extra ``dx`` is the reach of the linear deposition kernel. Accepts
    one :class:`MomentGrids` or a sequence of them.
    """
    single = isinstance(moments, MomentGrids)
    seq = [moments] if single else list(moments)
    out = []
    for m in seq:
        x = m.grid
        edge = radius + abs(m.t - t0) + m.dx
        outside = np.abs(x) > edge
        out.append(float(np.sum(m.rho[outside]) * m.dx))
    return out[0] if single else np.array(out)


def _energy_density(m: MomentGrids, s: FieldSlice):
    e = m.kinetic + 0.5 * (s.dphi_dt**2 + s.dphi_dx**2)
    flux = m.momentum - s.dphi_dt * s.dphi_dx
    return e, flux


def _ddx(g, dx):
    d = np.zeros_like(g)
    d[1:-1] = (g[2:] - g[:-2]) / (2.0 * dx)
    return d


def local_conservation_residual(moms, slices, dt, where="mid"):
    """L1 norms of ``d_t rho + d_x j`` and ``d_t e + d_x P`` from three levels.

    ``moms`` and ``slices`` hold three consecutive levels. ``where`` selects
    the time of the residual: ``"mid"`` (centred), ``"first"`` or
    ``"last"`` (one-sided second-order differences in time).
    """
    (m0, m1, m2), (s0, s1, s2) = moms, slices
    dx = m1.dx
    e0, _ = _energy_density(m0, s0)
    e1, p1 = _energy_density(m1, s1)
    e2, _ = _energy_density(m2, s2)
    if where == "mid":
        coef, mref = (-0.5, 0.0, 0.5), 1
    elif where == "first":
        coef, mref = (-1.5, 2.0, -0.5), 0
    elif where == "last":
        coef, mref = (0.5, -2.0, 1.5), 2
    else:
        raise ValueError(where)
    drho = (coef[0] * m0.rho + coef[1] * m1.rho + coef[2] * m2.rho) / dt
    de = (coef[0] * e0 + coef[1] * e1 + coef[2] * e2) / dt
    mref_m = (m0, m1, m2)[mref]
    _, pref = _energy_density(mref_m, (s0, s1, s2)[mref])
    r_mass = drho + _ddx(mref_m.j, dx)
    r_energy = de + _ddx(pref, dx)
    return float(np.sum(np.abs(r_mass[1:-1])) * dx), float(np.sum(np.abs(r_energy[1:-1])) * dx)


def momentum_support(ens: Ensemble):
    if len(ens) == 0:
        return 0.0
    return float(np.sqrt(np.max(np.sum(ens.p * ens.p, axis=1))))


@dataclass
class ContinuityReport:
    lipschitz: float          # max_t ||phi_t||_{L2}
    max_ratio: float          # max ||phi(t_k+1) - phi(t_k)|| / (L |dt|)
    fitted_C: float           # smallest C with |phi_hom|_inf <= C (1 + t)


def _l2(g, dx):
    return math.sqrt(float(np.sum(g * g)) * dx)


def time_continuity_check(slices) -> ContinuityReport:
    """Lipschitz-in-time check of ``phi`` in L2 over a sequence of slices."""
    slices = list(slices)
    if len(slices) < 2:
        raise ValueError("need at least two slices")
    dx = slices[0].dx
    lip = max(_l2(s.dphi_dt, dx) for s in slices)
    ratio = 0.0
    for a, b in zip(slices[:-1], slices[1:]):
        diff = _l2(b.phi - a.phi, dx)
        if lip > 0:
            ratio = max(ratio, diff / (lip * abs(b.t - a.t)))
        elif diff > 0:
            ratio = math.inf
    c_fit = max(float(np.max(np.abs(s.phi_hom))) / (1.0 + abs(s.t)) for s in slices)
    return ContinuityReport(lip, ratio, c_fit)


# ---------------------------------------------------------------------------
# per-step record and running monitor
# ---------------------------------------------------------------------------

@dataclass
class DiagnosticsRecord:
    t: float
    step: int
    mass_particle: float
    mass_grid: float
    energy_kinetic: float
    energy_field: float
    energy_total: float
    casimir_exact: dict = field(default_factory=dict)
    casimir_grid: dict = field(default_factory=dict)
    est2_lhs: float = 0.0
    est2_rhs: float = 0.0
    f_sup: float = 0.0
    sup_bound_rhs: float = 0.0
    phi_hom_sup: float = 0.0
    psi_max: float = 0.0
    mu_l2: float = 0.0
    rho_l43: float = 0.0
    mu_bound_slack: float = 0.0
    rho_bound_slack: float = 0.0
    j_excess: float = 0.0
    momentum_support: float = 0.0
    propagation_excess: float = 0.0
    continuity_residual: float = 0.0
    energy_residual: float = 0.0
    phi_step_l2: float = 0.0

    def columns(self):
        cols = []
        for k, v in asdict(self).items():
            if isinstance(v, dict):
                cols.extend(f"{k}_q{q:g}" for q in v)
            else:
                cols.append(k)
        return cols

    def values(self):
        vals = []
        for v in asdict(self).values():
            if isinstance(v, dict):
                vals.extend(v.values())
            else:
                vals.append(v)
        return vals


def make_record(state, spec: CasimirSpec, radius, t0=0.0, qs=(1.0, 2.0)) -> DiagnosticsRecord:
    """All single-level diagnostics of a :class:`SimState`."""
    ens, slc, mom = state.ens, state.slice, state.moments
    mp, mg = mass(ens, slc, mom)
    kin, fld, tot = energy(ens, slc)
    exact, grid = {}, {}
    for q in qs:
        cv = casimir(ens, slc, CasimirSpec(q, max(spec.gamma, 3.0 / q - 4.0)), mom)
        exact[q], grid[q] = cv.exact, cv.grid
    e2 = casimir(ens, slc, spec, mom)
    sb = supnorm_bound(ens, slc)
    mu_sl, rho_sl = interpolation_bounds(mom, sb.f_sup, ens.a_sup)
    dx = mom.dx
    return DiagnosticsRecord(
        t=state.t, step=state.step, mass_particle=mp, mass_grid=mg,
        energy_kinetic=kin, energy_field=fld, energy_total=tot,
        casimir_exact=exact, casimir_grid=grid,
        est2_lhs=e2.est2_lhs, est2_rhs=e2.est2_rhs,
        f_sup=sb.f_sup, sup_bound_rhs=sb.rhs, phi_hom_sup=sb.phi_hom_sup,
        psi_max=float(np.max(slc.psi)),
        mu_l2=math.sqrt(float(np.sum(mom.mu**2)) * dx),
        rho_l43=(float(np.sum(mom.rho ** (4.0 / 3.0))) * dx) ** 0.75,
        mu_bound_slack=float(np.min(mu_sl)), rho_bound_slack=float(np.min(rho_sl)),
        j_excess=float(np.max(np.abs(mom.j) - mom.rho)),
        momentum_support=momentum_support(ens),
        propagation_excess=propagation_check(mom, radius, t0),
    )


@dataclass
class MonitorCheck:
    name: str
    passed: bool
    detail: str


class Monitor:
    """Collects one :class:`DiagnosticsRecord` per state and judges the run.

    Residuals need three levels; they are filled in for level ``k - 1``
    once level ``k`` arrives, and the final level is closed by
    :meth:`finish` with a one-sided difference.
    """

    def __init__(self, spec: CasimirSpec, radius, qs=(1.0, 2.0), t0=0.0,
                 momentum_warn_factor=2.0, energy_tol=0.02, keep_slices=True):
        self.spec = spec.check()
        self.radius = float(radius)
        self.qs = tuple(qs)
        self.t0 = t0
        self.warn_factor = momentum_warn_factor
        self.energy_tol = energy_tol
        self.records: list[DiagnosticsRecord] = []
        self._window = deque(maxlen=3)
        self.slices = [] if keep_slices else None
        self._slice_stats = []     # (t, ||phi_t||, ||phi - phi_prev||, |phi_hom|_inf)
        self._prev_phi = None
        self.momentum_warned = False
        self._finished = False

    def update(self, state):
        rec = make_record(state, self.spec, self.radius, self.t0, self.qs)
        self.records.append(rec)
        slc = state.slice
        step = 0.0 if self._prev_phi is None else _l2(slc.phi - self._prev_phi, slc.dx)
        rec.phi_step_l2 = step
        self._prev_phi = slc.phi
        self._slice_stats.append((state.t, _l2(slc.dphi_dt, slc.dx), step,
                                  float(np.max(np.abs(slc.phi_hom)))))
        if self.slices is not None:
            self.slices.append(slc)
        p0 = self.records[0].momentum_support
        if not self.momentum_warned and p0 > 0 and rec.momentum_support > self.warn_factor * p0:
            self.momentum_warned = True
            warnings.warn(f"momentum support {rec.momentum_support:.4g} exceeds "
                          f"{self.warn_factor:g} x its initial value at t = {state.t:.4g}",
                          RuntimeWarning, stacklevel=2)
        self._window.append((state.moments, slc))
        n = len(self._window)
        if n == 3:
            moms, slcs = zip(*self._window)
            dt = slcs[1].t - slcs[0].t
            if len(self.records) == 3:
                self._set_residual(0, moms, slcs, dt, "first")
            self._set_residual(len(self.records) - 2, moms, slcs, dt, "mid")
        return rec

    def _set_residual(self, idx, moms, slcs, dt, where):
        rm, re = local_conservation_residual(moms, slcs, dt, where)
        self.records[idx].continuity_residual = rm
        self.records[idx].energy_residual = re

    def finish(self):
        if not self._finished and len(self._window) == 3:
            moms, slcs = zip(*self._window)
            self._set_residual(len(self.records) - 1, moms, slcs, slcs[1].t - slcs[0].t, "last")
        self._finished = True
        return self

    # -- summaries ---------------------------------------------------------
    def continuity(self) -> ContinuityReport:
        stats = self._slice_stats
        lip = max(s[1] for s in stats)
        ratio = 0.0
        for prev, cur in zip(stats[:-1], stats[1:]):
            dt = abs(cur[0] - prev[0])
            if lip > 0:
                ratio = max(ratio, cur[2] / (lip * dt))
            elif cur[2] > 0:
                ratio = math.inf
        c_fit = max(s[3] / (1.0 + abs(s[0] - self.t0)) for s in stats)
        return ContinuityReport(lip, ratio, c_fit)

    def mean_residuals(self):
        self.finish()
        rm = np.array([r.continuity_residual for r in self.records])
        re = np.array([r.energy_residual for r in self.records])
        return float(rm.mean()), float(re.mean())

    def drifts(self):
        r0 = self.records[0]
        mg = np.array([r.mass_grid for r in self.records])
        et = np.array([r.energy_total for r in self.records])
        out = {
            "mass_grid": float(np.max(np.abs(mg - r0.mass_grid))) / max(abs(r0.mass_grid), 1e-300),
            "energy_total": float(np.max(np.abs(et - r0.energy_total))) / max(abs(r0.energy_total), 1e-300),
        }
        for q in self.qs:
            g = np.array([r.casimir_grid[q] for r in self.records])
            out[f"casimir_grid_q{q:g}"] = float(np.max(np.abs(g - g[0]))) / max(abs(g[0]), 1e-300)
        if r0.mass_grid == 0:
            out["mass_grid"] = float(np.max(np.abs(mg)))
        if r0.energy_total == 0:
            out["energy_total"] = float(np.max(np.abs(et)))
        return out

    def checks(self, energy_reference=None, continuity_limit=1.05) -> list:
        """Pass/fail verdict for each monitor over the records so far."""
        self.finish()
        recs = self.records
        r0 = recs[0]
        out = []

        def add(name, ok, detail):
            out.append(MonitorCheck(name, bool(ok), detail))

        add("mass_particle_constant",
            all(r.mass_particle == r0.mass_particle for r in recs),
            f"sum m = {r0.mass_particle!r}")
        add("casimir_exact_constant",
            all(r.casimir_exact == r0.casimir_exact for r in recs),
            ", ".join(f"q={q:g}: {v!r}" for q, v in r0.casimir_exact.items()))
        pmax = max(r.psi_max for r in recs)
        add("psi_nonpositive", pmax <= 0.0, f"max psi = {pmax!r}")
        worst = min(recs, key=lambda r: r.sup_bound_rhs - r.f_sup)
        add("sup_norm_bound", all(_slack_ok(r.sup_bound_rhs - r.f_sup, r.sup_bound_rhs) for r in recs),
            f"min slack {worst.sup_bound_rhs - worst.f_sup:.6g}")
        worst = min(recs, key=lambda r: r.est2_rhs - r.est2_lhs)
        add("weighted_lq_bound", all(_slack_ok(r.est2_rhs - r.est2_lhs, r.est2_rhs) for r in recs),
            f"min slack {worst.est2_rhs - worst.est2_lhs:.6g}")
        mu_min = min(r.mu_bound_slack for r in recs)
        add("mu_pointwise_bound", mu_min >= -SLACK_TOL, f"min slack {mu_min:.6g}")
        rho_min = min(r.rho_bound_slack for r in recs)
        add("rho_pointwise_bound", rho_min >= -SLACK_TOL, f"min slack {rho_min:.6g}")
        jx = max(r.j_excess for r in recs)
        add("current_dominated", jx <= SLACK_TOL, f"max |j| - rho = {jx:.3g}")
        ex = max(r.propagation_excess for r in recs)
        add("finite_propagation", ex == 0.0, f"max excess {ex!r}")
        e_ref = r0.energy_total if energy_reference is None else energy_reference
        e_max = max(r.energy_total for r in recs)
        add("energy_bounded", e_max <= (1.0 + self.energy_tol) * e_ref + 1e-14,
            f"max E / E0 = {e_max / e_ref if e_ref else 0.0:.6g}")
        if len(recs) >= 2:
            cont = self.continuity()
            add("time_lipschitz", cont.max_ratio <= continuity_limit,
                f"ratio {cont.max_ratio:.6g}, L = {cont.lipschitz:.4g}, C fit = {cont.fitted_C:.4g}")
        add("momentum_support", not self.momentum_warned,
            f"max |p| = {max(r.momentum_support for r in recs):.4g}")
        finite = all(np.all(np.isfinite([v for v in r.values()])) for r in recs)
        add("records_finite", finite, "")
        return out
