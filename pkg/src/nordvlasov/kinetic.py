"""Characteristics (particle) solver for the slab Vlasov equation.

Each particle follows

    dx/ds = p1 / sqrt(1 + p^2)
    dp/ds = -(S phi) p - (1 + p^2)^{-1/2} (phi_x, 0, 0),   S phi = phi_t + v1 phi_x

and carries the invariants ``a = f e^{-4 phi}`` and ``c = V e^{3 phi}``, so
that ``f = a e^{4 phi}`` and the phase volume ``V = c e^{-3 phi}`` are
reconstructed from the local field whenever they are needed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from . import _kernels
from .core import (Ensemble, InitialData, SimConfig, sample_ensemble,
                   validate_config)
from .errors import NordVlasovError, OutOfDomain
from .wavefield import (FieldSlice, Mollifier, MuHistory, assemble_field,
                        data_from_slice, endpoint_term, mollified_data)

__all__ = [
    "ForceField", "MomentGrids", "characteristic_rhs", "push", "deposit",
    "SimState", "Simulation", "set_threads", "reversed_simulation",
]


def set_threads(n):
    n = max(1, int(n))
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return n


class ForceField:
    """Field accessor between two slices, linear in x and in t."""

    def __init__(self, a: FieldSlice, b: Optional[FieldSlice] = None):
        self.a = a
        self.b = a if b is None else b

    def at(self, t, x):
        """Return ``(phi, phi_t, phi_x)`` at time ``t`` and positions ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        va = self.a.at(x)
        if self.b is self.a or self.b.t == self.a.t:
            return va
        th = (t - self.a.t) / (self.b.t - self.a.t)
        if th < -1e-12 or th > 1 + 1e-12:
            raise OutOfDomain(f"t = {t} outside [{self.a.t}, {self.b.t}]")
        vb = self.b.at(x)
        return tuple((1 - th) * u + th * v for u, v in zip(va, vb))


def characteristic_rhs(x, p, field: ForceField, t):
    """Right-hand side ``(dx/ds, dp/ds)`` of the slab characteristic system."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    _, ft, fx = field.at(t, x)
    g = np.sqrt(1.0 + np.sum(p * p, axis=1))
    v1 = p[:, 0] / g
    s = ft + v1 * fx
    dp = -s[:, None] * p
    dp[:, 0] -= fx / g
    return v1, dp


@dataclass
class MomentGrids:
    """Moments of f on the grid at one time (all per unit length)."""

    t: float
    x_min: float
    dx: float
    mu: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    j: np.ndarray
    kinetic: np.ndarray
    momentum: np.ndarray
    casimir: dict = field(default_factory=dict)   # q -> density of Q(a) V

    @property
    def grid(self):
        return self.x_min + self.dx * np.arange(self.mu.size)

    @classmethod
    def zero(cls, t, x_min, dx, nx, qs=()):
        z = lambda: np.zeros(nx)
        return cls(t, x_min, dx, z(), z(), z(), z(), z(), z(), {q: z() for q in qs})


def deposit(ens: Ensemble, slc: FieldSlice, qs=(), threads=1) -> MomentGrids:
    """Cloud-in-cell moments of the ensemble using ``phi`` from ``slc``.

    Per particle ``f V = a c e^{phi}``; ``mu`` receives ``f V / gamma``,
    ``sigma`` ``f V``, the kinetic density ``f V gamma``, the momentum density
    ``f V p1``; ``rho`` and ``j`` carry the nodal factor ``e^{-phi}``.
    """
    qs = tuple(float(q) for q in qs)
    nx = slc.nx
    if len(ens) == 0:
        return MomentGrids.zero(slc.t, slc.x_min, slc.dx, nx, qs)
    rows, bad = _kernels.deposit_moments(
        ens.x, ens.p, ens.a, ens.c, slc.phi, slc.x_min, slc.dx,
        np.array(qs, dtype=float), max(1, int(threads)))
    if bad:
        raise OutOfDomain(f"{bad} particles outside the grid during deposition")
    rows /= slc.dx
    w = np.exp(-slc.phi)
    K = _kernels
    cas = {q: rows[K.N_BASE_MOMENTS + i] for i, q in enumerate(qs)}
    return MomentGrids(slc.t, slc.x_min, slc.dx, mu=rows[K.MU], sigma=rows[K.SIGMA],
                       rho=w * rows[K.SIGMA], j=w * rows[K.JRAW],
                       kinetic=rows[K.KIN], momentum=rows[K.MOM], casimir=cas)


def push(ens: Ensemble, a: FieldSlice, b: FieldSlice, dt) -> Ensemble:
    """Explicit midpoint step from ``a.t`` to ``a.t + dt``.

    Stage two uses the average of the two slices (time ``t + dt/2``). The
    invariants ``a``, ``m``, ``c`` are shared, never copied or changed.
    """
    n = len(ens)
    if n == 0:
        return ens
    x_out = np.empty_like(ens.x)
    p_out = np.empty_like(ens.p)
    flags = np.zeros(n, dtype=np.int8)
    _kernels.rk2_push(ens.x, ens.p, float(dt), a.x_min, a.dx, a.dphi_dt, a.dphi_dx,
                      b.dphi_dt, b.dphi_dx, x_out, p_out, flags)
    if np.any(flags == 1):
        raise OutOfDomain(f"{int(np.sum(flags == 1))} particles left the grid")
    if np.any(flags == 2):
        raise NordVlasovError("particle speed reached the speed of light")
    return ens.with_phase(x_out, p_out)


@dataclass
class SimState:
    t: float
    step: int
    ens: Ensemble
    slice: FieldSlice
    moments: MomentGrids


class Simulation:
    """Self-consistent slab evolution with predictor-corrector coupling.

    Field data are mollified once and the source twice when
    ``cfg.mollifier_n > 0``. ``t0``/``dt`` let the same machinery run
    backwards from a later state (``dt < 0``).
    """

    def __init__(self, cfg: SimConfig, data: InitialData, ensemble: Optional[Ensemble] = None,
                 t0=0.0, dt=None, validate=True, source_times=2, data_times=1):
        if validate:
            validate_config(cfg, data)
        self.cfg = cfg
        self.data = data
        self.grid = cfg.grid
        self.dt = cfg.step if dt is None else float(dt)
        self.qs = tuple(float(q) for q in cfg.casimir_q)
        self.threads = set_threads(cfg.threads)
        self.moll = Mollifier.build(cfg.mollifier_n, cfg.dx, cfg.mollifier_kind)
        eff = data
        for _ in range(data_times):
            eff = mollified_data(eff, self.moll)
        self.field_data = eff
        self.coupled = cfg.field_mode != "zero"
        if ensemble is None:
            # with fields switched off the invariants must see phi = 0 as well
            phi0 = eff.phi0 if self.coupled else (lambda x: np.zeros_like(np.asarray(x, dtype=float)))
            ensemble = sample_ensemble(data, cfg, phi0=phi0)
        self.hist = MuHistory(self.dt, cfg.x_min, cfg.dx, self.moll, t0=t0,
                              source_times=source_times)
        slc = self._open_slice(t0)
        mom = deposit(ensemble, slc, self.qs, self.threads)
        self.hist.append(mom.mu)
        self.state = SimState(float(t0), 0, ensemble, slc, mom)

    # -- field pieces -------------------------------------------------------
    def _open_slice(self, t):
        if not self.coupled:
            return FieldSlice.zero(t, self.cfg.x_min, self.cfg.dx, self.cfg.nx)
        return assemble_field(self.field_data, self.hist, None, t, self.grid,
                              open_end=True)

    def _close(self, open_slc, open_psi_dt):
        if not self.coupled or len(self.hist) < 2:
            return open_slc
        slc = dataclasses.replace(open_slc, psi_dt=open_psi_dt +
                                  endpoint_term(self.hist, self.hist.sources[-1]))
        return slc

    # -- stepping -----------------------------------------------------------
    def advance(self) -> SimState:
        st = self.state
        dt = self.dt
        t1 = st.t + dt
        pred = push(st.ens, st.slice, st.slice, dt)
        open_slc = self._open_slice(t1)
        open_psi_dt = open_slc.psi_dt.copy()
        mom = deposit(pred, open_slc, (), self.threads)
        self.hist.append(mom.mu)
        slc1 = self._close(open_slc, open_psi_dt)
        ens1 = push(st.ens, st.slice, slc1, dt)
        mom = deposit(ens1, slc1, self.qs, self.threads)
        self.hist.overwrite_last(mom.mu)
        slc1 = self._close(open_slc, open_psi_dt)
        self.state = SimState(t1, st.step + 1, ens1, slc1, mom)
        return self.state

    def run(self, n_steps=None):
        """Yield the initial state and every subsequent one."""
        n_steps = self.cfg.n_steps if n_steps is None else n_steps
        yield self.state
        for _ in range(n_steps):
            yield self.advance()


def reversed_simulation(sim: Simulation, dt=None) -> Simulation:
    """Simulation that runs backwards in time from the current state of ``sim``.

    The field at the turning time becomes the new data (exact on the grid
    nodes), the particles keep their invariants, and the retarded part
    restarts from zero with ``dt < 0``.
    """
    st = sim.state
    data = data_from_slice(st.slice, template=sim.data)
    step = -abs(sim.dt if dt is None else dt)
    return Simulation(sim.cfg, data, ensemble=st.ens, t0=st.t, dt=step,
                      validate=False, data_times=0)
