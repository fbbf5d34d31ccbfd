"""Regularization ladder: the coupled solver for a sequence of mollifier indices.

Each rung runs with the source mollified twice and the field data once.
Consecutive rungs are compared through space-time Cauchy differences of
``mu``, ``phi`` and ``e^phi``; each rung is also checked for an energy
bound uniform in ``n`` and against its companion field ``phi~`` (source
mollified once, raw data), of which ``phi`` must be the mollification.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import InitialData, SimConfig, sample_ensemble
from .errors import GridMismatch
from .kinetic import Simulation
from .wavefield import (Mollifier, assemble_field, field_energy, mollify)

__all__ = ["Snapshots", "RungResult", "LadderReport", "cauchy_metrics",
           "run_rung", "run_ladder", "initial_energy"]


@dataclass
class Snapshots:
    """Grids of one rung at the sample times (rows are times)."""

    times: np.ndarray
    grid: np.ndarray
    mu: np.ndarray
    phi: np.ndarray


def _trap(x):
    w = np.zeros_like(x)
    if x.size > 1:
        d = np.diff(x)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
    return w


def cauchy_metrics(a: Snapshots, b: Snapshots, box=None):
    """``(||mu_a - mu_b||_2, ||phi_a - phi_b||_2, ||e^phi_a - e^phi_b||_4)``.

    Space-time norms with trapezoid weights in t and x over the nodes with
    ``box[0] <= x <= box[1]`` (all nodes when ``box`` is None).
    """
    if (a.mu.shape != b.mu.shape or a.phi.shape != b.phi.shape
            or not np.array_equal(a.times, b.times) or not np.array_equal(a.grid, b.grid)):
        raise GridMismatch("snapshot sets differ in sample times or grid")
    sel = np.ones(a.grid.size, bool) if box is None else (a.grid >= box[0]) & (a.grid <= box[1])
    w = np.outer(_trap(a.times), _trap(a.grid[sel]))

    def norm(u, v, p):
        d = np.abs(u[:, sel] - v[:, sel])
        return float(np.sum(w * d**p)) ** (1.0 / p)

    return (norm(a.mu, b.mu, 2), norm(a.phi, b.phi, 2),
            norm(np.exp(a.phi), np.exp(b.phi), 4))


def initial_energy(cfg: SimConfig, data: InitialData):
    """Total energy at t = 0 with unmollified field data."""
    c0 = cfg.replace(mollifier_n=0)
    sim = Simulation(c0, data)
    st = sim.state
    ens = st.ens
    if len(ens):
        phi_k, _, _ = st.slice.at(ens.x)
        g = np.sqrt(1.0 + np.sum(ens.p * ens.p, axis=1))
        kin = float(np.sum(ens.a * ens.c * np.exp(phi_k) * g))
    else:
        kin = 0.0
    return kin + field_energy(st.slice)


@dataclass
class RungResult:
    n: int
    snapshots: Snapshots
    energy: np.ndarray             # total energy per step
    energy_field: np.ndarray       # field energy at the sample times
    energy_field_tilde: np.ndarray  # same for the companion field
    split_error: float             # max |phi - mollify(phi~)| over samples
    seconds: float


def _kinetic(state):
    ens = state.ens
    if len(ens) == 0:
        return 0.0
    phi_k, _, _ = state.slice.at(ens.x)
    g = np.sqrt(1.0 + np.sum(ens.p * ens.p, axis=1))
    return float(np.sum(ens.a * ens.c * np.exp(phi_k) * g))


def run_rung(cfg: SimConfig, data: InitialData, n, kind="projected", sample_stride=1,
             tilde=True) -> RungResult:
    """One coupled run with mollifier index ``n`` and its companion field."""
    t0 = time.perf_counter()
    c = cfg.replace(mollifier_n=int(n), mollifier_kind=kind)
    sim = Simulation(c, data)
    moll = sim.moll
    times, mus, phis, ef, eft, energy = [], [], [], [], [], []
    split = 0.0
    last = c.n_steps
    for st in sim.run():
        energy.append(_kinetic(st) + field_energy(st.slice))
        if st.step % sample_stride and st.step != last:
            continue
        times.append(st.t)
        mus.append(st.moments.mu.copy())
        phis.append(st.slice.phi.copy())
        ef.append(field_energy(st.slice))
        if tilde:
            hist1 = sim.hist.remollified(moll, 1)
            tl = assemble_field(data, hist1, None, st.t, sim.grid)
            eft.append(field_energy(tl))
            for a, b in ((st.slice.phi, tl.phi), (st.slice.dphi_dt, tl.dphi_dt),
                         (st.slice.dphi_dx, tl.dphi_dx)):
                split = max(split, float(np.max(np.abs(a - mollify(b, moll)))))
    snaps = Snapshots(np.array(times), sim.grid.copy(), np.array(mus), np.array(phis))
    return RungResult(int(n), snaps, np.array(energy), np.array(ef),
                      np.array(eft) if tilde else np.full(len(ef), np.nan), split,
                      time.perf_counter() - t0)


METRIC_NAMES = ("mu_l2", "phi_l2", "exp_phi_l4")


@dataclass
class LadderReport:
    n_values: list
    pairs: list                    # (n_a, n_b, mu, phi, exp_phi)
    energy_ratio: dict             # n -> max_t E_n(t) / E_raw(0)
    young_slack: dict              # n -> min_t [E_field(phi~) - E_field(phi)]
    split_error: dict              # n -> max |phi - mollify(phi~)|
    e0_raw: float
    box: Optional[tuple] = None
    seconds: dict = field(default_factory=dict)

    def metric(self, name):
        k = METRIC_NAMES.index(name) + 2
        return [p[k] for p in self.pairs]

    def monotone(self, name):
        """Consecutive Cauchy differences strictly decreasing."""
        m = self.metric(name)
        return all(b < a for a, b in zip(m[:-1], m[1:]))

    def energy_uniform(self, tol=0.02):
        return all(r <= 1.0 + tol for r in self.energy_ratio.values())

    def finite(self):
        vals = [v for p in self.pairs for v in p[2:]] + list(self.energy_ratio.values())
        return all(math.isfinite(v) for v in vals)

    def young_ok(self, tol=1e-10):
        scale = max(1.0, abs(self.e0_raw))
        return all(s >= -tol * scale for s in self.young_slack.values()
                   if math.isfinite(s))

    def rows(self):
        out = []
        for (na, nb, mu, ph, eph) in self.pairs:
            out.append(dict(n=na, n_next=nb, mu_l2=mu, phi_l2=ph, exp_phi_l4=eph,
                            energy_ratio=self.energy_ratio[na],
                            young_slack=self.young_slack[na],
                            split_error=self.split_error[na]))
        last = self.n_values[-1]
        out.append(dict(n=last, n_next="", mu_l2="", phi_l2="", exp_phi_l4="",
                        energy_ratio=self.energy_ratio[last],
                        young_slack=self.young_slack[last],
                        split_error=self.split_error[last]))
        return out

    def write(self, out_dir):
        """``ladder.csv`` plus ``ladder_<metric>.dat`` with columns ``n metric``."""
        os.makedirs(out_dir, exist_ok=True)
        rows = self.rows()
        path = os.path.join(out_dir, "ladder.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(rows[0]))
            for r in rows:
                w.writerow([_fmt(v) for v in r.values()])
        paths = [path]
        for name in METRIC_NAMES:
            p = os.path.join(out_dir, f"ladder_{name}.dat")
            with open(p, "w") as fh:
                fh.write(f"# n {name}\n")
                for n, v in zip([q[0] for q in self.pairs], self.metric(name)):
                    fh.write(f"{n} {v:.17g}\n")
            paths.append(p)
        return paths


def _fmt(v):
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def run_ladder(cfg: SimConfig, data: InitialData, n_list: Sequence[int], box=None,
               kind="projected", sample_stride=1, tilde=True, progress=None) -> LadderReport:
    """Run every rung and compare consecutive ones.

    ``box`` is the spatial window of the Cauchy metrics (default: the
    light cone of the data at ``t_final``, identical for every rung).
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 2:
        raise ValueError("a ladder needs at least two rungs")
    if any(b <= a for a, b in zip(n_list[:-1], n_list[1:])):
        raise ValueError(f"n values must increase strictly: {n_list}")
    if box is None:
        r = data.support_radius + cfg.t_final
        box = (-r, r)
    e0 = initial_energy(cfg, data)
    rungs = []
    for n in n_list:
        res = run_rung(cfg, data, n, kind, sample_stride, tilde)
        rungs.append(res)
        if progress:
            progress(res)
    pairs = []
    for a, b in zip(rungs[:-1], rungs[1:]):
        pairs.append((a.n, b.n, *cauchy_metrics(a.snapshots, b.snapshots, box)))
    ratio = {r.n: (float(np.max(r.energy)) / e0 if e0 > 0 else float(np.max(np.abs(r.energy))))
             for r in rungs}
    young = {r.n: float(np.min(r.energy_field_tilde - r.energy_field)) for r in rungs}
    split = {r.n: r.split_error for r in rungs}
    return LadderReport(n_list, pairs, ratio, young, split, e0, tuple(box),
                        {r.n: r.seconds for r in rungs})
