"""Binary snapshots, CSV tables and plot-ready profiles.

Snapshot layout (little-endian throughout)::

    header   "<4sIdQddQQ": magic b"NVKN", version, t, nx, x_min, x_max,
             number of grids (9), number of particles
    grids    9 x nx float64: phi, dphi_dt, dphi_dx, psi, mu, sigma, rho, j, kinetic
    particles N x 7 float64, row-major: x, p1, p2, p3, a, m, c
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import SnapshotFormatError

__all__ = ["MAGIC", "VERSION", "GRID_NAMES", "PARTICLE_COLUMNS", "Snapshot",
           "snapshot_of", "write_snapshot", "read_snapshot", "write_csv",
           "write_profiles"]

MAGIC = b"NVKN"
VERSION = 1
_HEADER = struct.Struct("<4sIdQddQQ")
GRID_NAMES = ("phi", "dphi_dt", "dphi_dx", "psi", "mu", "sigma", "rho", "j", "kinetic")
PARTICLE_COLUMNS = ("x", "p1", "p2", "p3", "a", "m", "c")


@dataclass
class Snapshot:
    t: float
    x_min: float
    x_max: float
    grids: dict
    particles: np.ndarray   # (N, 7)

    @property
    def nx(self):
        return len(next(iter(self.grids.values())))

    def __eq__(self, other):
        if not isinstance(other, Snapshot):
            return NotImplemented
        return (self.t == other.t and self.x_min == other.x_min and self.x_max == other.x_max
                and all(np.array_equal(self.grids[k], other.grids[k]) for k in GRID_NAMES)
                and np.array_equal(self.particles, other.particles))


def snapshot_of(state) -> Snapshot:
    slc, mom, ens = state.slice, state.moments, state.ens
    grids = dict(phi=slc.phi, dphi_dt=slc.dphi_dt, dphi_dx=slc.dphi_dx, psi=slc.psi,
                 mu=mom.mu, sigma=mom.sigma, rho=mom.rho, j=mom.j, kinetic=mom.kinetic)
    parts = np.column_stack([ens.x, ens.p, ens.a, ens.m, ens.c]) if len(ens) else np.zeros((0, 7))
    x_max = slc.x_min + slc.dx * (slc.nx - 1)
    return Snapshot(float(state.t), float(slc.x_min), float(x_max),
                    {k: np.asarray(v, dtype=float) for k, v in grids.items()}, parts)


def write_snapshot(path, snap) -> None:
    if not isinstance(snap, Snapshot):
        snap = snapshot_of(snap)
    nx = snap.nx
    parts = np.ascontiguousarray(snap.particles, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, snap.t, nx, snap.x_min, snap.x_max,
                              len(GRID_NAMES), parts.shape[0]))
        for name in GRID_NAMES:
            g = np.asarray(snap.grids[name], dtype="<f8")
            if g.shape != (nx,):
                raise SnapshotFormatError(f"grid {name} has shape {g.shape}, expected ({nx},)")
            fh.write(g.tobytes())
        fh.write(parts.tobytes())


def read_snapshot(path) -> Snapshot:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError("file shorter than the header")
    magic, version, t, nx, x_min, x_max, ngrid, npart = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported version {version} (expected {VERSION})")
    if ngrid != len(GRID_NAMES):
        raise SnapshotFormatError(f"{ngrid} grids declared, {len(GRID_NAMES)} expected")
    expect = _HEADER.size + 8 * (ngrid * nx + 7 * npart)
    if len(raw) != expect:
        raise SnapshotFormatError(f"payload is {len(raw)} bytes, header declares {expect}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(float)
    grids = {name: body[i * nx:(i + 1) * nx].copy() for i, name in enumerate(GRID_NAMES)}
    parts = body[ngrid * nx:].reshape(npart, 7).copy()
    return Snapshot(t, x_min, x_max, grids, parts)


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path, columns, rows) -> None:
    """Header row then one line per row; floats with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def write_profiles(path, state) -> None:
    """Whitespace table ``x phi phi_hom psi dphi_dt dphi_dx mu rho j`` for plotting."""
    slc, mom = state.slice, state.moments
    cols = np.column_stack([slc.grid, slc.phi, slc.phi_hom, slc.psi, slc.dphi_dt,
                            slc.dphi_dx, mom.mu, mom.rho, mom.j])
    np.savetxt(path, cols, fmt="%.17g",
               header=f"t = {state.t!r}\nx phi phi_hom psi dphi_dt dphi_dx mu rho j")
