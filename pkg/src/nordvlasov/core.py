"""Configuration, initial data catalog and quiet-start phase-space sampling.

Everything here is dimensionless (particle mass, gravitational constant and
speed of light equal to one). The slab geometry keeps one spatial coordinate
``x`` and the full momentum ``p = (p1, p2, p3)``.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .errors import (ConfigError, CflViolation, DomainTooSmall,
                     InvalidExponents, NonpositiveRun)

__all__ = [
    "bump", "dbump", "Primitive", "InitialData", "SimConfig", "CasimirSpec",
    "Ensemble", "KineticParticle", "validate_config", "sample_ensemble",
    "gaussian_bump", "two_stream", "vacuum", "load_table", "make_initial_data",
    "PROFILES", "parse_config_text", "load_config", "config_schema",
]


# --------------------------------------------------------------------------
# smooth compactly supported profile
# --------------------------------------------------------------------------

def bump(s, width=0.5):
    """Gaussian core times a C-infinity cutoff, supported on ``|s| < 1``.

    ``bump(0) == 1``.
    """
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(-0.5 * si * si / width**2 + 1.0 - 1.0 / (1.0 - si * si))
    return out


def dbump(s, width=0.5):
    """Analytic derivative of :func:`bump` with respect to ``s``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    g = np.exp(-0.5 * si * si / width**2 + 1.0 - 1.0 / (1.0 - si * si))
    out[inside] = g * (-si / width**2 - 2.0 * si / (1.0 - si * si) ** 2)
    return out


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


class Primitive:
    """Antiderivative ``H(y) = int_{lo}^{y} h`` of a function supported in [lo, hi].

    Node values are accumulated once with 8-point Gauss-Legendre per cell; a
    query adds Gauss-Legendre over the partial cell, so the result carries
    the accuracy of the per-cell rule everywhere (not just on nodes).
    """

    def __init__(self, h, lo, hi, ncell=2048):
        self.h = h
        self.lo = float(lo)
        self.hi = float(hi)
        self.ncell = int(ncell)
        self.width = (self.hi - self.lo) / self.ncell
        edges = self.lo + self.width * np.arange(self.ncell + 1)
        self.nodes = edges
        self.values = np.concatenate(
            ([0.0], np.cumsum(self._gl(edges[:-1], edges[1:]))))

    def _gl(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        pts = mid[..., None] + half[..., None] * _GL_NODES
        vals = np.asarray(self.h(pts.ravel()), dtype=float).reshape(pts.shape)
        return half * (vals @ _GL_WEIGHTS)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        yc = np.clip(y, self.lo, self.hi)
        j = np.clip(np.floor((yc - self.lo) / self.width).astype(np.int64),
                    0, self.ncell - 1)
        return self.values[j] + self._gl(self.nodes[j], yc)


# --------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------

@dataclass
class InitialData:
    """Initial datum ``(f_in, phi0_in, phi1_in)``.

    ``f_in(x, p)`` takes ``x`` of shape (N,) and ``p`` of shape (N, 3).
    ``dphi0`` is the analytic (or spline) derivative of ``phi0`` and
    ``phi1_primitive`` an antiderivative of ``phi1``. Every function vanishes
    outside ``|x| <= support_radius``; ``p_box`` is the smallest axis-aligned
    box containing the momentum support of ``f_in``.
    """

    f_in: Callable
    phi0: Callable
    dphi0: Callable
    phi1: Callable
    support_radius: float
    p_box: tuple
    phi1_primitive: Optional[Callable] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    native_lattice: Optional[tuple] = None
    is_vacuum: bool = False

    def __post_init__(self):
        if self.phi1_primitive is None:
            r = self.support_radius
            self.phi1_primitive = Primitive(self.phi1, -r, r)


class CasimirSpec(NamedTuple):
    """Exponents of the L^q monitors: ``Q(z) = z**q`` and weight ``e^{gamma phi}``."""

    q: float = 2.0
    gamma: float = 0.0

    def check(self):
        if not self.q >= 1.0:
            raise InvalidExponents(f"q = {self.q} < 1")
        if not self.gamma >= 3.0 / self.q - 4.0 - 1e-15:
            raise InvalidExponents(
                f"gamma = {self.gamma} < 3/q - 4 = {3.0 / self.q - 4.0}")
        return self


@dataclass(frozen=True)
class SimConfig:
    x_min: float = -24.0
    x_max: float = 24.0
    nx: int = 512
    dt: float = 0.0            # 0 -> cfl * dx
    cfl: float = 0.5
    t_final: float = 2.0
    n_particles: int = 200_000
    n_sample_x: int = 0        # 0 -> derived from n_particles
    n_sample_p: int = 0
    mollifier_n: int = 0
    mollifier_kind: str = "sampled"
    deposition: str = "cic"
    field_mode: str = "coupled"   # or "zero": fields forced to vanish
    margin: float = 1.0
    casimir_q: tuple = (1.0, 2.0)
    gamma: float = 0.0
    momentum_warn_factor: float = 2.0
    energy_tol: float = 0.02
    snapshot_stride: int = 0
    profile_stride: int = 0
    threads: int = 1
    out_dir: str = "out"
    profile: str = "gaussian-bump"
    profile_params: tuple = ()

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def grid(self):
        return self.x_min + self.dx * np.arange(self.nx)

    @property
    def dt_requested(self):
        return self.dt if self.dt > 0 else self.cfl * self.dx

    @property
    def n_steps(self):
        return max(1, int(math.ceil(self.t_final / self.dt_requested - 1e-9)))

    @property
    def step(self):
        """Time step actually used: ``t_final`` split into whole steps."""
        return self.t_final / self.n_steps

    def sampling_counts(self):
        """Lattice counts ``(n_x, n_p)`` along x and along each momentum axis."""
        nx_s, np_s = self.n_sample_x, self.n_sample_p
        if nx_s > 0 and np_s > 0:
            return nx_s, np_s
        # the x-lattice must be far finer than the field grid: with too few
        # x-samples per cell the deposited moments alias against the grid
        # nodes and the local residuals stop converging. n_x = 800 n_p^4
        # (about 30 samples per cell at the default grid) keeps that error
        # below the O(dx^2) truncation error
        n_p = np_s or max(2, int(round((self.n_particles / 800.0) ** 0.25)))
        n_x = nx_s or max(2, int(round(self.n_particles / n_p**3)))
        return n_x, n_p

    def refined(self, factor=2):
        """Same run with dx, dt and the sampling spacing divided by ``factor``."""
        n_x, n_p = self.sampling_counts()
        return self.replace(
            nx=factor * (self.nx - 1) + 1,
            dt=self.step / factor,
            n_sample_x=n_x * factor,
            n_sample_p=n_p * factor,
            n_particles=n_x * factor * (n_p * factor) ** 3,
        )

    @property
    def params(self):
        return dict(self.profile_params)


# --------------------------------------------------------------------------
# catalog of initial data
# --------------------------------------------------------------------------

def _bump_integral(width=0.5):
    return integrate.quad(lambda s: float(bump(s, width)), -1, 1,
                          epsabs=1e-13, epsrel=1e-12)[0]


def _field_profile(amplitude, radius, width):
    if amplitude == 0.0:
        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        return zero, zero
    f = lambda x: amplitude * bump(np.asarray(x) / radius, width)
    df = lambda x: amplitude / radius * dbump(np.asarray(x) / radius, width)
    return f, df


def gaussian_bump(mass=1.0, R0=2.0, p_max=1.0, width=0.5,
                  phi0_amplitude=0.1, phi1_amplitude=0.0):
    """Smooth bump in x and in each momentum component.

    The amplitude is fixed so that ``int e^{-phi0} int f_in dp dx == mass``.
    """
    phi0, dphi0 = _field_profile(phi0_amplitude, R0, width)
    phi1, _ = _field_profile(phi1_amplitude, R0, width)
    bp = p_max * _bump_integral(width)
    bx = integrate.quad(lambda x: float(np.exp(-phi0(x)) * bump(x / R0, width)),
                        -R0, R0, epsabs=1e-14, epsrel=1e-13)[0]
    amp = mass / (bx * bp**3) if mass > 0 else 0.0

    def f_in(x, p):
        p = np.asarray(p, dtype=float)
        return (amp * bump(np.asarray(x) / R0, width) * bump(p[:, 0] / p_max, width)
                * bump(p[:, 1] / p_max, width) * bump(p[:, 2] / p_max, width))

    return InitialData(
        f_in=f_in, phi0=phi0, dphi0=dphi0, phi1=phi1, support_radius=R0,
        p_box=((-p_max, p_max),) * 3, name="gaussian-bump",
        params=dict(mass=mass, R0=R0, p_max=p_max, width=width,
                    phi0_amplitude=phi0_amplitude, phi1_amplitude=phi1_amplitude,
                    amplitude=amp),
        is_vacuum=(amp == 0.0))


def two_stream(mass=1.0, R0=2.0, p_max=0.5, drift=0.6, width=0.5,
               phi0_amplitude=0.0, phi1_amplitude=0.0):
    """Two counter-streaming beams along p1 at ``+-drift``."""
    phi0, dphi0 = _field_profile(phi0_amplitude, R0, width)
    phi1, _ = _field_profile(phi1_amplitude, R0, width)
    bp = p_max * _bump_integral(width)
    bx = integrate.quad(lambda x: float(np.exp(-phi0(x)) * bump(x / R0, width)),
                        -R0, R0, epsabs=1e-14, epsrel=1e-13)[0]
    amp = mass / (bx * bp**3) if mass > 0 else 0.0

    def f_in(x, p):
        p = np.asarray(p, dtype=float)
        beams = 0.5 * (bump((p[:, 0] - drift) / p_max, width)
                       + bump((p[:, 0] + drift) / p_max, width))
        return (amp * bump(np.asarray(x) / R0, width) * beams
                * bump(p[:, 1] / p_max, width) * bump(p[:, 2] / p_max, width))

    reach = drift + p_max
    return InitialData(
        f_in=f_in, phi0=phi0, dphi0=dphi0, phi1=phi1, support_radius=R0,
        p_box=((-reach, reach), (-p_max, p_max), (-p_max, p_max)),
        name="two-stream",
        params=dict(mass=mass, R0=R0, p_max=p_max, drift=drift, width=width,
                    phi0_amplitude=phi0_amplitude, phi1_amplitude=phi1_amplitude,
                    amplitude=amp),
        is_vacuum=(amp == 0.0))


def vacuum(R0=2.0, phi0_amplitude=0.0, phi1_amplitude=0.0, width=0.5):
    """No matter; optionally a free wave from nonzero field data."""
    phi0, dphi0 = _field_profile(phi0_amplitude, R0, width)
    phi1, _ = _field_profile(phi1_amplitude, R0, width)

    def f_in(x, p):
        return np.zeros(np.shape(x))

    return InitialData(
        f_in=f_in, phi0=phi0, dphi0=dphi0, phi1=phi1, support_radius=R0,
        p_box=((-1.0, 1.0),) * 3, name="vacuum",
        params=dict(R0=R0, phi0_amplitude=phi0_amplitude,
                    phi1_amplitude=phi1_amplitude, width=width),
        is_vacuum=True)


def load_table(path, phi_path=None):
    """Initial data from sampled-table files.

    Distribution file: an optional run of ``#`` comment lines, then one
    header line ``nx n1 n2 n3 x_lo x_hi p1_lo p1_hi p2_lo p2_hi p3_lo p3_hi``
    and ``nx*n1*n2*n3`` whitespace-separated cell-centre values of ``f_in``
    in C order (x slowest). ``f_in`` is taken piecewise constant per cell.

    Field file (optional): header ``n x_lo x_hi`` then ``n`` rows
    ``phi0 phi1`` at ``linspace(x_lo, x_hi, n)``; both are interpolated by
    clamped cubic splines, whose derivative and antiderivative are exact.
    """
    with open(path) as fh:
        tokens = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    head = tokens[0].split()
    dims = tuple(int(v) for v in head[:4])
    bounds = np.array([float(v) for v in head[4:12]]).reshape(4, 2)
    values = np.array(" ".join(tokens[1:]).split(), dtype=float)
    if values.size != np.prod(dims):
        raise ConfigError(f"table {path}: expected {np.prod(dims)} values, got {values.size}")
    if np.any(values < 0):
        raise ConfigError(f"table {path}: f_in must be non-negative")
    table = values.reshape(dims)
    widths = (bounds[:, 1] - bounds[:, 0]) / np.array(dims)

    def f_in(x, p):
        coords = np.column_stack([np.asarray(x, dtype=float), np.asarray(p, dtype=float)])
        idx = np.floor((coords - bounds[:, 0]) / widths).astype(np.int64)
        ok = np.all((idx >= 0) & (idx < np.array(dims)), axis=1)
        out = np.zeros(coords.shape[0])
        ii = idx[ok]
        out[ok] = table[ii[:, 0], ii[:, 1], ii[:, 2], ii[:, 3]]
        return out

    R0 = float(np.max(np.abs(bounds[0])))
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    phi0 = dphi0 = phi1 = zero
    prim = None
    if phi_path is not None:
        with open(phi_path) as fh:
            rows = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
        n, lo, hi = rows[0].split()
        n = int(n)
        xs = np.linspace(float(lo), float(hi), n)
        vals = np.array(" ".join(rows[1:]).split(), dtype=float).reshape(n, 2)
        R0 = max(R0, abs(float(lo)), abs(float(hi)))
        s0 = CubicSpline(xs, vals[:, 0], bc_type="clamped")
        s1 = CubicSpline(xs, vals[:, 1], bc_type="clamped")
        s1i = s1.antiderivative()
        lo_, hi_ = xs[0], xs[-1]

        def _inside(spl):
            def fn(y):
                y = np.asarray(y, dtype=float)
                return np.where((y >= lo_) & (y <= hi_), spl(np.clip(y, lo_, hi_)), 0.0)
            return fn

        phi0, dphi0, phi1 = _inside(s0), _inside(s0.derivative()), _inside(s1)
        total = float(s1i(hi_))
        prim = lambda y: np.where(np.asarray(y) < lo_, 0.0,
                                  np.where(np.asarray(y) > hi_, total,
                                           s1i(np.clip(y, lo_, hi_))))
    return InitialData(
        f_in=f_in, phi0=phi0, dphi0=dphi0, phi1=phi1, phi1_primitive=prim,
        support_radius=R0, p_box=tuple(map(tuple, bounds[1:])), name="table",
        params=dict(path=str(path), x_bounds=tuple(bounds[0])), native_lattice=dims,
        is_vacuum=not np.any(table > 0))


PROFILES = {
    "gaussian-bump": gaussian_bump,
    "two-stream": two_stream,
    "vacuum": vacuum,
}


def make_initial_data(cfg: SimConfig) -> InitialData:
    params = cfg.params
    if cfg.profile == "table":
        return load_table(params["path"], params.get("phi_path"))
    try:
        builder = PROFILES[cfg.profile]
    except KeyError:
        raise ConfigError(f"unknown profile {cfg.profile!r}; "
                          f"known: {sorted(PROFILES) + ['table']}") from None
    return builder(**{k: float(v) for k, v in params.items()})


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

def validate_config(cfg: SimConfig, data: InitialData) -> SimConfig:
    """Return ``cfg`` unchanged iff every run invariant holds.

    Otherwise raise a :class:`ConfigError` whose ``violations`` list every
    failed check (the specific subclass when there is exactly one).
    """
    found = []
    if cfg.t_final <= 0:
        found.append(NonpositiveRun(f"t_final = {cfg.t_final} must be > 0"))
    if cfg.nx < 16:
        found.append(NonpositiveRun(f"nx = {cfg.nx} must be >= 16"))
    if cfg.n_particles < 1:
        found.append(NonpositiveRun(f"n_particles = {cfg.n_particles} must be >= 1"))
    need = data.support_radius + max(cfg.t_final, 0.0) + cfg.margin
    if cfg.x_max < need or -cfg.x_min < need:
        found.append(DomainTooSmall(
            f"domain [{cfg.x_min}, {cfg.x_max}] does not contain the light cone "
            f"|x| <= R0 + t_final + margin = {need}"))
    if cfg.nx >= 2 and cfg.dt_requested > cfg.dx * (1 + 1e-12):
        found.append(CflViolation(f"dt = {cfg.dt_requested} > dx = {cfg.dx}"))
    if not found:
        return cfg
    if len(found) == 1:
        raise found[0]
    raise ConfigError("; ".join(str(e) for e in found), found)


# --------------------------------------------------------------------------
# particles
# --------------------------------------------------------------------------

class KineticParticle(NamedTuple):
    x: float
    p: np.ndarray
    a: float   # f e^{-4 phi}, the Vlasov invariant
    m: float   # mass charge, m = a * c
    c: float   # Casimir volume factor, V e^{3 phi}


@dataclass
class Ensemble:
    """Struct-of-arrays particle ensemble.

    ``x`` and ``p`` evolve; ``a``, ``m``, ``c`` (and the initial-state
    records ``f0``, ``phi0``) are read-only arrays fixed at sampling time.
    """

    x: np.ndarray
    p: np.ndarray
    a: np.ndarray
    m: np.ndarray
    c: np.ndarray
    f0: np.ndarray
    phi0: np.ndarray
    cell_volume: float
    f_in_sup: float = 0.0
    phi0_sup: float = 0.0
    a_sup: float = 0.0

    def __post_init__(self):
        for name in ("a", "m", "c", "f0", "phi0"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            setattr(self, name, arr)

    def __len__(self):
        return self.x.shape[0]

    def __getitem__(self, k):
        return KineticParticle(float(self.x[k]), self.p[k].copy(),
                               float(self.a[k]), float(self.m[k]), float(self.c[k]))

    @property
    def is_vacuum(self):
        return len(self) == 0

    def copy(self):
        return dataclasses.replace(self, x=self.x.copy(), p=self.p.copy())

    def with_phase(self, x, p):
        return dataclasses.replace(self, x=np.ascontiguousarray(x, dtype=float),
                                   p=np.ascontiguousarray(p, dtype=float))


def _centers(lo, hi, n):
    h = (hi - lo) / n
    return lo + h * (np.arange(n) + 0.5), h


def sample_ensemble(data: InitialData, cfg: SimConfig, phi0=None) -> Ensemble:
    """Deterministic tensor-lattice ("quiet start") sampling of ``f_in``.

    One particle per lattice cell with ``f_in > 0`` at the cell centre,
    carrying ``V0 = dx dp1 dp2 dp3``. ``phi0`` overrides ``data.phi0`` (used
    for mollified field data).
    """
    phi0 = data.phi0 if phi0 is None else phi0
    if data.native_lattice is not None:
        counts = data.native_lattice
    else:
        n_x, n_p = cfg.sampling_counts()
        counts = (n_x, n_p, n_p, n_p)
    R0 = data.support_radius
    xs, hx = _centers(-R0, R0, counts[0])
    if data.native_lattice is not None:
        # table lattices start at their own x bounds
        xb = data.params.get("x_bounds")
        if xb is not None:
            xs, hx = _centers(xb[0], xb[1], counts[0])
    axes = []
    vol = hx
    for d in range(3):
        lo, hi = data.p_box[d]
        c, h = _centers(lo, hi, counts[d + 1])
        axes.append(c)
        vol *= h
    P1, P2, P3 = np.meshgrid(*axes, indexing="ij")
    pflat = np.column_stack([P1.ravel(), P2.ravel(), P3.ravel()])
    npv = pflat.shape[0]

    xs_all, ps_all, f_all = [], [], []
    for xv in xs:
        fv = np.asarray(data.f_in(np.full(npv, xv), pflat), dtype=float)
        keep = fv > 0
        if np.any(keep):
            xs_all.append(np.full(int(keep.sum()), xv))
            ps_all.append(pflat[keep])
            f_all.append(fv[keep])
    dense = np.linspace(-R0, R0, 4097)
    phi0_sup = float(max(np.max(np.abs(phi0(dense))), np.max(np.abs(phi0(xs)))))
    if not xs_all:
        warnings.warn("f_in vanishes on the sampling lattice: vacuum run", stacklevel=2)
        empty = np.zeros(0)
        return Ensemble(x=empty, p=np.zeros((0, 3)), a=empty, m=empty, c=empty,
                        f0=empty, phi0=empty, cell_volume=vol, phi0_sup=phi0_sup)
    x = np.concatenate(xs_all)
    p = np.concatenate(ps_all)
    f0 = np.concatenate(f_all)
    ph = np.asarray(phi0(x), dtype=float)
    a = f0 * np.exp(-4.0 * ph)
    c = vol * np.exp(3.0 * ph)
    m = a * c
    return Ensemble(x=x, p=np.ascontiguousarray(p), a=a, m=m, c=c, f0=f0, phi0=ph,
                    cell_volume=vol, f_in_sup=float(f0.max()), phi0_sup=phi0_sup,
                    a_sup=float(a.max()))


# --------------------------------------------------------------------------
# config files
# --------------------------------------------------------------------------

_SCHEMA = [
    ("x_min", float, "left end of the slab domain"),
    ("x_max", float, "right end of the slab domain"),
    ("nx", int, "number of grid points (including both ends)"),
    ("dt", float, "time step; 0 selects cfl * dx"),
    ("cfl", float, "dt / dx when dt = 0 (must be <= 1)"),
    ("t_final", float, "end time (> 0)"),
    ("n_particles", int, "target particle count for the quiet start"),
    ("n_sample_x", int, "lattice cells along x (0: derived from n_particles)"),
    ("n_sample_p", int, "lattice cells per momentum axis (0: derived)"),
    ("mollifier_n", int, "regularization index n, kernel radius 1/n (0: off)"),
    ("mollifier_kind", str, "sampled | projected"),
    ("deposition", str, "cic"),
    ("field_mode", str, "coupled | zero"),
    ("margin", float, "extra distance between light cone and boundary"),
    ("casimir_q", "floats", "comma-separated exponents q >= 1 for Q(z) = z^q"),
    ("gamma", float, "exponent of the weighted L^q monitor (>= 3/q - 4)"),
    ("momentum_warn_factor", float, "warn when max|p| exceeds this multiple of its initial value"),
    ("energy_tol", float, "allowed relative energy excess over the initial value"),
    ("snapshot_stride", int, "write a binary snapshot every K steps (0: none)"),
    ("profile_stride", int, "write field profiles every K steps (0: none)"),
    ("threads", int, "worker threads (1: bitwise reproducible)"),
    ("out_dir", str, "output directory"),
    ("profile", str, "gaussian-bump | two-stream | vacuum | table"),
    ("profile.<name>", float, "numeric profile parameter, e.g. profile.mass = 1.0; "
                              "table profiles take profile.path and profile.phi_path"),
]


def config_schema() -> str:
    lines = ["# key = value, one per line; '#' starts a comment"]
    defaults = SimConfig()
    for key, typ, doc in _SCHEMA:
        default = getattr(defaults, key, None)
        tname = typ if isinstance(typ, str) else typ.__name__
        d = "" if default is None else f" (default: {default})"
        lines.append(f"{key:22s} {tname:7s} {doc}{d}")
    return "\n".join(lines)


def parse_config_text(text: str, base: Optional[SimConfig] = None) -> SimConfig:
    cfg = base or SimConfig()
    kinds = {k: t for k, t, _ in _SCHEMA}
    updates, file_params = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("profile."):
            name = key[len("profile."):]
            file_params[name] = value if name in ("path", "phi_path") else float(value)
            continue
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        typ = kinds[key]
        try:
            if typ == "floats":
                updates[key] = tuple(float(v) for v in value.split(",") if v.strip())
            else:
                updates[key] = typ(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    # a new profile does not inherit the parameters of the old one
    params = {} if updates.get("profile", cfg.profile) != cfg.profile else dict(cfg.profile_params)
    params.update(file_params)
    updates["profile_params"] = tuple(sorted(params.items()))
    return cfg.replace(**updates)


def load_config(path) -> SimConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())
