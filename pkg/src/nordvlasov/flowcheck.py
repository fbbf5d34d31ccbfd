"""Characteristic flow in full 3D space under prescribed analytic fields.

Used to check the flow-map Jacobian ``det dz(t1)/dz(t0) =
exp[3 phi(t0, x0) - 3 phi(t1, x1)]``, the representation formula and the
Liouville functional, independently of the self-consistent slab solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import bump
from .errors import SingularJacobian, StepUnderflow

__all__ = [
    "PrescribedField", "catalog", "integrate_flow", "flow_rhs", "jacobian_fd",
    "jacobian_matrix", "jacobian_formula", "liouville_functional",
    "pull_back_f", "default_f_in", "FlowCheckRow", "run_catalog",
]


@dataclass(frozen=True)
class PrescribedField:
    """Closed-form ``phi(t, x)`` for ``x`` of shape (..., 3) with its derivatives."""

    name: str
    phi: Callable
    phi_t: Callable
    grad: Callable
    params: dict = field(default_factory=dict)

    def check_derivatives(self, t, x, h=1e-5):
        """Largest mismatch between the analytic and central-difference derivatives."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ft = (self.phi(t + h, x) - self.phi(t - h, x)) / (2 * h)
        err = np.max(np.abs(ft - self.phi_t(t, x)))
        g = self.grad(t, x)
        for d in range(3):
            e = np.zeros(3)
            e[d] = h
            fd = (self.phi(t, x + e) - self.phi(t, x - e)) / (2 * h)
            err = max(err, np.max(np.abs(fd - g[:, d])))
        return float(err)


def _zeros(t, x):
    return np.zeros(np.shape(x)[:-1])


def zero_field():
    return PrescribedField("zero", _zeros, _zeros,
                           lambda t, x: np.zeros(np.shape(x)))


def linear_time(alpha=0.3):
    return PrescribedField(
        "linear-time",
        lambda t, x: alpha * t + _zeros(t, x),
        lambda t, x: alpha + _zeros(t, x),
        lambda t, x: np.zeros(np.shape(x)),
        dict(alpha=alpha))


def separable(alpha=0.3, beta=0.2):
    def grad(t, x):
        g = np.zeros(np.shape(x))
        g[..., 0] = beta * np.cos(x[..., 0])
        return g

    return PrescribedField(
        "separable",
        lambda t, x: alpha * t + beta * np.sin(x[..., 0]),
        lambda t, x: alpha + _zeros(t, x),
        grad, dict(alpha=alpha, beta=beta))


def gaussian_pulse(amplitude=0.2, speed=0.5, width=1.0):
    def parts(t, x):
        d = x[..., 0] - speed * t
        r2 = d * d + x[..., 1] ** 2 + x[..., 2] ** 2
        return d, amplitude * np.exp(-r2 / width**2)

    def phi(t, x):
        return parts(t, x)[1]

    def phi_t(t, x):
        d, v = parts(t, x)
        return v * 2.0 * d * speed / width**2

    def grad(t, x):
        d, v = parts(t, x)
        g = np.empty(np.shape(x))
        g[..., 0] = -2.0 * d / width**2 * v
        g[..., 1] = -2.0 * x[..., 1] / width**2 * v
        g[..., 2] = -2.0 * x[..., 2] / width**2 * v
        return g

    return PrescribedField("gaussian-pulse", phi, phi_t, grad,
                           dict(amplitude=amplitude, speed=speed, width=width))


def catalog():
    return [zero_field(), linear_time(), separable(), gaussian_pulse()]


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

def flow_rhs(t, y, fld: PrescribedField):
    """Characteristic system for a batch ``y`` of shape (B, 6) or (B, 7).

    A seventh column integrates ``S phi`` along the curve, so that
    ``exp(-3 y[:, 6])`` is the volume factor from the divergence alone.
    """
    x, p = y[:, :3], y[:, 3:6]
    g = np.sqrt(1.0 + np.sum(p * p, axis=1))
    v = p / g[:, None]
    gr = fld.grad(t, x)
    s = fld.phi_t(t, x) + np.sum(v * gr, axis=1)
    out = np.empty_like(y)
    out[:, :3] = v
    out[:, 3:6] = -s[:, None] * p - gr / g[:, None]
    if y.shape[1] > 6:
        out[:, 6] = s
    return out


def _rk4(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _adaptive(f, y, t0, t1, tol, h0=None, max_steps=1_000_000):
    span = float(t1) - float(t0)
    if span == 0.0:
        return y
    direction = math.copysign(1.0, span)
    h = direction * (abs(h0) if h0 else min(abs(span), 0.1))
    t = float(t0)
    h_min = 1e-13 * max(1.0, abs(t0), abs(t1))
    for _ in range(max_steps):
        remaining = float(t1) - t
        if remaining * direction <= 0.0:
            return y
        if abs(h) > abs(remaining):
            h = remaining
        full = _rk4(f, t, y, h)
        half = _rk4(f, t + 0.5 * h, _rk4(f, t, y, 0.5 * h), 0.5 * h)
        err = float(np.max(np.abs(half - full) / (1.0 + np.abs(half)))) / 15.0
        accepted = err <= tol
        if accepted:
            t = t + h if abs(h) < abs(remaining) else float(t1)
            y = half + (half - full) / 15.0
        h *= 4.0 if err == 0.0 else min(4.0, max(0.1, 0.9 * (tol / err) ** 0.2))
        # a short final step is legitimate; only a rejected one can underflow
        if not accepted and abs(h) < h_min:
            raise StepUnderflow(f"step {h:.3g} at t = {t:.6g}")
    raise StepUnderflow(f"more than {max_steps} steps")


def integrate_flow(z0, fld: PrescribedField, t0, t1, tol=1e-10, h0=None,
                   max_steps=1_000_000, with_divergence=False):
    """Adaptive RK4 (step doubling with local extrapolation) from t0 to t1.

    ``z0`` is one phase point (6,) or a batch (B, 6); the batch shares one
    step sequence, chosen from the worst member, so nearby starting points
    see identical discretizations. The error per step is measured relative
    to ``1 + |y|``. Integration backwards (t1 < t0) is allowed. With
    ``with_divergence`` a seventh column accumulating ``int S phi ds`` is
    appended (a 7-column input is continued as is).
    """
    z0 = np.asarray(z0, dtype=float)
    single = z0.ndim == 1
    y = np.atleast_2d(z0).copy()
    if with_divergence and y.shape[1] == 6:
        y = np.column_stack([y, np.zeros(y.shape[0])])
    y = _adaptive(lambda tt, yy: flow_rhs(tt, yy, fld), y, t0, t1, tol, h0, max_steps)
    return y[0] if single else y


def jacobian_matrix(z0, fld: PrescribedField, t0, t1, h=None, tol=1e-13):
    """Central-difference flow-map Jacobian from 12 perturbed integrations.

    ``z0`` may be a batch (B, 6); all ``12 B`` curves are integrated together.
    """
    z0 = np.asarray(z0, dtype=float)
    single = z0.ndim == 1
    z0 = np.atleast_2d(z0)
    B = z0.shape[0]
    hh = 1e-4 * (1.0 + np.linalg.norm(z0, axis=1)) if h is None else np.full(B, float(h))
    pts = np.repeat(z0, 12, axis=0).reshape(B, 12, 6)
    for d in range(6):
        pts[:, 2 * d, d] += hh
        pts[:, 2 * d + 1, d] -= hh
    end = integrate_flow(pts.reshape(-1, 6), fld, t0, t1, tol=tol).reshape(B, 12, 6)
    J = (end[:, 0::2, :] - end[:, 1::2, :]).transpose(0, 2, 1) / (2.0 * hh[:, None, None])
    return J[0] if single else J


def jacobian_fd(z0, fld: PrescribedField, t0, t1, h=None, tol=1e-13):
    """Determinant of the finite-difference flow-map Jacobian (LU, partial pivoting)."""
    det = np.linalg.det(jacobian_matrix(z0, fld, t0, t1, h, tol))
    if np.any(np.abs(det) < 1e-12):
        raise SingularJacobian(f"|det| = {np.min(np.abs(det)):.3g}")
    return float(det) if np.ndim(det) == 0 else det


def jacobian_formula(z0, fld: PrescribedField, t0, t1, exponent=3.0, tol=1e-13):
    """``exp[k phi(t0, x0) - k phi(t1, x1)]`` with ``k = exponent`` (3 is correct)."""
    z0 = np.asarray(z0, dtype=float)
    z1 = np.atleast_2d(integrate_flow(z0, fld, t0, t1, tol=tol))
    out = np.exp(exponent * (fld.phi(t0, np.atleast_2d(z0)[:, :3]) - fld.phi(t1, z1[:, :3])))
    return float(out[0]) if z0.ndim == 1 else out


# ---------------------------------------------------------------------------
# Liouville functional and representation formula
# ---------------------------------------------------------------------------

def default_f_in(z):
    """Product bump on ``|x_i| < 1``, ``|p_i| < 1`` (6D, C-infinity)."""
    z = np.atleast_2d(z)
    out = np.ones(z.shape[0])
    for d in range(6):
        out *= bump(z[:, d])
    return out


def _midpoint_grid(n, box):
    axes, vol = [], 1.0
    for lo, hi in box:
        h = (hi - lo) / n
        axes.append(lo + h * (np.arange(n) + 0.5))
        vol *= h
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh]), vol


def liouville_functional(f_in, q, fld: PrescribedField, t, n=6, box=None,
                         method="formula", tol=1e-11, trajectory=None):
    """``int int Q(f e^{-4 phi}) e^{3 phi} dp dx`` at time ``t``, ``Q(z) = z^q``.

    Tensor midpoint quadrature over the initial points, pushed to ``t``.
    The volume element is ``e^{3 (phi(0, x0) - phi(t, x_t))}`` for
    ``method="formula"``, and ``exp(-3 int S phi ds)`` integrated along each
    curve for ``method="transported"``. ``trajectory`` can pass a
    precomputed ``(z0, z_t, vol)`` triple.
    """
    box = box or [(-1.0, 1.0)] * 6
    if trajectory is None:
        z0, vol = _midpoint_grid(n, box)
        f0 = f_in(z0)
        keep = f0 > 0
        z0, f0 = z0[keep], f0[keep]
        zt = integrate_flow(z0, fld, 0.0, t, tol=tol, with_divergence=True)
    else:
        z0, zt, vol = trajectory
        f0 = f_in(z0)
    phi0 = fld.phi(0.0, z0[:, :3])
    phit = fld.phi(t, zt[:, :3])
    a = f0 * np.exp(-4.0 * phi0)                # f e^{-4 phi} along the curve
    if method == "formula":
        jac = np.exp(3.0 * (phi0 - phit))
    elif method == "transported":
        jac = np.exp(-3.0 * zt[:, 6])
    else:
        raise ValueError(method)
    return float(np.sum(a**q * np.exp(3.0 * phit) * jac) * vol)


def pull_back_f(f_in, fld: PrescribedField, t, z_t, tol=1e-12):
    """``f(t, z)`` by the representation formula: integrate back to 0, then reweight."""
    z_t = np.atleast_2d(np.asarray(z_t, dtype=float))
    z0 = integrate_flow(z_t, fld, t, 0.0, tol=tol)
    return f_in(z0) * np.exp(4.0 * fld.phi(t, z_t[:, :3]) - 4.0 * fld.phi(0.0, z0[:, :3]))


# ---------------------------------------------------------------------------
# catalog runner
# ---------------------------------------------------------------------------

@dataclass
class FlowCheckRow:
    check: str
    field: str
    q: float
    t: float
    value: float
    reference: float
    error: float
    tol: float

    @property
    def passed(self):
        return bool(np.isfinite(self.error) and self.error <= self.tol)

    COLUMNS = ("check", "field", "q", "t", "value", "reference", "error", "tol", "passed")

    def as_row(self):
        return (self.check, self.field, self.q, self.t, self.value, self.reference,
                self.error, self.tol, int(self.passed))


def _random_points(rng, n):
    x = rng.uniform(-1.0, 1.0, size=(n, 3))
    p = rng.uniform(-1.0, 1.0, size=(n, 3))
    return np.column_stack([x, p])


def run_catalog(fields=None, qs=(1, 2, 3), times=(0.5, 1.0, 2.0), n_points=20,
                seed=20240607, jacobian_exponent=3.0, jac_tol=1e-6, liouville_tol=1e-6,
                n_quad=6, methods=("formula", "transported"), t_jac=1.0) -> list:
    """All flow checks over the field catalog; one :class:`FlowCheckRow` each.

    ``jacobian_exponent`` other than 3 deliberately breaks the Jacobian
    formula (negative test hook).
    """
    fields = catalog() if fields is None else list(fields)
    rows = []
    for fld in fields:
        rng = np.random.default_rng(seed)
        pts = _random_points(rng, n_points)
        # derivative consistency
        err = fld.check_derivatives(0.7, pts[:, :3])
        rows.append(FlowCheckRow("derivatives", fld.name, 0, 0.7, err, 0.0, err, 1e-6))
        # Jacobian determinant against the closed form
        det = jacobian_fd(pts, fld, 0.0, t_jac)
        ref = jacobian_formula(pts, fld, 0.0, t_jac, exponent=jacobian_exponent)
        rel = np.abs(det - ref) / np.abs(ref)
        k = int(np.argmax(rel))
        rows.append(FlowCheckRow("jacobian", fld.name, 0, t_jac, det[k], ref[k], rel[k], jac_tol))
        # reversibility
        tol = 1e-10
        fw = integrate_flow(pts, fld, 0.0, t_jac, tol=tol)
        back = integrate_flow(fw, fld, t_jac, 0.0, tol=tol)
        err = float(np.max(np.abs(back - pts)))
        rows.append(FlowCheckRow("reversibility", fld.name, 0, t_jac, err, 0.0, err, 10 * tol))
        # Liouville functional
        z0, vol = _midpoint_grid(n_quad, [(-1.0, 1.0)] * 6)
        f0 = default_f_in(z0)
        z0 = z0[f0 > 0]
        ref = {q: liouville_functional(default_f_in, q, fld, 0.0, n_quad) for q in qs}
        state, t_prev = np.column_stack([z0, np.zeros(z0.shape[0])]), 0.0
        for t in sorted(times):
            # continue the same curves (with divergence column) to the next time
            state = integrate_flow(state, fld, t_prev, t, tol=1e-11)
            t_prev = t
            for q in qs:
                for method in methods:
                    val = liouville_functional(default_f_in, q, fld, t, method=method,
                                               trajectory=(z0, state, vol))
                    rel = abs(val - ref[q]) / abs(ref[q])
                    rows.append(FlowCheckRow(f"liouville-{method}", fld.name, q, t,
                                             val, ref[q], rel, liouville_tol))
    return rows
