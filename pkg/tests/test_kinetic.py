import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from nordvlasov.core import Ensemble, SimConfig, vacuum
from nordvlasov.errors import OutOfDomain
from nordvlasov.kinetic import (ForceField, Simulation, characteristic_rhs, deposit, push)
from nordvlasov.wavefield import FieldSlice

X_MIN, DX, NX = -4.0, 0.05, 161
GRID = X_MIN + DX * np.arange(NX)


def ensemble(x, p, a=None, c=None):
    x = np.asarray(x, dtype=float)
    n = x.size
    a = np.ones(n) if a is None else np.asarray(a, dtype=float)
    c = np.ones(n) if c is None else np.asarray(c, dtype=float)
    return Ensemble(x=x.copy(), p=np.array(p, dtype=float).reshape(n, 3), a=a, m=a * c, c=c,
                    f0=a, phi0=np.zeros(n), cell_volume=1.0)


def slice_from(t, phi, ft, fx):
    z = np.zeros(NX)
    full = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (NX,)).copy()
    return FieldSlice(t, X_MIN, DX, full(phi), full(ft), full(fx), z, z.copy(), z.copy())


def test_rhs_at_rest_in_a_gradient():
    s = slice_from(0.0, 0.0, 0.0, 0.5)
    v1, dp = characteristic_rhs(np.array([0.0]), np.zeros((1, 3)), ForceField(s), 0.0)
    assert v1[0] == 0.0
    np.testing.assert_allclose(dp, [[-0.5, 0.0, 0.0]])


def test_rhs_pure_time_derivative_damps_momentum():
    s = slice_from(0.0, 0.0, 2.0, 0.0)
    p = np.array([[0.3, -0.4, 1.2]])
    v1, dp = characteristic_rhs(np.array([1.0]), p, ForceField(s), 0.0)
    assert v1[0] == pytest.approx(0.3 / math.sqrt(1 + 0.09 + 0.16 + 1.44))
    np.testing.assert_allclose(dp, -2.0 * p)


def test_force_field_refuses_times_outside_its_interval():
    a, b = slice_from(0.0, 0, 0, 0), slice_from(0.1, 0, 0, 0)
    with pytest.raises(OutOfDomain):
        ForceField(a, b).at(0.2, [0.0])


@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3)),
                min_size=1, max_size=20),
       st.sampled_from([0.01, 0.1, 0.5]))
@settings(max_examples=40, deadline=None)
def test_free_streaming_is_exact(rows, dt):
    arr = np.array(rows)
    ens = ensemble(arr[:, 0], arr[:, 1:])
    z = slice_from(0.0, 0, 0, 0)
    out = push(ens, z, slice_from(dt, 0, 0, 0), dt)
    g = np.sqrt(1 + np.sum(arr[:, 1:] ** 2, axis=1))
    np.testing.assert_allclose(out.x, arr[:, 0] + dt * arr[:, 1] / g, rtol=0, atol=1e-15)
    assert np.array_equal(out.p, ens.p)
    assert out.a is ens.a and out.c is ens.c and out.m is ens.m


def _push_linear_phi(dt):
    # phi = t everywhere: S phi = 1, so p(t) = p0 e^{-t}
    T = math.log(2.0)
    n = int(round(T / dt))
    dt = T / n
    ens = ensemble([0.0], [[0.6, 0.2, -0.4]], a=[1.0])
    for k in range(n):
        ens = push(ens, slice_from(k * dt, k * dt, 1, 0), slice_from((k + 1) * dt, (k + 1) * dt, 1, 0), dt)
    return ens


def test_linear_in_time_potential_halves_momentum():
    errs = []
    for dt in (0.02, 0.01):
        ens = _push_linear_phi(dt)
        errs.append(np.max(np.abs(ens.p[0] - np.array([0.3, 0.1, -0.2]))))
    assert errs[0] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    # f = a e^{4 phi} at phi = ln 2
    assert ens.a[0] * math.exp(4 * math.log(2.0)) == pytest.approx(16.0)


def _push_error(dt, T=1.0):
    phi = lambda t, x: 0.3 * t * x
    ft = lambda t, x: 0.3 * x
    fx = lambda t, x: 0.3 * t + 0 * x
    z0 = np.array([0.2, 0.5, -0.3, 0.4])

    def rhs(t, z):
        x, p = z[0], z[1:]
        g = math.sqrt(1 + p @ p)
        v1 = p[0] / g
        s = ft(t, x) + v1 * fx(t, x)
        dp = -s * p
        dp[0] -= fx(t, x) / g
        return np.concatenate([[v1], dp])

    ref = solve_ivp(rhs, (0, T), z0, rtol=1e-12, atol=1e-13, method="DOP853").y[:, -1]
    n = int(round(T / dt))
    ens = ensemble([z0[0]], [z0[1:]])
    for k in range(n):
        a = slice_from(k * dt, phi(k * dt, GRID), ft(k * dt, GRID), fx(k * dt, GRID))
        t1 = (k + 1) * dt
        b = slice_from(t1, phi(t1, GRID), ft(t1, GRID), fx(t1, GRID))
        ens = push(ens, a, b, dt)
    return np.max(np.abs(np.concatenate([ens.x, ens.p[0]]) - ref))


def test_push_is_second_order():
    e1, e2, e3 = _push_error(0.1), _push_error(0.05), _push_error(0.025)
    assert math.log2(e1 / e2) >= 1.8 and math.log2(e2 / e3) >= 1.8


def test_leaving_the_grid_raises():
    ens = ensemble([GRID[-1] - 1e-3], [[10.0, 0, 0]])
    with pytest.raises(OutOfDomain):
        push(ens, slice_from(0, 0, 0, 0), slice_from(0.1, 0, 0, 0), 0.1)


def test_single_particle_on_a_node():
    k = 40
    ens = ensemble([GRID[k]], [[0.0, 0.0, 0.0]], a=[2.0], c=[0.5])
    mom = deposit(ens, slice_from(0.0, 0, 0, 0))
    expect = np.zeros(NX)
    expect[k] = 1.0 / DX
    for g in (mom.mu, mom.sigma, mom.rho, mom.kinetic):
        np.testing.assert_allclose(g, expect, rtol=1e-14)
    assert np.all(mom.j == 0) and np.all(mom.momentum == 0)


def test_particle_between_nodes_splits_evenly():
    k = 10
    ens = ensemble([GRID[k] + DX / 2], [[0.0, 0.0, 0.0]])
    mom = deposit(ens, slice_from(0.0, 0, 0, 0))
    assert mom.sigma[k] == pytest.approx(0.5 / DX, rel=1e-12)
    assert mom.sigma[k + 1] == pytest.approx(0.5 / DX, rel=1e-12)
    assert mom.sigma.sum() * DX == pytest.approx(1.0, rel=1e-14)


def test_constant_potential_weights():
    # phi = ln 2: f V = a c e^phi = 2, rho = e^{-phi} sigma = 1 (per dx)
    ens = ensemble([GRID[20]], [[math.sqrt(3.0), 0, 0]])
    mom = deposit(ens, slice_from(0.0, math.log(2.0), 0, 0))
    assert mom.sigma[20] * DX == pytest.approx(2.0)
    assert mom.rho[20] * DX == pytest.approx(1.0)
    assert mom.mu[20] * DX == pytest.approx(1.0)          # gamma = 2
    assert mom.kinetic[20] * DX == pytest.approx(4.0)
    assert mom.j[20] * DX == pytest.approx(math.sqrt(3.0) / 2)


@given(st.lists(st.tuples(st.floats(-3.9, 3.9), st.floats(-5, 5), st.floats(-5, 5),
                          st.floats(-5, 5), st.floats(0, 10)), min_size=1, max_size=50),
       st.floats(-1, 1))
@settings(max_examples=50, deadline=None)
def test_current_never_exceeds_density(rows, phi):
    arr = np.array(rows)
    ens = ensemble(arr[:, 0], arr[:, 1:4], a=arr[:, 4])
    mom = deposit(ens, slice_from(0.0, phi, 0, 0))
    assert np.all(np.abs(mom.j) <= mom.rho * (1 + 1e-14))
    assert np.all(mom.mu >= 0) and np.all(mom.mu <= mom.sigma * (1 + 1e-14))


def test_deposit_is_reproducible_for_a_fixed_thread_count():
    rng = np.random.default_rng(3)
    ens = ensemble(rng.uniform(-3.5, 3.5, 5000), rng.normal(size=(5000, 3)),
                   a=rng.uniform(0, 1, 5000))
    s = slice_from(0.0, 0.1 * np.sin(GRID), 0, 0)
    names = ("mu", "sigma", "rho", "j", "kinetic", "momentum")
    for threads in (1, 4):
        a = deposit(ens, s, qs=(1.0, 2.0), threads=threads)
        b = deposit(ens, s, qs=(1.0, 2.0), threads=threads)
        for name in names:
            assert np.array_equal(getattr(a, name), getattr(b, name))
        for q in (1.0, 2.0):
            assert np.array_equal(a.casimir[q], b.casimir[q])
    # different partitions only reorder the sums
    one = deposit(ens, s, threads=1)
    many = deposit(ens, s, threads=4)
    for name in names:
        u, v = getattr(one, name), getattr(many, name)
        assert np.max(np.abs(u - v)) <= 1e-13 * np.max(np.abs(u))


def test_vacuum_stays_exactly_zero():
    cfg = SimConfig(x_min=-8, x_max=8, nx=64, t_final=0.5, profile="vacuum")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        sim = Simulation(cfg, vacuum())
    for st_ in sim.run():
        for g in (st_.slice.phi, st_.slice.dphi_dt, st_.slice.dphi_dx, st_.moments.mu):
            assert np.all(g == 0)
    assert st_.step == cfg.n_steps


def test_coupled_run_keeps_invariants(small_cfg, bump_data):
    sim = Simulation(small_cfg, bump_data)
    m0 = sim.state.ens.m.copy()
    total = math.fsum(m0)
    for s in sim.run():
        assert np.all(s.moments.mu >= 0)
        assert np.max(s.slice.psi) <= 0
        assert np.array_equal(s.ens.m, m0)
        assert math.fsum(s.ens.m) == total
    assert s.t == pytest.approx(small_cfg.t_final)


def test_coupled_run_is_deterministic(small_cfg, bump_data):
    def final():
        s = None
        for s in Simulation(small_cfg, bump_data).run():
            pass
        return s

    a, b = final(), final()
    assert np.array_equal(a.ens.x, b.ens.x) and np.array_equal(a.ens.p, b.ens.p)
    assert np.array_equal(a.slice.phi, b.slice.phi)
