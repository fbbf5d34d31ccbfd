import math
import os
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nordvlasov.core import SimConfig, vacuum
from nordvlasov.errors import GridMismatch
from nordvlasov.ladder import Snapshots, cauchy_metrics, run_ladder

T = np.linspace(0.0, 1.0, 11)
X = np.linspace(-2.0, 2.0, 41)


def snaps(mu, phi):
    return Snapshots(T, X, np.asarray(mu, float), np.asarray(phi, float))


def test_identical_rungs_have_zero_distance():
    rng = np.random.default_rng(0)
    a = snaps(rng.random((11, 41)), rng.random((11, 41)))
    assert cauchy_metrics(a, a) == (0.0, 0.0, 0.0)


def test_constant_offset_gives_offset_times_root_volume():
    z = np.zeros((11, 41))
    a, b = snaps(z, z), snaps(z + 0.5, z + 0.5)
    mu, phi, eph = cauchy_metrics(a, b)
    assert mu == pytest.approx(0.5 * math.sqrt(4.0), rel=1e-14)
    assert phi == pytest.approx(0.5 * math.sqrt(4.0), rel=1e-14)
    assert eph == pytest.approx((math.exp(0.5) - 1) * 4.0 ** 0.25, rel=1e-14)


def test_box_restricts_the_window():
    z = np.zeros((11, 41))
    bump = np.where(np.abs(X) > 1.5, 1.0, 0.0)[None, :] * np.ones((11, 1))
    assert cauchy_metrics(snaps(z, z), snaps(bump, z), box=(-1.0, 1.0))[0] == 0.0


def test_smooth_difference_matches_analytic_norm():
    t = np.linspace(0, 1, 401)
    x = np.linspace(-6, 6, 1201)
    d = np.outer(1 + t, np.exp(-x**2))
    z = np.zeros_like(d)
    a = Snapshots(t, x, z, z)
    b = Snapshots(t, x, d, z)
    # int (1+t)^2 dt = 7/3, int e^{-2x^2} dx = sqrt(pi/2)
    exact = math.sqrt(7 / 3 * math.sqrt(math.pi / 2))
    assert cauchy_metrics(a, b)[0] == pytest.approx(exact, rel=1e-5)


grids = arrays(float, (11, 41), elements=st.floats(-3, 3))


@given(grids, grids, grids)
@settings(max_examples=40, deadline=None)
def test_metrics_are_symmetric_and_satisfy_triangle_inequality(u, v, w):
    a, b, c = snaps(u, u), snaps(v, v), snaps(w, w)
    ab, ba = cauchy_metrics(a, b), cauchy_metrics(b, a)
    assert ab == ba
    ac, bc = cauchy_metrics(a, c), cauchy_metrics(b, c)
    for i in range(3):
        assert ac[i] <= ab[i] + bc[i] + 1e-12 * (1 + ac[i])


def test_mismatched_grids_are_rejected():
    z = np.zeros((11, 41))
    a = snaps(z, z)
    b = Snapshots(T, X + 1e-9, z, z)
    with pytest.raises(GridMismatch):
        cauchy_metrics(a, b)
    with pytest.raises(GridMismatch):
        cauchy_metrics(a, Snapshots(T[:-1], X, z[:-1], z[:-1]))


def test_ladder_needs_increasing_indices(small_cfg, bump_data):
    with pytest.raises(ValueError):
        run_ladder(small_cfg, bump_data, [8])
    with pytest.raises(ValueError):
        run_ladder(small_cfg, bump_data, [8, 4])


def test_vacuum_ladder_is_identically_zero(tmp_path):
    cfg = SimConfig(x_min=-8, x_max=8, nx=64, t_final=0.3, profile="vacuum")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        rep = run_ladder(cfg, vacuum(), [2, 4])
    assert rep.pairs == [(2, 4, 0.0, 0.0, 0.0)]
    assert rep.energy_uniform() and rep.finite() and rep.young_ok()


def test_small_ladder_reports_and_writes(small_cfg, bump_data, tmp_path):
    rep = run_ladder(small_cfg, bump_data, [2, 4, 8])
    assert rep.finite()
    assert rep.energy_uniform(0.02)
    assert rep.young_ok()
    assert max(rep.split_error.values()) < 1e-12
    assert len(rep.pairs) == 2
    paths = rep.write(str(tmp_path))
    assert [os.path.basename(p) for p in paths] == [
        "ladder.csv", "ladder_mu_l2.dat", "ladder_phi_l2.dat", "ladder_exp_phi_l4.dat"]
    lines = open(paths[0]).read().splitlines()
    assert lines[0].startswith("n,n_next,mu_l2") and len(lines) == 4
    dat = np.loadtxt(paths[1])
    np.testing.assert_array_equal(dat[:, 0], [2, 4])
    np.testing.assert_array_equal(dat[:, 1], rep.metric("mu_l2"))
