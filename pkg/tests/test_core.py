import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nordvlasov.core import (CasimirSpec, InitialData, Primitive, SimConfig, bump,
                             config_schema, dbump, gaussian_bump, load_table,
                             make_initial_data, parse_config_text, sample_ensemble,
                             two_stream, vacuum, validate_config)
from nordvlasov.errors import (CflViolation, ConfigError, DomainTooSmall,
                               InvalidExponents, NonpositiveRun)


# -- validation ------------------------------------------------------------

def test_light_cone_domain_accepted():
    cfg = SimConfig(x_min=-20, x_max=20, nx=512, t_final=10, margin=1)
    assert validate_config(cfg, vacuum(R0=2.0)) is cfg


def test_small_domain_rejected():
    cfg = SimConfig(x_min=-5, x_max=5, nx=128, t_final=10)
    with pytest.raises(DomainTooSmall):
        validate_config(cfg, vacuum(R0=2.0))


def test_dt_above_dx_rejected():
    cfg = SimConfig(x_min=-20, x_max=20, nx=401, dt=0.2, t_final=1)   # dx = 0.1
    with pytest.raises(CflViolation):
        validate_config(cfg, vacuum(R0=2.0))


def test_every_violation_is_listed():
    cfg = SimConfig(x_min=-3, x_max=3, nx=8, dt=5.0, t_final=-1, n_particles=0)
    with pytest.raises(ConfigError) as exc:
        validate_config(cfg, vacuum(R0=2.0))
    codes = exc.value.codes
    assert codes.count("NonpositiveRun") == 3
    assert "CflViolation" in codes
    assert type(exc.value) is ConfigError


def test_nonpositive_run():
    with pytest.raises(NonpositiveRun):
        validate_config(SimConfig(t_final=0.0), vacuum())


# -- profiles ----------------------------------------------------------------

@given(st.floats(-0.99, 0.99), st.floats(0.2, 2.0))
def test_dbump_matches_difference_quotient(s, width):
    h = 1e-6
    fd = (bump(s + h, width) - bump(s - h, width)) / (2 * h)
    assert abs(fd - dbump(s, width)) <= 1e-5 * (1 + abs(fd))


def test_bump_vanishes_outside_unit_interval():
    assert np.all(bump(np.array([-1.0, 1.0, 1.5, -7.0])) == 0.0)
    assert bump(0.0) == 1.0


def test_primitive_matches_adaptive_quadrature():
    h = lambda y: bump(np.asarray(y) / 2.0)
    prim = Primitive(h, -2.0, 2.0)
    for y in (-1.7, -0.3, 0.0, 0.91, 2.0, 5.0):
        ref = integrate.quad(lambda u: float(h(u)), -2.0, min(y, 2.0), epsabs=1e-14)[0]
        assert prim(np.array([y]))[0] == pytest.approx(ref, abs=1e-12)


def test_gaussian_bump_normalized_to_mass():
    d = gaussian_bump(mass=1.0, phi0_amplitude=0.1)
    # independent quadrature of the x factor times the p factor cubed
    amp = d.params["amplitude"]
    bx = integrate.quad(lambda x: float(np.exp(-d.phi0(np.array(x))) * bump(x / 2.0)), -2, 2,
                        epsabs=1e-13)[0]
    bp = integrate.quad(lambda p: float(bump(p)), -1, 1, epsabs=1e-13)[0]
    assert amp * bx * bp**3 == pytest.approx(1.0, rel=1e-10)


def test_two_stream_is_nonnegative_and_symmetric():
    d = two_stream()
    rng = np.random.default_rng(1)
    x = rng.uniform(-2, 2, 500)
    p = rng.uniform(-1.1, 1.1, (500, 3))
    f = d.f_in(x, p)
    assert np.all(f >= 0)
    np.testing.assert_allclose(f, d.f_in(-x, -p), rtol=1e-14)


def test_unknown_profile():
    with pytest.raises(ConfigError):
        make_initial_data(SimConfig(profile="nope"))


# -- sampling ----------------------------------------------------------------

def test_vacuum_gives_empty_ensemble():
    cfg = SimConfig(n_particles=1000)
    with pytest.warns(UserWarning, match="vacuum"):
        ens = sample_ensemble(vacuum(), cfg)
    assert len(ens) == 0 and ens.is_vacuum
    assert float(np.sum(ens.m)) == 0.0


def test_single_cell_invariants():
    # one lattice cell: hx = 0.5, hp = 1 -> V0 = 0.5; f = 2, phi0 = 0
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    data = InitialData(f_in=lambda x, p: np.full(np.shape(x), 2.0), phi0=zero, dphi0=zero,
                       phi1=zero, support_radius=0.25, p_box=((-0.5, 0.5),) * 3)
    ens = sample_ensemble(data, SimConfig(n_sample_x=1, n_sample_p=1))
    assert len(ens) == 1
    k = ens[0]
    assert (k.a, k.c, k.m) == (2.0, 0.5, 1.0)


def test_sampling_is_deterministic(bump_data):
    cfg = SimConfig(n_sample_x=60, n_sample_p=5)
    a, b = sample_ensemble(bump_data, cfg), sample_ensemble(bump_data, cfg)
    for name in ("x", "p", "a", "m", "c"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_charge_is_product_of_invariants(bump_data):
    ens = sample_ensemble(bump_data, SimConfig(n_sample_x=40, n_sample_p=6))
    assert np.array_equal(ens.m, ens.a * ens.c)
    assert np.all(ens.a >= 0) and np.all(ens.c > 0)
    assert not ens.m.flags.writeable


def test_particle_mass_converges_at_second_order():
    # the bump is normalized by quadrature to unit mass (independent oracle)
    data = gaussian_bump(mass=1.0, width=1.0)
    errs = []
    for nx, npp in ((40, 6), (80, 12)):
        ens = sample_ensemble(data, SimConfig(n_sample_x=nx, n_sample_p=npp))
        errs.append(abs(float(np.sum(ens.m)) - 1.0))
    assert errs[0] / errs[1] >= 2 ** 1.8


# -- exponents ---------------------------------------------------------------

def test_casimir_exponents():
    CasimirSpec(1.0, -1.0).check()
    CasimirSpec(2.0, -2.5).check()
    with pytest.raises(InvalidExponents):
        CasimirSpec(0.5, 0.0).check()
    with pytest.raises(InvalidExponents):
        CasimirSpec(1.0, -1.5).check()


# -- config files ------------------------------------------------------------

def test_config_text_roundtrip():
    cfg = parse_config_text("""
        # comment line
        nx = 256        # trailing comment
        t_final = 1.5
        casimir_q = 1, 2, 3
        profile = two-stream
        profile.drift = 0.4
    """)
    assert cfg.nx == 256 and cfg.t_final == 1.5
    assert cfg.casimir_q == (1.0, 2.0, 3.0)
    assert cfg.params == {"drift": 0.4}
    assert make_initial_data(cfg).params["drift"] == 0.4


def test_config_rejects_unknown_key_and_bad_value():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("bogus = 1")
    with pytest.raises(ConfigError, match="bad value"):
        parse_config_text("nx = many")
    with pytest.raises(ConfigError, match="key = value"):
        parse_config_text("nx 12")


def test_new_profile_drops_old_parameters():
    base = parse_config_text("profile = two-stream\nprofile.drift = 0.4")
    cfg = parse_config_text("profile = gaussian-bump", base)
    assert cfg.params == {}


def test_schema_lists_every_field():
    text = config_schema()
    for name in ("x_min", "nx", "dt", "mollifier_n", "profile", "casimir_q", "threads"):
        assert name in text


def test_table_profile(tmp_path):
    rng = np.random.default_rng(3)
    vals = rng.uniform(0, 1, (4, 2, 2, 2))
    f = tmp_path / "f.txt"
    f.write_text("# sampled table\n4 2 2 2 -1 1 -1 1 -1 1 -1 1\n"
                 + " ".join(f"{v:.17g}" for v in vals.ravel()) + "\n")
    data = load_table(f)
    assert data.support_radius == 1.0
    ens = sample_ensemble(data, SimConfig())
    assert len(ens) == 32
    # midpoint of each lattice cell hits the table value exactly
    assert sorted(ens.f0) == sorted(vals.ravel())
    assert float(np.sum(ens.m)) == pytest.approx(vals.sum() * 0.5 * 1.0**3)


def test_table_rejects_negative(tmp_path):
    f = tmp_path / "f.txt"
    f.write_text("1 1 1 1 -1 1 -1 1 -1 1 -1 1\n-1\n")
    with pytest.raises(ConfigError):
        load_table(f)
