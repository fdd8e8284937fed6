import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from satcellfree.channel import (
    beam_pattern,
    build_geometry,
    build_statistics,
    correlation_matrix,
    draw_realization,
    draw_shadowing,
    element_positions,
    hermitian_sqrt,
    los_vector,
    satellite_pathloss,
    terrestrial_pathloss,
    terrestrial_pathloss_db,
)
from satcellfree.config import ScenarioConfig

from conftest import desk_config, scalar_stats


# -- geometry ---------------------------------------------------------------

def test_geometry_inside_area():
    cfg = ScenarioConfig(area_side_km=math.sqrt(20.0), num_aps=40)
    ap, users = build_geometry(cfg)
    assert ap.shape == (40, 3) and users.shape == (20, 3)
    side = math.sqrt(20.0)
    assert np.all((ap[:, :2] >= 0) & (ap[:, :2] <= side))
    assert np.all((users[:, :2] >= 0) & (users[:, :2] <= side))
    assert np.all(ap[:, 2] == pytest.approx(0.010))
    assert np.all(users[:, 2] == pytest.approx(0.0015))


def test_geometry_deterministic():
    cfg = ScenarioConfig(num_aps=1, rng_seed=5)
    a1, u1 = build_geometry(cfg)
    a2, u2 = build_geometry(cfg)
    np.testing.assert_array_equal(a1, a2)
    np.testing.assert_array_equal(u1, u2)


def test_geometry_uniform_mean():
    n = 10_000
    side = math.sqrt(20.0)
    cfg = ScenarioConfig(num_aps=n, area_side_km=side)
    ap, _ = build_geometry(cfg)
    se = side / math.sqrt(12.0) / math.sqrt(n)
    assert np.all(np.abs(ap[:, :2].mean(axis=0) - side / 2) < 3 * se)


# -- path loss --------------------------------------------------------------

def test_terrestrial_pathloss_hand_value():
    cfg = ScenarioConfig()
    # 5 + 5 - 8.50 - 20 log10(20) - 38.63 * 3
    assert terrestrial_pathloss_db(1000.0, cfg) == pytest.approx(-140.41, abs=5e-3)
    assert 10 * np.log10(terrestrial_pathloss(1000.0, cfg)) == pytest.approx(-140.4106, abs=1e-4)


def test_terrestrial_pathloss_slope():
    cfg = ScenarioConfig()
    drop = terrestrial_pathloss_db(500.0, cfg) - terrestrial_pathloss_db(1000.0, cfg)
    assert drop == pytest.approx(38.63 * math.log10(2.0))
    assert drop == pytest.approx(11.63, abs=5e-3)


def test_terrestrial_pathloss_rejects_nonpositive_distance():
    with pytest.raises(ValueError):
        terrestrial_pathloss([10.0, 0.0], ScenarioConfig())


def test_shadowing_variance():
    zeta = draw_shadowing(100_000, 8.0, np.random.default_rng(0))
    assert np.var(zeta) == pytest.approx(64.0, rel=0.02)


def _j1_quadrature(x):
    val, _ = integrate.quad(lambda t: math.cos(t - x * math.sin(t)), 0.0, math.pi)
    return val / math.pi


@pytest.mark.parametrize("x", [0.3, 1.0, 2.5, 3.8317, 7.0])
def test_beam_pattern_against_bessel_integral(x):
    lam, a = 1.0, 2.0
    phi = math.asin(x * lam / (2 * math.pi * a))
    expected = 4 * (_j1_quadrature(x) / x) ** 2
    assert beam_pattern(phi, lam, a) == pytest.approx(expected, abs=1e-10)


def test_beam_pattern_limits():
    assert beam_pattern(0.0, 0.015, 0.05) == pytest.approx(1.0)
    assert beam_pattern(1e-12, 0.015, 0.05) == pytest.approx(1.0)
    assert beam_pattern(math.pi / 2 + 0.1, 0.015, 0.05) == 0.0
    assert beam_pattern(-0.1, 0.015, 0.05) == 0.0


def test_satellite_pathloss_hand_value():
    cfg = ScenarioConfig(sat_position_km=(0.0, 0.0, 600.0), beam_center_km=(0.0, 0.0, 0.0))
    link = satellite_pathloss([[0.0, 0.0, 0.0]], cfg)
    assert link.distance_m[0] == pytest.approx(600e3)
    assert link.off_boresight[0] == pytest.approx(0.0, abs=1e-12)
    assert link.beam_gain[0] == pytest.approx(1.0)
    # 26.9 + 5 + 0 - 32.45 - 26.02 - 115.56
    assert link.beta_db[0] == pytest.approx(-142.13, abs=5e-3)
    assert link.elevation[0] == pytest.approx(math.pi / 2)


def test_satellite_pathloss_angles():
    cfg = ScenarioConfig(sat_position_km=(300.0, 0.0, 400.0), beam_center_km=(0.0, 0.0, 0.0))
    link = satellite_pathloss([[0.0, 0.0, 0.0]], cfg)
    assert link.elevation[0] == pytest.approx(math.atan2(400, 300))
    assert link.azimuth[0] == pytest.approx(0.0)
    assert link.distance_m[0] == pytest.approx(500e3)


def test_satellite_pathloss_rejects_user_at_satellite():
    cfg = ScenarioConfig()
    with pytest.raises(ValueError):
        satellite_pathloss([list(cfg.sat_position_km)], cfg)


def test_pathloss_decreasing_in_distance():
    cfg = ScenarioConfig(sat_position_km=(0.0, 0.0, 600.0))
    d = np.linspace(10.0, 5000.0, 50)
    assert np.all(np.diff(terrestrial_pathloss(d, cfg)) < 0)
    users = np.stack([np.zeros(50), np.zeros(50), -np.linspace(0, 100, 50)], axis=1)
    cfg = cfg.replace(beam_center_km=(0.0, 0.0, 0.0))
    assert np.all(np.diff(satellite_pathloss(users, cfg).beta) < 0)


# -- LoS vector and correlation --------------------------------------------

def test_element_positions():
    c = element_positions(3, 2, 0.5, 0.7)
    assert c.shape == (6, 3)
    assert_allclose(c[:, 0], 0.0)
    assert_allclose(c[:, 1], [0, 0.5, 1.0, 0, 0.5, 1.0])
    assert_allclose(c[:, 2], [0, 0, 0, 0.7, 0.7, 0.7])


def test_los_vector_rayleigh_limit():
    cfg = desk_config()
    assert_allclose(los_vector(0.3, 1.1, 0.0, 1e-12, cfg), 0.0)


def test_los_vector_modulus():
    cfg = desk_config()
    g = los_vector(0.4, -0.7, 10.0, 2e-14, cfg)
    assert_allclose(np.abs(g), math.sqrt(10 * 2e-14 / 11))


def test_los_vector_broadside_constant():
    cfg = desk_config(sat_array=(2, 2))
    g = los_vector(0.0, 0.0, 3.0, 1.0, cfg)
    assert_allclose(g, math.sqrt(0.75) * np.ones(4))


def test_correlation_uncorrelated_limit():
    cfg = desk_config(correlation_coeff=0.0)
    assert_allclose(correlation_matrix(2.0, 1.0, cfg), np.eye(16))


def test_correlation_eigenvalues():
    cfg = desk_config(sat_array=(2, 2), correlation_coeff=0.5)
    scale = 3.0 / (2.0 + 1.0)
    vals = np.linalg.eigvalsh(correlation_matrix(3.0, 2.0, cfg))
    expected = sorted(a * b * scale for a in (1.5, 0.5) for b in (1.5, 0.5))
    assert_allclose(vals, expected)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.0, 0.999), n_h=st.integers(1, 6), n_v=st.integers(1, 6),
       kappa=st.floats(0.0, 100.0), beta=st.floats(1e-3, 10.0))
def test_correlation_psd_and_trace(r, n_h, n_v, kappa, beta):
    cfg = desk_config(sat_array=(n_h, n_v), correlation_coeff=r)
    R = correlation_matrix(beta, kappa, cfg)
    assert_allclose(R, R.conj().T)
    tr = np.trace(R).real
    assert tr == pytest.approx(n_h * n_v * beta / (kappa + 1))
    assert np.linalg.eigvalsh(R).min() >= -1e-10 * tr


def test_statistics_power_conservation(desk):
    cfg, stats, _ = desk
    n = stats.num_antennas
    los_pow = np.sum(np.abs(stats.los) ** 2, axis=1) / n
    scat_pow = np.real(np.trace(stats.corr, axis1=1, axis2=2)) / n
    k = stats.kappa
    assert_allclose(los_pow, k * stats.beta_sat / (k + 1))
    assert_allclose(scat_pow, stats.beta_sat / (k + 1))
    assert_allclose(los_pow + scat_pow, stats.beta_sat)


def test_statistics_reproducible():
    cfg = desk_config(seed=3)
    ap, users = build_geometry(cfg)
    s1 = build_statistics(cfg, ap, users)
    s2 = build_statistics(cfg, ap, users)
    np.testing.assert_array_equal(s1.beta_ap, s2.beta_ap)
    np.testing.assert_array_equal(s1.los, s2.los)
    r1 = draw_realization(s1, 11, 5)
    r2 = draw_realization(s2, 11, 5)
    np.testing.assert_array_equal(r1.g_sat, r2.g_sat)
    np.testing.assert_array_equal(r1.g_ap, r2.g_ap)


# -- realizations -----------------------------------------------------------

def test_realization_without_scattering_is_los():
    stats = scalar_stats(kappa=1.0)
    stats = type(stats)(**{**stats.__dict__, "corr": np.zeros((1, 1, 1), complex)})
    real = draw_realization(stats, 0, 10)
    assert_allclose(real.g_sat, np.broadcast_to(stats.los, real.g_sat.shape))


def test_realization_covariance(desk):
    _, stats, _ = desk
    n = 100_000
    real = draw_realization(stats, np.random.default_rng(1), n)
    dev = real.g_sat - stats.los
    for k in range(stats.num_users):
        cov = dev[:, k, :].T @ dev[:, k, :].conj() / n
        err = np.linalg.norm(cov - stats.corr[k]) / np.linalg.norm(stats.corr[k])
        assert err < 0.02
        mean_err = np.linalg.norm(real.g_sat[:, k].mean(axis=0) - stats.los[k]) / np.linalg.norm(stats.los[k])
        assert mean_err < 0.01


def test_terrestrial_realization_variance():
    stats = scalar_stats(beta_ap=1.0)
    g = draw_realization(stats, np.random.default_rng(2), 1_000_000).g_ap
    assert np.mean(np.abs(g) ** 2) == pytest.approx(1.0, rel=0.01)


def test_hermitian_sqrt():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    psd = a @ a.conj().T
    root = hermitian_sqrt(psd)
    assert_allclose(root @ root, psd, atol=1e-10)
    with pytest.raises(np.linalg.LinAlgError):
        hermitian_sqrt(-psd)
