import numpy as np
import pytest

from satcellfree.channel import ChannelStatistics, build_geometry, build_statistics
from satcellfree.config import ScenarioConfig
from satcellfree.estimation import EstimateStatistics, estimate_stats
from satcellfree.sinr import SystemVariant, sinr_coefficients

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def desk_config(seed=0, **kw) -> ScenarioConfig:
    """Small deployment: 10 APs, 4 users, 4x4 satellite array on a 1 km^2 area."""
    base = dict(num_aps=10, num_users=4, sat_array=(4, 4), area_side_km=1.0,
                rician_factor=10.0, correlation_coeff=0.5, rng_seed=seed)
    base.update(kw)
    return ScenarioConfig(**base)


def desk_instance(seed=0, **kw):
    cfg = desk_config(seed, **kw)
    ap, users = build_geometry(cfg)
    stats = build_statistics(cfg, ap, users)
    est = estimate_stats(stats, cfg.pilot_power)
    return cfg, stats, est


def random_coefficients(rng, variant=SystemVariant.SPACE_TERRESTRIAL, max_users=6):
    """SINR coefficients of a random desk-scale slot with 1..max_users users."""
    k = int(rng.integers(1, max_users + 1))
    m = int(rng.integers(2, 12))
    cfg, stats, est = desk_instance(int(rng.integers(2**31)), num_users=k, num_aps=m)
    return cfg, sinr_coefficients(stats, est, variant)


def scalar_stats(beta_ap=1.0, beta_sat=1.0, kappa=0.0, noise_ap=1.0, noise_sat=1.0, num_aps=1):
    """Hand-built single-user, single-antenna statistics."""
    return ChannelStatistics(
        beta_ap=np.full((num_aps, 1), beta_ap),
        beta_sat=np.array([beta_sat]),
        kappa=np.array([kappa]),
        los=np.sqrt(np.array([[kappa * beta_sat / (kappa + 1)]], dtype=complex)),
        corr=np.array([[[beta_sat / (kappa + 1)]]], dtype=complex),
        elevation=np.zeros(1),
        azimuth=np.zeros(1),
        noise_ap=noise_ap,
        noise_sat=noise_sat,
    )


@pytest.fixture
def desk():
    return desk_instance(0)


# -- independent linear-algebra oracle for the power-control tests -----------

def oracle_min_power(coeffs, xi):
    """Exact minimum-power solution of ``(I - xi A) rho = xi b``, or None if no positive solution."""
    a2 = coeffs.gain**2
    A = coeffs.interference / a2[:, None]
    b = coeffs.noise / a2
    if xi == 0:
        return np.zeros_like(b)
    if np.max(np.abs(np.linalg.eigvals(xi * A))) >= 1.0:
        return None
    rho = np.linalg.solve(np.eye(b.size) - xi * A, xi * b)
    return rho if np.all(rho >= 0) else None


def oracle_max_min_xi(coeffs, p_max, tol=1e-13):
    """Largest common SINR target reachable within the budget, by bisection on the exact solve."""
    p_max = np.broadcast_to(np.asarray(p_max, dtype=float), coeffs.gain.shape)
    lo, hi = 0.0, float(np.min(p_max * coeffs.gain**2 / coeffs.noise))
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        rho = oracle_min_power(coeffs, mid)
        if rho is not None and np.all(rho <= p_max):
            lo = mid
        else:
            hi = mid
    return lo
