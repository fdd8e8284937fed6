"""Network geometry, large-scale statistics and small-scale channel draws.

Terrestrial links are Rayleigh, ``g_mk ~ CN(0, beta_mk)``. Satellite links
are spatially correlated Rician vectors ``g_k ~ CN(gbar_k, R_k)`` over an
``N_H x N_V`` planar array, with a deterministic line-of-sight part ``gbar_k``
and a Kronecker correlation ``R_k = beta_k / (kappa_k + 1) R_H (x) R_V``.

Positions are in km, link distances in m.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special

from .config import ScenarioConfig, db2lin

# Clamp threshold for eigenvalues of near-singular covariance factors.
_EIG_CLAMP_REL = 1e-12


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Draw i.i.d. ``CN(0, 1)`` samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def build_geometry(config: ScenarioConfig, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Drop APs and users uniformly in the square service area.

    Parameters
    ----------
    config : ScenarioConfig
    rng : numpy Generator or seed, optional
        Defaults to ``config.rng_seed``; APs are drawn first, then users.

    Returns
    -------
    ap_positions : (M, 3) ndarray, km
    user_positions : (K, 3) ndarray, km
    """
    rng = _rng(config.rng_seed if rng is None else rng)
    ap_positions = drop_uniform(config.num_aps, config.area_side_km, config.ap_height_m, rng)
    user_positions = drop_users(config, rng)
    return ap_positions, user_positions


def drop_users(config: ScenarioConfig, rng) -> np.ndarray:
    return drop_uniform(config.num_users, config.area_side_km, config.user_height_m, _rng(rng))


def drop_uniform(count: int, side_km: float, height_m: float, rng) -> np.ndarray:
    pos = np.empty((count, 3))
    pos[:, :2] = _rng(rng).uniform(0.0, side_km, size=(count, 2))
    pos[:, 2] = height_m / 1e3
    return pos


def pairwise_distance_m(ap_positions: np.ndarray, user_positions: np.ndarray) -> np.ndarray:
    """3D AP-user distances in metres, shape (M, K)."""
    diff = ap_positions[:, None, :] - user_positions[None, :, :]
    return 1e3 * np.linalg.norm(diff, axis=-1)


# ---------------------------------------------------------------------------
# Path loss
# ---------------------------------------------------------------------------


def draw_shadowing(shape, std_db: float, rng) -> np.ndarray:
    """Log-normal shadowing, returned in dB."""
    return std_db * _rng(rng).standard_normal(shape)


def terrestrial_pathloss_db(d_m, config: ScenarioConfig, shadow_db=0.0) -> np.ndarray:
    d_m = np.asarray(d_m, dtype=float)
    if np.any(d_m <= 0):
        raise ValueError("AP-user distance must be positive")
    return (
        config.gain_ap_dbi
        + config.gain_user_dbi
        - 8.50
        - 20.0 * np.log10(config.carrier_freq_ghz)
        - 38.63 * np.log10(d_m)
        + shadow_db
    )


def terrestrial_pathloss(d_m, config: ScenarioConfig, shadow_db=0.0) -> np.ndarray:
    """Large-scale gain ``beta_mk`` (linear) of an AP-user link at ``d_m`` metres."""
    return db2lin(terrestrial_pathloss_db(d_m, config, shadow_db))


def beam_pattern(phi, wavelength_m: float, aperture_radius_m: float) -> np.ndarray:
    """Normalised circular-aperture gain ``4 |J1(x)/x|^2``, ``x = 2 pi a sin(phi) / lambda``.

    Equals 1 on boresight and 0 for off-boresight angles outside ``[0, pi/2]``.
    """
    phi = np.asarray(phi, dtype=float)
    x = 2.0 * np.pi / wavelength_m * aperture_radius_m * np.sin(phi)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    ratio = np.where(small, 0.5 - x**2 / 16.0, special.j1(safe) / safe)
    gain = 4.0 * ratio**2
    inside = (phi >= 0.0) & (phi <= np.pi / 2)
    return np.where(inside, gain, 0.0)


@dataclass(frozen=True)
class SatelliteLink:
    beta: np.ndarray          # linear gain, (K,)
    beta_db: np.ndarray
    distance_m: np.ndarray
    elevation: np.ndarray     # rad
    azimuth: np.ndarray       # rad
    off_boresight: np.ndarray  # rad
    beam_gain: np.ndarray     # linear, normalised


def satellite_pathloss(user_positions, config: ScenarioConfig, shadow_db=0.0) -> SatelliteLink:
    """Large-scale gain and angles of the user-satellite links.

    The elevation is the angle of the satellite above the user's horizon and
    the azimuth is measured in the ground plane from the x axis. The
    off-boresight angle is taken between the satellite-to-user direction and
    the satellite-to-beam-centre direction.
    """
    users = np.atleast_2d(np.asarray(user_positions, dtype=float))
    sat = np.asarray(config.sat_position_km, dtype=float)
    to_sat = sat[None, :] - users
    dist_km = np.linalg.norm(to_sat, axis=1)
    if np.any(dist_km <= 0):
        raise ValueError("user located at the satellite position")
    distance_m = 1e3 * dist_km
    elevation = np.arcsin(np.clip(to_sat[:, 2] / dist_km, -1.0, 1.0))
    azimuth = np.arctan2(to_sat[:, 1], to_sat[:, 0])

    to_user = -to_sat / dist_km[:, None]
    boresight = np.asarray(config.beam_center, dtype=float) - sat
    boresight = boresight / np.linalg.norm(boresight)
    off_boresight = np.arccos(np.clip(to_user @ boresight, -1.0, 1.0))
    beam_gain = beam_pattern(off_boresight, config.wavelength_m, config.aperture_radius)

    with np.errstate(divide="ignore"):
        beam_db = 10.0 * np.log10(beam_gain)
    beta_db = (
        config.gain_sat_dbi
        + config.gain_user_dbi
        + beam_db
        - 32.45
        - 20.0 * np.log10(config.carrier_freq_ghz)
        - 20.0 * np.log10(distance_m)
        + shadow_db
    )
    return SatelliteLink(
        beta=db2lin(beta_db),
        beta_db=beta_db,
        distance_m=distance_m,
        elevation=elevation,
        azimuth=azimuth,
        off_boresight=off_boresight,
        beam_gain=beam_gain,
    )


# ---------------------------------------------------------------------------
# Satellite array: LoS vectors and correlation
# ---------------------------------------------------------------------------


def wave_vector(elevation, azimuth, wavelength: float) -> np.ndarray:
    """Wave-form vector ``(2 pi / lambda) [cos t cos w, sin t cos w, sin t]``."""
    t = np.asarray(elevation, dtype=float)
    w = np.asarray(azimuth, dtype=float)
    return (2.0 * np.pi / wavelength) * np.stack(
        [np.cos(t) * np.cos(w), np.sin(t) * np.cos(w), np.sin(t)], axis=-1
    )


def element_positions(n_h: int, n_v: int, d_h: float, d_v: float) -> np.ndarray:
    """Element index vectors ``c_n = [0, mod(n-1, N_H) d_H, floor((n-1)/N_H) d_V]``, shape (N, 3)."""
    n = np.arange(n_h * n_v)
    return np.stack([np.zeros(n.size), (n % n_h) * d_h, (n // n_h) * d_v], axis=1)


def los_vector(elevation, azimuth, kappa, beta, config: ScenarioConfig) -> np.ndarray:
    """Line-of-sight component of the satellite channel.

    Scalar inputs give an (N,) vector; length-K inputs give (K, N).
    """
    kappa = np.asarray(kappa, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(kappa < 0) or np.any(beta <= 0):
        raise ValueError("need kappa >= 0 and beta > 0")
    lam = config.wavelength_m
    n_h, n_v = config.sat_array
    d_h, d_v = config.antenna_spacing
    c = element_positions(n_h, n_v, d_h * lam, d_v * lam)
    ell = wave_vector(elevation, azimuth, lam)
    phase = ell @ c.T
    amp = np.sqrt(kappa * beta / (kappa + 1.0))
    return amp[..., None] * np.exp(1j * phase)


def exponential_correlation(n: int, r: float) -> np.ndarray:
    idx = np.arange(n)
    return float(r) ** np.abs(idx[:, None] - idx[None, :])


def correlation_matrix(beta, kappa, config: ScenarioConfig) -> np.ndarray:
    """Kronecker correlation ``beta/(kappa+1) R_H (x) R_V`` with unit-diagonal factors.

    Scalar inputs give (N, N); length-K inputs give (K, N, N).
    """
    n_h, n_v = config.sat_array
    r = config.correlation_coeff
    base = np.kron(exponential_correlation(n_h, r), exponential_correlation(n_v, r)).astype(complex)
    scale = np.asarray(beta, dtype=float) / (np.asarray(kappa, dtype=float) + 1.0)
    return scale[..., None, None] * base


def hermitian_sqrt(mat: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root, clamping slightly negative eigenvalues at 0."""
    vals, vecs = np.linalg.eigh(mat)
    top = np.max(np.abs(vals), axis=-1, keepdims=True)
    if np.any(vals < -1e-10 * np.maximum(top, np.finfo(float).tiny)):
        raise np.linalg.LinAlgError("covariance matrix is not positive semi-definite")
    vals = np.where(vals < _EIG_CLAMP_REL * top, 0.0, vals)
    return (vecs * np.sqrt(vals)[..., None, :]) @ np.conj(np.swapaxes(vecs, -1, -2))


# ---------------------------------------------------------------------------
# Statistics and realizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelStatistics:
    """Large-scale statistics of one time slot.

    Attributes
    ----------
    beta_ap : (M, K) linear terrestrial gains
    beta_sat : (K,) linear satellite gains
    kappa : (K,) Rician factors
    los : (K, N) complex LoS vectors
    corr : (K, N, N) complex correlation matrices
    elevation, azimuth : (K,) radians
    noise_ap, noise_sat : receiver noise powers in W
    """

    beta_ap: np.ndarray
    beta_sat: np.ndarray
    kappa: np.ndarray
    los: np.ndarray
    corr: np.ndarray
    elevation: np.ndarray
    azimuth: np.ndarray
    noise_ap: float
    noise_sat: float

    @property
    def num_aps(self) -> int:
        return self.beta_ap.shape[0]

    @property
    def num_users(self) -> int:
        return self.beta_ap.shape[1]

    @property
    def num_antennas(self) -> int:
        return self.los.shape[1]

    @cached_property
    def corr_sqrt(self) -> np.ndarray:
        return hermitian_sqrt(self.corr)


def build_statistics(config: ScenarioConfig, ap_positions, user_positions, rng=None) -> ChannelStatistics:
    """Evaluate path loss, shadowing, LoS vectors and correlation for one slot.

    Shadowing is drawn from ``rng``: terrestrial (M, K) first, then satellite (K,).
    """
    rng = _rng(config.rng_seed if rng is None else rng)
    ap_positions = np.asarray(ap_positions, dtype=float)
    user_positions = np.asarray(user_positions, dtype=float)
    num_aps, num_users = len(ap_positions), len(user_positions)

    zeta_ap = draw_shadowing((num_aps, num_users), config.shadow_std_terrestrial_db, rng)
    zeta_sat = draw_shadowing(num_users, config.shadow_std_sat_db, rng)
    beta_ap = terrestrial_pathloss(pairwise_distance_m(ap_positions, user_positions), config, zeta_ap)
    sat = satellite_pathloss(user_positions, config, zeta_sat)

    kappa = np.broadcast_to(np.asarray(config.rician_factor, dtype=float), (num_users,)).copy()
    los = los_vector(sat.elevation, sat.azimuth, kappa, sat.beta, config)
    corr = correlation_matrix(sat.beta, kappa, config)
    return ChannelStatistics(
        beta_ap=beta_ap,
        beta_sat=sat.beta,
        kappa=kappa,
        los=los,
        corr=corr,
        elevation=sat.elevation,
        azimuth=sat.azimuth,
        noise_ap=config.noise_power_ap,
        noise_sat=config.noise_power_sat,
    )


@dataclass(frozen=True)
class ChannelRealization:
    """Small-scale draws; a leading batch axis is optional.

    g_ap : ([T,] M, K) complex
    g_sat : ([T,] K, N) complex, row k is user k's satellite channel
    """

    g_ap: np.ndarray
    g_sat: np.ndarray


def draw_realization(stats: ChannelStatistics, rng, n_draws: int | None = None) -> ChannelRealization:
    """Draw channel realizations from ``stats``.

    With ``n_draws=None`` a single realization without batch axis is returned.
    """
    rng = _rng(rng)
    lead = () if n_draws is None else (n_draws,)
    m, k, n = stats.num_aps, stats.num_users, stats.num_antennas
    g_ap = np.sqrt(stats.beta_ap) * crandn(rng, lead + (m, k))
    w = crandn(rng, lead + (k, n))
    # g_k = gbar_k + R_k^{1/2} w_k, batched over users
    g_sat = stats.los + np.einsum("kij,...kj->...ki", stats.corr_sqrt, w)
    return ChannelRealization(g_ap=g_ap, g_sat=g_sat)
