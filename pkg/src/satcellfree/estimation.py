"""Uplink pilot training and MMSE channel estimation.

Every user sends one column of a K x K unitary DFT pilot book with power
``p`` per pilot symbol, so the pilot length equals K. The LoS part of the
satellite channel is known at the gateway; only the scattered part is
estimated.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .channel import ChannelRealization, ChannelStatistics, _rng, crandn


@dataclass(frozen=True)
class EstimateStatistics:
    """Second-order statistics of the MMSE estimates.

    Attributes
    ----------
    gamma : (M, K) variance of the terrestrial estimates
    phi : (K, N, N) inverse of ``pK R_k + sigma_s^2 I``
    theta : (K, N, N) ``R_k Phi_k R_k``; ``pK theta_k`` is the estimate covariance
    pilot_gain : ``p K``
    """

    gamma: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    pilot_gain: float

    @cached_property
    def estimate_cov(self) -> np.ndarray:
        return self.pilot_gain * self.theta


def estimate_stats(stats: ChannelStatistics, pilot_power: float) -> EstimateStatistics:
    """MMSE estimate statistics for pilot power ``pilot_power`` (W)."""
    if pilot_power < 0:
        raise ValueError("pilot power must be non-negative")
    if stats.noise_sat <= 0:
        raise ValueError("satellite noise power must be positive")
    pk = pilot_power * stats.num_users
    beta = stats.beta_ap
    denom = pk * beta + stats.noise_ap
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(denom > 0, pk * beta**2 / np.where(denom > 0, denom, 1.0), 0.0)

    # R_k = U diag(l) U^H gives Phi_k and Theta_k in one factorisation
    vals, vecs = np.linalg.eigh(stats.corr)
    vals = np.clip(vals, 0.0, None)
    inv = 1.0 / (pk * vals + stats.noise_sat)
    vecs_h = np.conj(np.swapaxes(vecs, -1, -2))
    phi = (vecs * inv[:, None, :]) @ vecs_h
    theta = (vecs * (vals**2 * inv)[:, None, :]) @ vecs_h
    return EstimateStatistics(gamma=gamma, phi=phi, theta=theta, pilot_gain=pk)


def pilot_matrix(num_users: int) -> np.ndarray:
    """Unitary DFT pilot book; column k is the pilot of user k."""
    n = np.arange(num_users)
    return np.exp(-2j * np.pi * np.outer(n, n) / num_users) / np.sqrt(num_users)


@dataclass(frozen=True)
class EstimateRealization:
    """MMSE estimates with the same (optionally batched) layout as the channels.

    ghat_ap : ([T,] M, K); ghat_sat : ([T,] K, N)
    """

    ghat_ap: np.ndarray
    ghat_sat: np.ndarray


def pilot_receive_and_estimate(
    real: ChannelRealization,
    stats: ChannelStatistics,
    est: EstimateStatistics,
    rng,
    noise_ap: float | None = None,
    noise_sat: float | None = None,
) -> EstimateRealization:
    """Simulate pilot reception with fresh AWGN and form the MMSE estimates.

    ``noise_ap`` / ``noise_sat`` override the injected noise power only (the
    estimator keeps using the statistics); setting them to 0 gives noiseless
    pilots.
    """
    rng = _rng(rng)
    sigma2_a = stats.noise_ap if noise_ap is None else noise_ap
    sigma2_s = stats.noise_sat if noise_sat is None else noise_sat
    k = stats.num_users
    pilots = pilot_matrix(k)
    sqrt_pk = np.sqrt(est.pilot_gain)
    lead = real.g_ap.shape[:-2]

    # AP m receives y_pm^H = sum_k sqrt(pK) g_mk phi_k^H + w_pm^H  (rows, M x K)
    y_ap_h = sqrt_pk * real.g_ap @ pilots.conj().T
    y_ap_h = y_ap_h + np.sqrt(sigma2_a) * crandn(rng, y_ap_h.shape)
    proj_ap = y_ap_h @ pilots
    beta = stats.beta_ap
    denom = est.pilot_gain * beta + stats.noise_ap
    ghat_ap = sqrt_pk * beta / denom * proj_ap

    # gateway receives Y_p = sum_k sqrt(pK) g_k phi_k^H + W_p  (N x K)
    g_cols = np.swapaxes(real.g_sat, -1, -2)
    y_sat = sqrt_pk * g_cols @ pilots.conj().T
    y_sat = y_sat + np.sqrt(sigma2_s) * crandn(rng, lead + y_sat.shape[-2:])
    proj_sat = np.swapaxes(y_sat @ pilots, -1, -2)  # ([T,] K, N): row k is Y_p phi_k
    gain = sqrt_pk * (stats.corr @ est.phi)  # (K, N, N)
    innov = proj_sat - sqrt_pk * stats.los
    ghat_sat = stats.los + np.einsum("kij,...kj->...ki", gain, innov)
    return EstimateRealization(ghat_ap=ghat_ap, ghat_sat=ghat_sat)
