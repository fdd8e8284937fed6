"""Ergodic uplink SINR and throughput.

Two routes to the same use-and-then-forget bound: :func:`monte_carlo_sinr`
averages the effective channel ``z_kk'`` over joint channel/estimate draws
for any linear combiner, and :func:`closed_form_sinr` evaluates the MRC
bound analytically from the channel and estimate statistics.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .channel import ChannelStatistics, _rng, draw_realization
from .config import ScenarioConfig
from .estimation import EstimateRealization, EstimateStatistics, pilot_receive_and_estimate


class SystemVariant(str, enum.Enum):
    SPACE_TERRESTRIAL = "space-terrestrial"
    TERRESTRIAL_ONLY = "terrestrial"
    SPACE_ONLY = "space"

    @property
    def uses_satellite(self) -> bool:
        return self is not SystemVariant.TERRESTRIAL_ONLY

    @property
    def uses_aps(self) -> bool:
        return self is not SystemVariant.SPACE_ONLY

    @classmethod
    def parse(cls, value: "str | SystemVariant") -> "SystemVariant":
        if isinstance(value, cls):
            return value
        for v in cls:
            if value in (v.value, v.name, v.name.lower()):
                return v
        raise ValueError(f"unknown system variant {value!r}")


@dataclass(frozen=True)
class SinrBreakdown:
    """Per-user SINR terms. Fields are arrays over users (or scalars for one user)."""

    signal: np.ndarray
    mi: np.ndarray
    no: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray  # Mbps

    def user(self, k: int) -> "SinrBreakdown":
        return SinrBreakdown(*(np.asarray(getattr(self, f))[k] for f in ("signal", "mi", "no", "sinr", "rate")))


def throughput(sinr, config: ScenarioConfig):
    """Net ergodic throughput in Mbps for a given SINR (scalar or array)."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR must be non-negative")
    out = config.prelog * config.bandwidth_mhz * np.log2(1.0 + sinr)
    return float(out) if out.ndim == 0 else out


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(num > 0, num / np.where(den > 0, den, 1.0), 0.0)


# ---------------------------------------------------------------------------
# Closed form (MRC)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SinrCoefficients:
    """The MRC SINR written as ``rho_k a_k^2 / (sum_k' C[k, k'] rho_k' + NO_k)``.

    ``gain`` holds ``a_k``, the mean effective channel gain; ``interference``
    is C including the diagonal (beamforming uncertainty); ``noise`` is NO_k.
    """

    gain: np.ndarray
    interference: np.ndarray
    noise: np.ndarray
    variant: SystemVariant

    @property
    def num_users(self) -> int:
        return self.gain.size

    def mutual_interference(self, rho) -> np.ndarray:
        return self.interference @ np.asarray(rho, dtype=float)

    def sinr(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return _ratio(rho * self.gain**2, self.mutual_interference(rho) + self.noise)

    def breakdown(self, rho, config: ScenarioConfig) -> SinrBreakdown:
        rho = np.asarray(rho, dtype=float)
        if np.any(rho < 0):
            raise ValueError("powers must be non-negative")
        signal = rho * self.gain**2
        mi = self.mutual_interference(rho)
        sinr = _ratio(signal, mi + self.noise)
        return SinrBreakdown(signal, mi, self.noise.copy(), sinr, throughput(sinr, config))


def sinr_coefficients(
    stats: ChannelStatistics,
    est: EstimateStatistics,
    variant: SystemVariant | str = SystemVariant.SPACE_TERRESTRIAL,
) -> SinrCoefficients:
    """Collect the closed-form MRC SINR terms for every user pair."""
    variant = SystemVariant.parse(variant)
    k = stats.num_users
    pk = est.pilot_gain
    gain = np.zeros(k)
    interference = np.zeros((k, k))
    noise = np.zeros(k)

    if variant.uses_satellite:
        los, corr, theta = stats.los, stats.corr, est.theta
        los_pow = np.sum(np.abs(los) ** 2, axis=1)
        tr_theta = np.real(np.trace(theta, axis1=1, axis2=2))
        gain += los_pow + pk * tr_theta

        cross = np.abs(np.conj(los) @ los.T) ** 2  # |gbar_k^H gbar_k'|^2
        np.fill_diagonal(cross, 0.0)
        # gbar_k'^H Theta_k gbar_k'
        los_theta = np.real(np.einsum("li,kij,lj->kl", np.conj(los), theta, los, optimize=True))
        # gbar_k^H R_k' gbar_k
        los_corr = np.real(np.einsum("ki,lij,kj->kl", np.conj(los), corr, los, optimize=True))
        # tr(R_k' Theta_k)
        tr_corr_theta = np.real(np.einsum("lij,kji->kl", corr, theta, optimize=True))
        interference += cross + pk * los_theta + los_corr + pk * tr_corr_theta
        noise += stats.noise_sat * (los_pow + pk * tr_theta)

    if variant.uses_aps:
        gamma, beta = est.gamma, stats.beta_ap
        sum_gamma = gamma.sum(axis=0)
        gain += sum_gamma
        interference += gamma.T @ beta  # sum_m gamma_mk beta_mk'
        noise += stats.noise_ap * sum_gamma

    return SinrCoefficients(gain=gain, interference=interference, noise=noise, variant=variant)


def closed_form_sinr(
    k: int | None,
    rho,
    stats: ChannelStatistics,
    est: EstimateStatistics,
    variant: SystemVariant | str,
    config: ScenarioConfig,
) -> SinrBreakdown:
    """Closed-form MRC SINR breakdown for user ``k`` (or all users if ``k`` is None)."""
    out = sinr_coefficients(stats, est, variant).breakdown(rho, config)
    return out if k is None else out.user(k)


# ---------------------------------------------------------------------------
# Monte Carlo (any linear combiner)
# ---------------------------------------------------------------------------

Combiner = Callable[[EstimateRealization, ChannelStatistics], "tuple[np.ndarray, np.ndarray]"]


def mrc_combiner(est_real: EstimateRealization, stats: ChannelStatistics):
    """Maximum ratio combining: the estimates are the combining weights.

    Returns ``(u_sat, u_ap)`` shaped like ``(ghat_sat, ghat_ap)``.
    """
    return est_real.ghat_sat, est_real.ghat_ap


def _batch_size(stats: ChannelStatistics, n_trials: int, budget: int = 2_000_000) -> int:
    per_trial = stats.num_users * (4 * stats.num_antennas + 4 * stats.num_aps + stats.num_users)
    return int(max(1, min(n_trials, budget // max(per_trial, 1))))


def monte_carlo_sinr(
    k: int | None,
    rho,
    stats: ChannelStatistics,
    est: EstimateStatistics,
    combiner: Combiner,
    n_trials: int,
    rng,
    variant: SystemVariant | str,
    config: ScenarioConfig,
    batch_size: int | None = None,
) -> SinrBreakdown:
    """Sample-average SINR of the use-and-then-forget bound.

    Every trial draws fresh channels and pilot noise, forms the estimates and
    applies ``combiner``. Combiner weights of the disabled link type are
    zeroed for the stand-alone variants. Noise moments are computed from
    the combiner norms; data-phase noise is never sampled.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    variant = SystemVariant.parse(variant)
    rng = _rng(rng)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("powers must be non-negative")
    batch = batch_size or _batch_size(stats, n_trials)

    sums_z, sums_z2, sums_us, sums_ua = [], [], [], []
    done = 0
    while done < n_trials:
        t = min(batch, n_trials - done)
        real = draw_realization(stats, rng, t)
        est_real = pilot_receive_and_estimate(real, stats, est, rng)
        u_sat, u_ap = combiner(est_real, stats)
        u_sat = np.asarray(u_sat) if variant.uses_satellite else np.zeros_like(real.g_sat)
        u_ap = np.asarray(u_ap) if variant.uses_aps else np.zeros_like(real.g_ap)
        # z[t, k, k'] = u_k^H g_k' + sum_m u_mk^* g_mk'
        z = np.einsum("tkn,tln->tkl", np.conj(u_sat), real.g_sat, optimize=True)
        z += np.einsum("tmk,tml->tkl", np.conj(u_ap), real.g_ap, optimize=True)
        sums_z.append(z.sum(axis=0))
        sums_z2.append((np.abs(z) ** 2).sum(axis=0))
        sums_us.append((np.abs(u_sat) ** 2).sum(axis=(0, 2)))
        sums_ua.append((np.abs(u_ap) ** 2).sum(axis=(0, 1)))
        done += t

    mean_z = np.sum(sums_z, axis=0) / n_trials
    mean_z2 = np.sum(sums_z2, axis=0) / n_trials
    mean_us = np.sum(sums_us, axis=0) / n_trials
    mean_ua = np.sum(sums_ua, axis=0) / n_trials

    desired = np.abs(np.diag(mean_z)) ** 2
    signal = rho * desired
    mi = np.clip(mean_z2 @ rho - signal, 0.0, None)
    no = stats.noise_sat * mean_us + stats.noise_ap * mean_ua
    sinr = _ratio(signal, mi + no)
    out = SinrBreakdown(signal, mi, no, sinr, throughput(sinr, config))
    return out if k is None else out.user(k)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

BREAKDOWN_COLUMNS = ("user", "variant", "signal", "mi", "no", "sinr", "rate_mbps")


def write_breakdown_csv(rows: Iterable[tuple[SystemVariant | str, SinrBreakdown]], path: str | Path) -> None:
    """Write ``(variant, breakdown)`` pairs as one CSV row per user."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BREAKDOWN_COLUMNS)
        for variant, bd in rows:
            name = SystemVariant.parse(variant).value
            fields = [np.atleast_1d(getattr(bd, f)) for f in ("signal", "mi", "no", "sinr", "rate")]
            for user, vals in enumerate(zip(*fields)):
                writer.writerow([user, name, *(repr(float(v)) for v in vals)])
