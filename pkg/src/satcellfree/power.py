"""Max-min fair uplink power control.

The max-min problem is solved in epigraph form by bisection on a common
SINR target ``xi``. For a fixed target, the minimum-power allocation is the
fixed point of the standard interference function

    I_k(rho) = xi (MI_k(rho) + NO_k) / a_k^2,

iterated from full power with the per-user budget applied every step.
All SINR terms come from :class:`~satcellfree.sinr.SinrCoefficients`.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .sinr import SinrCoefficients

# Relative slack on the SINR >= xi test; absorbs rounding at the fixed point.
FEASIBILITY_RTOL = 1e-9
# margin on the extrapolated error; the contraction ratio is only estimated
_EXTRAP_SAFETY = 0.1
_STEP_FLOOR = 100 * np.finfo(float).eps


class NonConvergenceError(RuntimeError):
    """The inner fixed-point iteration hit its iteration cap.

    ``result`` holds the last iterate; its ``feasible`` flag is still a valid
    certificate (a budget-respecting vector reaching the target), it is just
    not known to be the minimal-power point.
    """

    def __init__(self, message: str, result: "FixedPointResult | None" = None):
        super().__init__(message)
        self.result = result


class SolveStatus(str, enum.Enum):
    CONVERGED = "converged"
    INFEASIBLE_AT_ZERO = "infeasible-at-zero"


def _check_gain(coeffs: SinrCoefficients) -> None:
    if np.any(coeffs.gain <= 0):
        raise ValueError("every user needs a non-zero mean effective gain")


def interference_function(k: int | None, rho, xi: float, coeffs: SinrCoefficients):
    """Standard interference function of user ``k`` (all users if ``k`` is None), in W."""
    if xi < 0:
        raise ValueError("SINR target must be non-negative")
    _check_gain(coeffs)
    rho = np.asarray(rho, dtype=float)
    val = xi * (coeffs.mutual_interference(rho) + coeffs.noise) / coeffs.gain**2
    return val if k is None else float(val[k])


@dataclass
class FixedPointResult:
    rho: np.ndarray
    feasible: bool
    iterations: int
    # sum of powers after each update, starting with the initial point
    total_power: list[float] = field(default_factory=list)


def solve_fixed_power(
    xi: float,
    rho_init,
    coeffs: SinrCoefficients,
    p_max,
    eps: float = 1e-6,
    max_iter: int = 10_000,
) -> FixedPointResult:
    """Minimum-power allocation reaching SINR target ``xi``, if one exists.

    Jacobi iteration ``rho <- min(I(rho), P_max)`` until the normalised
    change of total power ``T`` drops to ``eps``. Since the iterates
    contract geometrically, the stop also requires the extrapolated
    remaining error ``d c / (1 - c)`` of every user to be within ``eps / 10``,
    where ``d`` is the largest relative per-user step and ``c`` the observed
    ratio of successive steps. Feasibility is decided on the final iterate:
    every user must reach ``xi`` (equivalently, the target rate).

    Raises
    ------
    NonConvergenceError
        If ``max_iter`` updates do not reach the tolerance.
    """
    p_max = np.broadcast_to(np.asarray(p_max, dtype=float), coeffs.gain.shape)
    rho = np.minimum(np.asarray(rho_init, dtype=float).copy(), p_max)
    history = [float(rho.sum())]
    prev_step = math.inf
    converged = False
    for it in range(1, max_iter + 1):
        new = np.minimum(interference_function(None, rho, xi, coeffs), p_max)
        total = float(new.sum())
        prev_total = history[-1]
        history.append(total)
        if prev_total > 0:
            change = abs(total - prev_total) / prev_total
        else:
            change = 0.0 if total == 0 else math.inf
        diff = np.abs(new - rho)
        scale = np.maximum(new, rho)
        step = float(np.max(np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)))
        rate = step / prev_step if prev_step > 0 else 0.0
        rho, prev_step = new, step
        # steps at rounding level carry no contraction information
        settled = step <= _STEP_FLOOR or (
            rate < 1.0 and step * rate / (1.0 - rate) <= _EXTRAP_SAFETY * eps
        )
        if change <= eps and settled:
            converged = True
            break
    feasible = bool(np.all(coeffs.sinr(rho) >= xi * (1.0 - FEASIBILITY_RTOL)))
    result = FixedPointResult(rho=rho, feasible=feasible, iterations=it, total_power=history)
    if not converged:
        raise NonConvergenceError(f"no convergence in {max_iter} iterations at xi={xi:g}", result)
    return result


def _target_test(xi, coeffs, p_max, config) -> tuple[FixedPointResult, bool]:
    """Inner solve for the bisection; a capped run is judged on its last iterate."""
    try:
        return solve_fixed_power(xi, p_max, coeffs, p_max, config.inner_tol, config.max_inner_iter), True
    except NonConvergenceError as exc:
        return exc.result, False


def xi_upper_bound(coeffs: SinrCoefficients, p_max) -> float:
    """Interference-free full-power SINR of the weakest user."""
    p_max = np.broadcast_to(np.asarray(p_max, dtype=float), coeffs.gain.shape)
    with np.errstate(divide="ignore"):
        per_user = p_max * coeffs.gain**2 / coeffs.noise
    return float(np.min(per_user))


@dataclass
class MaxMinSolution:
    """Result of the bisection.

    ``outer_iterations`` counts bisection steps and ``inner_iterations`` the
    total number of fixed-point updates over all steps. ``capped_solves``
    counts steps whose inner solve hit the iteration cap; those targets were
    accepted only if the last iterate already reached them.
    """

    rho: np.ndarray
    xi_min: float
    xi_max: float
    xi_up: float
    delta: float
    rates: np.ndarray
    sinr: np.ndarray
    outer_iterations: int
    inner_iterations: int
    capped_solves: int
    status: SolveStatus
    wall_time: float

    @property
    def min_rate(self) -> float:
        return float(self.rates.min())

    def to_dict(self) -> dict:
        with np.errstate(divide="ignore"):
            rho_dbw = 10.0 * np.log10(self.rho)
        return {
            "status": self.status.value,
            "rho_w": self.rho.tolist(),
            "rho_dbw": [None if not np.isfinite(v) else float(v) for v in rho_dbw],
            "xi_interval": [self.xi_min, self.xi_max],
            "xi_up": self.xi_up,
            "delta": self.delta,
            "rates_mbps": self.rates.tolist(),
            "min_rate_mbps": self.min_rate,
            "outer_iterations": self.outer_iterations,
            "inner_iterations": self.inner_iterations,
            "capped_solves": self.capped_solves,
            "wall_time_s": self.wall_time,
        }


def outer_tolerance(config: ScenarioConfig, xi_up: float) -> float:
    if config.outer_tol is not None:
        return config.outer_tol
    return config.outer_tol_rel * xi_up


def max_min_allocate(coeffs: SinrCoefficients, config: ScenarioConfig, p_max=None) -> MaxMinSolution:
    """Bisection on the common SINR target with the fixed-point inner solver."""
    start = time.perf_counter()
    _check_gain(coeffs)
    p_max = config.max_power_vector() if p_max is None else np.broadcast_to(
        np.asarray(p_max, dtype=float), coeffs.gain.shape
    )
    xi_up = xi_upper_bound(coeffs, p_max)
    delta = outer_tolerance(config, xi_up)
    xi_lo, xi_hi = 0.0, xi_up
    rho_star = None
    outer = inner = capped = 0
    status = SolveStatus.CONVERGED

    while xi_hi - xi_lo > delta:
        xi = 0.5 * (xi_lo + xi_hi)
        # every target restarts from the full-power initial point
        res, converged = _target_test(xi, coeffs, p_max, config)
        outer += 1
        inner += res.iterations
        capped += not converged
        if res.feasible:
            xi_lo = xi
            rho_star = res.rho
        else:
            xi_hi = xi

    if rho_star is None:
        probe, _ = _target_test(1e-6 * delta, coeffs, p_max, config)
        inner += probe.iterations
        if probe.feasible:
            rho_star = np.zeros_like(p_max)
        else:
            status = SolveStatus.INFEASIBLE_AT_ZERO
            rho_star = np.array(p_max, dtype=float)

    bd = coeffs.breakdown(rho_star, config)
    return MaxMinSolution(
        rho=rho_star,
        xi_min=xi_lo,
        xi_max=xi_hi,
        xi_up=xi_up,
        delta=delta,
        rates=bd.rate,
        sinr=bd.sinr,
        outer_iterations=outer,
        inner_iterations=inner,
        capped_solves=capped,
        status=status,
        wall_time=time.perf_counter() - start,
    )


@dataclass
class ValidationReport:
    checks: dict[str, bool]
    details: dict[str, str]
    rate_gap: float

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [f"{name}: {self.details[name]}" for name, good in self.checks.items() if not good]


def validate_solution(
    sol: MaxMinSolution,
    coeffs: SinrCoefficients,
    config: ScenarioConfig,
    rho=None,
    p_max=None,
) -> ValidationReport:
    """Check a max-min solution against budgets, its SINR floor and optimality.

    ``rho`` overrides the power vector under test (defaults to ``sol.rho``).
    The near-optimality probe runs the inner solver slightly above the upper
    end of the final bracket, at ``xi_max * (1 + 10 delta / xi_up)``.
    """
    rho = np.asarray(sol.rho if rho is None else rho, dtype=float)
    p_max = config.max_power_vector() if p_max is None else np.broadcast_to(
        np.asarray(p_max, dtype=float), coeffs.gain.shape
    )
    checks: dict[str, bool] = {}
    details: dict[str, str] = {}

    if sol.status is not SolveStatus.CONVERGED:
        checks["status"] = False
        details["status"] = f"solver status {sol.status.value}"

    over = np.flatnonzero((rho < 0) | (rho > p_max * (1 + 1e-12)))
    checks["budget"] = over.size == 0
    details["budget"] = "ok" if over.size == 0 else f"users {over.tolist()} outside [0, P_max]"

    sinr = coeffs.sinr(rho)
    short = np.flatnonzero(sinr < sol.xi_min * (1.0 - FEASIBILITY_RTOL))
    checks["sinr_floor"] = short.size == 0
    details["sinr_floor"] = (
        "ok" if short.size == 0
        else f"users {short.tolist()} below xi_min={sol.xi_min:.6g}: {sinr[short].tolist()}"
    )

    rel = sol.delta / sol.xi_up if sol.xi_up > 0 else 0.0
    probe_xi = sol.xi_max * (1.0 + 10.0 * rel)
    probe, _ = _target_test(probe_xi, coeffs, p_max, config)
    checks["near_optimal"] = not probe.feasible
    details["near_optimal"] = (
        "ok" if not probe.feasible else f"target {probe_xi:.6g} above the bracket is still feasible"
    )

    rates = coeffs.breakdown(rho, config).rate
    gap = float(rates.max() - rates.min())
    details["rate_gap"] = f"{gap:.6g} Mbps"
    return ValidationReport(checks=checks, details=details, rate_gap=gap)
