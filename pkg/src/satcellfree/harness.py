"""Batch experiments over random time slots.

AP and satellite positions are fixed for an experiment; every slot redraws
the user drop and all shadowing, rebuilds the statistics and evaluates each
(system variant, power strategy) cell. Each slot has its own RNG stream
derived from ``(seed, slot)``, so a slot's outcome does not depend on which
other slots were run.

Output directory layout::

    slots.jsonl    one JSON record per evaluated cell, streamed (has timings)
    rates.csv      per-cell rates, deterministic under the seed
    summary.json   aggregate statistics and the strategy comparison
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .channel import build_statistics, drop_uniform, drop_users
from .config import ScenarioConfig
from .estimation import estimate_stats
from .power import max_min_allocate
from .sinr import SystemVariant, mrc_combiner, monte_carlo_sinr, sinr_coefficients

log = logging.getLogger(__name__)

# Reference levels reported for the 20-user rural deployment.
REFERENCE_FULL_POWER_MIN_RATE_MBPS = 1.3
REFERENCE_MAX_MIN_GAIN = 3.0

METRICS = ("sum_rate", "min_rate", "runtime")


class Strategy(str, enum.Enum):
    FULL_POWER = "full-power"
    MAX_MIN = "max-min"

    @classmethod
    def parse(cls, value: "str | Strategy") -> "Strategy":
        if isinstance(value, cls):
            return value
        for s in cls:
            if value in (s.value, s.name, s.name.lower()):
                return s
        raise ValueError(f"unknown power strategy {value!r}")


@dataclass
class ExperimentSpec:
    scenario: ScenarioConfig
    n_slots: int = 1000
    variants: Sequence[SystemVariant] = tuple(SystemVariant)
    strategies: Sequence[Strategy] = tuple(Strategy)
    mc_trials_per_slot: int = 0
    output_dir: Path | None = None

    def __post_init__(self):
        self.variants = tuple(SystemVariant.parse(v) for v in self.variants)
        self.strategies = tuple(Strategy.parse(s) for s in self.strategies)
        if self.n_slots < 1:
            raise ValueError("n_slots must be >= 1")
        if not self.variants or not self.strategies:
            raise ValueError("need at least one variant and one strategy")
        if self.mc_trials_per_slot < 0:
            raise ValueError("mc_trials_per_slot must be >= 0")
        if self.output_dir is not None:
            self.output_dir = Path(self.output_dir)


@dataclass
class SlotResult:
    slot: int
    variant: str
    strategy: str
    rates: list[float]
    sum_rate: float
    min_rate: float
    solver_time: float = 0.0
    outer_iterations: int = 0
    inner_iterations: int = 0
    mc_rates: list[float] | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    @classmethod
    def from_dict(cls, data: dict) -> "SlotResult":
        return cls(**data)


def slot_rng(seed: int, slot: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, slot)))


def infrastructure(config: ScenarioConfig) -> np.ndarray:
    """AP positions shared by every slot of an experiment."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.rng_seed, spawn_key=(0,)))
    return drop_uniform(config.num_aps, config.area_side_km, config.ap_height_m, rng)


def evaluate_slot(spec: ExperimentSpec, slot: int, ap_positions: np.ndarray) -> list[SlotResult]:
    cfg = spec.scenario
    rng = slot_rng(cfg.rng_seed, slot)
    users = drop_users(cfg, rng)
    stats = build_statistics(cfg, ap_positions, users, rng)
    est = estimate_stats(stats, cfg.pilot_power)
    p_max = cfg.max_power_vector()

    out = []
    for variant in spec.variants:
        coeffs = sinr_coefficients(stats, est, variant)
        for strategy in spec.strategies:
            row = SlotResult(slot, variant.value, strategy.value, [], float("nan"), float("nan"))
            try:
                t0 = time.perf_counter()
                if strategy is Strategy.FULL_POWER:
                    rho = p_max
                    rates = coeffs.breakdown(rho, cfg).rate
                else:
                    sol = max_min_allocate(coeffs, cfg, p_max)
                    rho, rates = sol.rho, sol.rates
                    row.outer_iterations = sol.outer_iterations
                    row.inner_iterations = sol.inner_iterations
                row.solver_time = time.perf_counter() - t0
                row.rates = [float(r) for r in rates]
                row.sum_rate = float(np.sum(rates))
                row.min_rate = float(np.min(rates))
                if spec.mc_trials_per_slot:
                    mc = monte_carlo_sinr(
                        None, rho, stats, est, mrc_combiner, spec.mc_trials_per_slot, rng, variant, cfg
                    )
                    row.mc_rates = [float(r) for r in mc.rate]
            except Exception as exc:  # recorded per row, the batch goes on
                log.warning("slot %d %s/%s failed: %s", slot, variant.value, strategy.value, exc)
                row.error = f"{type(exc).__name__}: {exc}"
            out.append(row)
    return out


def run_experiment(spec: ExperimentSpec) -> list[SlotResult]:
    """Run every slot; stream records to ``spec.output_dir`` when it is set."""
    ap_positions = infrastructure(spec.scenario)
    results: list[SlotResult] = []
    stream = None
    if spec.output_dir is not None:
        spec.output_dir.mkdir(parents=True, exist_ok=True)
        stream = open(spec.output_dir / "slots.jsonl", "w", encoding="utf-8")
    try:
        for slot in range(spec.n_slots):
            rows = evaluate_slot(spec, slot, ap_positions)
            results.extend(rows)
            if stream is not None:
                for row in rows:
                    stream.write(json.dumps(asdict(row)) + "\n")
                stream.flush()
    finally:
        if stream is not None:
            stream.close()
    if spec.output_dir is not None:
        write_rates_csv(results, spec.output_dir / "rates.csv")
        try:
            comparison = compare_strategies(results) if len(spec.strategies) > 1 else []
        except ValueError as exc:  # e.g. every max-min row failed
            log.warning("strategy comparison skipped: %s", exc)
            comparison = []
        summary = {
            "n_slots": spec.n_slots,
            "seed": spec.scenario.rng_seed,
            "failed_rows": sum(r.failed for r in results),
            "cells": summarize(results),
            "comparison": comparison,
        }
        with open(spec.output_dir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    return results


# ---------------------------------------------------------------------------
# Loading / exporting
# ---------------------------------------------------------------------------


def load_results(path: str | Path) -> list[SlotResult]:
    """Read ``slots.jsonl`` (or a run directory containing it)."""
    path = Path(path)
    if path.is_dir():
        path = path / "slots.jsonl"
    with open(path, encoding="utf-8") as fh:
        return [SlotResult.from_dict(json.loads(line)) for line in fh if line.strip()]


def write_rates_csv(results: Iterable[SlotResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "variant", "strategy", "sum_rate", "min_rate", "rates", "error"])
        for r in results:
            writer.writerow([
                r.slot, r.variant, r.strategy, repr(r.sum_rate), repr(r.min_rate),
                " ".join(repr(x) for x in r.rates), r.error or "",
            ])


def select(results: Iterable[SlotResult], variant=None, strategy=None) -> list[SlotResult]:
    v = None if variant is None else SystemVariant.parse(variant).value
    s = None if strategy is None else Strategy.parse(strategy).value
    return [
        r for r in results
        if not r.failed and (v is None or r.variant == v) and (s is None or r.strategy == s)
    ]


def metric_values(results: Iterable[SlotResult], metric: str) -> np.ndarray:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    attr = "solver_time" if metric == "runtime" else metric
    return np.array([getattr(r, attr) for r in results], dtype=float)


def empirical_cdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Distinct sorted values and the fraction of samples at or below each."""
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        raise ValueError("empirical CDF of an empty sample")
    uniq, counts = np.unique(values, return_counts=True)
    return uniq, np.cumsum(counts) / values.size


def describe(values) -> dict[str, float]:
    values = np.asarray(values, dtype=float)
    return {
        "count": int(values.size),
        "mean": float(values.mean()),
        "median": float(np.median(values)),
        "p05": float(np.percentile(values, 5)),
        "p95": float(np.percentile(values, 95)),
    }


def export_cdf(results, metric: str, path: str | Path, variant=None, strategy=None) -> Path:
    """Write the empirical CDF of ``metric`` as CSV plus a ``.summary.json`` sidecar."""
    chosen = select(results, variant, strategy)
    if not chosen:
        raise ValueError("no results match the requested variant/strategy")
    values = metric_values(chosen, metric)
    xs, ps = empirical_cdf(values)
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "cdf"])
        for x, p in zip(xs, ps):
            writer.writerow([repr(float(x)), repr(float(p))])
    sidecar = path.with_suffix(".summary.json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({"metric": metric, "variant": variant and SystemVariant.parse(variant).value,
                   "strategy": strategy and Strategy.parse(strategy).value, **describe(values)}, fh, indent=2)
        fh.write("\n")
    return path


def summarize(results: Sequence[SlotResult]) -> list[dict]:
    cells = sorted({(r.variant, r.strategy) for r in results})
    rows = []
    for variant, strategy in cells:
        chosen = select(results, variant, strategy)
        if not chosen:
            continue
        rows.append({
            "variant": variant,
            "strategy": strategy,
            "sum_rate": describe(metric_values(chosen, "sum_rate")),
            "min_rate": describe(metric_values(chosen, "min_rate")),
        })
    return rows


def compare_strategies(results: Sequence[SlotResult]) -> list[dict]:
    """Per-variant comparison of max-min and full-power allocation.

    Reference levels are attached as annotations only.
    """
    table = []
    for variant in sorted({r.variant for r in results}):
        fp = select(results, variant, Strategy.FULL_POWER)
        mm = select(results, variant, Strategy.MAX_MIN)
        if not fp or not mm:
            raise ValueError(f"variant {variant!r} lacks one of the two strategies")
        fp_min = float(metric_values(fp, "min_rate").mean())
        mm_min = float(metric_values(mm, "min_rate").mean())
        table.append({
            "variant": variant,
            "mean_max_min_rate": mm_min,
            "mean_full_power_min_rate": fp_min,
            "ratio": mm_min / fp_min if fp_min > 0 else float("inf"),
            "mean_time_full_power_s": float(metric_values(fp, "runtime").mean()),
            "mean_time_max_min_s": float(metric_values(mm, "runtime").mean()),
            "reference": {
                "full_power_min_rate_mbps": REFERENCE_FULL_POWER_MIN_RATE_MBPS,
                "max_min_gain": REFERENCE_MAX_MIN_GAIN,
            },
        })
    return table
