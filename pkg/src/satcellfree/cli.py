"""Command line entry point: ``satcellfree run | export-cdf | compare | init-config``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ScenarioConfig, load_config, save_config
from .harness import (
    METRICS,
    ExperimentSpec,
    Strategy,
    compare_strategies,
    export_cdf,
    load_results,
    run_experiment,
)
from .sinr import SystemVariant


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satcellfree", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a batch of random time slots")
    run.add_argument("config", type=Path, help="scenario JSON file")
    run.add_argument("--slots", type=int, default=1000)
    run.add_argument("--seed", type=int, default=None, help="override the config rng_seed")
    run.add_argument("--variants", type=_csv_list,
                     default=[v.value for v in SystemVariant],
                     help="comma list of: " + ", ".join(v.value for v in SystemVariant))
    run.add_argument("--strategies", type=_csv_list,
                     default=[s.value for s in Strategy],
                     help="comma list of: " + ", ".join(s.value for s in Strategy))
    run.add_argument("--mc-trials", type=int, default=0,
                     help="Monte Carlo trials per slot (0 = closed form only)")
    run.add_argument("--out", type=Path, required=True, help="output directory")

    cdf = sub.add_parser("export-cdf", help="write the empirical CDF of a metric")
    cdf.add_argument("metric", choices=METRICS)
    cdf.add_argument("input", type=Path, help="run directory or slots.jsonl")
    cdf.add_argument("output", type=Path, help="CSV path")
    cdf.add_argument("--variant", default=None)
    cdf.add_argument("--strategy", default=None)

    cmp_ = sub.add_parser("compare", help="compare full power with max-min allocation")
    cmp_.add_argument("input", type=Path, help="run directory or slots.jsonl")
    cmp_.add_argument("output", type=Path, help="JSON path")

    init = sub.add_parser("init-config", help="write the default scenario file")
    init.add_argument("output", type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "init-config":
        save_config(ScenarioConfig(), args.output)
        return 0

    if args.command == "run":
        config = load_config(args.config)
        if args.seed is not None:
            config = config.replace(rng_seed=args.seed)
        spec = ExperimentSpec(
            scenario=config,
            n_slots=args.slots,
            variants=args.variants,
            strategies=args.strategies,
            mc_trials_per_slot=args.mc_trials,
            output_dir=args.out,
        )
        results = run_experiment(spec)
        failed = sum(r.failed for r in results)
        print(f"{len(results)} rows written to {args.out} ({failed} failed)")
        return 1 if failed else 0

    results = load_results(args.input)
    if args.command == "export-cdf":
        export_cdf(results, args.metric, args.output, args.variant, args.strategy)
        return 0
    if args.command == "compare":
        table = compare_strategies(results)
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(table, fh, indent=2)
            fh.write("\n")
        for row in table:
            print(f"{row['variant']:>18}: max-min {row['mean_max_min_rate']:.3f} Mbps, "
                  f"full power {row['mean_full_power_min_rate']:.3f} Mbps, ratio {row['ratio']:.2f}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
