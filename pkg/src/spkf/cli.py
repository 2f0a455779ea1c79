"""Command-line front end: campaigns, cost-model grids, order probes.

Exit codes: 0 success, 2 bad configuration, 3 a filter diverged.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .diagnostics import order_probe
from .errors import ExactRegime
from .filters import FILTER_NAMES
from .harness import (CampaignConfig, complexity_grid, monte_carlo,
                      write_complexity_csv)
from .scenarios import SCENARIOS
from .scenarios.gnss import LeoGnssConfig
from .scenarios.reentry import ReentryConfig

_CONFIG_TYPES = {"reentry": ReentryConfig, "leo-gnss": LeoGnssConfig}


def _build_scenario(name: str, config_path, steps):
    cfg_type = _CONFIG_TYPES[name]
    if config_path is not None:
        config = cfg_type.from_json(Path(config_path).read_text(encoding="utf-8"))
    else:
        config = cfg_type()
    if steps is not None:
        if steps < 1:
            raise ValueError("--steps must be at least 1")
        config = replace(config, duration=steps * config.dt)
    return SCENARIOS[name](config)


def _cmd_run(args) -> int:
    filters = [f.strip() for f in args.filters.split(",") if f.strip()]
    if args.seeds < 1:
        raise ValueError("--seeds must be at least 1")
    scenario = _build_scenario(args.scenario, args.config, args.steps)
    campaign = CampaignConfig(scenario=args.scenario, filters=filters,
                              seeds=list(range(args.seeds)),
                              out_dir=Path(args.out))
    rows, results = monte_carlo(campaign, scenario=scenario,
                                sequential=args.sequential_timing)
    print(f"{'filter':8s} {'mean_err':>12s} {'std_err':>12s} "
          f"{'mean_step_ns':>14s} {'reduction_pct':>14s}")
    for r in rows:
        red = "" if r["reduction_pct"] is None else f"{r['reduction_pct']:.2f}"
        print(f"{r['filter']:8s} {r['mean_err']:12.4f} {r['std_err']:12.4f} "
              f"{r['mean_step_ns']:14.0f} {red:>14s}")
    print(f"results written to {campaign.out_dir}")
    if any(res.diverged for res in results.values()):
        return 3
    return 0


def _parse_int_list(text: str, label: str) -> list:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValueError(f"--{label} expects comma-separated integers") from exc
    if not values:
        raise ValueError(f"--{label} expects at least one value")
    return values


def _cmd_complexity(args) -> int:
    if args.n_max < 1:
        raise ValueError("--n-max must be at least 1")
    grid, limits = complexity_grid(range(1, args.n_max + 1),
                                   _parse_int_list(args.j, "j"),
                                   _parse_int_list(args.h, "h"))
    limit_path = write_complexity_csv(args.out, grid, limits)
    print(f"{len(grid)} grid rows -> {args.out}")
    print(f"{len(limits)} limit rows -> {limit_path}")
    return 0


def _cmd_probe_order(args) -> int:
    scenario = SCENARIOS[args.scenario]()
    est, dt, scales = scenario.probe_setup()
    try:
        result = order_probe(scenario.dynamics(), est, dt,
                             scenario.filter_config(), args.method, scales)
    except ExactRegime as exc:
        print(f"exact regime: {exc}")
        return 0
    print(f"{args.method} transport on {args.scenario} (dt={dt}):")
    for spread, err in result.points:
        print(f"  spread {spread:12.6g}  max error {err:12.6g}")
    print(f"fitted order: {result.slope:.3f}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spkf",
        description="Sigma-point filter benchmarks and cost-model tables.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo campaign on a scenario")
    run.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    run.add_argument("--filters", default=",".join(FILTER_NAMES),
                     help="comma-separated filter names")
    run.add_argument("--seeds", type=int, default=1,
                     help="number of seeds (0..N-1)")
    run.add_argument("--steps", type=int, default=None,
                     help="override the scenario's step count")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--sequential-timing", action="store_true",
                     help="run pairs sequentially for clean timing")
    run.add_argument("--config", default=None,
                     help="scenario configuration JSON file")
    run.set_defaults(handler=_cmd_run)

    comp = sub.add_parser("complexity", help="evaluate the cost model")
    comp.add_argument("--n-max", type=int, required=True,
                      help="state dimensions 1..N")
    comp.add_argument("--j", default="1", help="measurement dims, comma list")
    comp.add_argument("--h", default="1", help="integration substeps, comma list")
    comp.add_argument("--out", required=True, help="grid CSV path")
    comp.set_defaults(handler=_cmd_complexity)

    probe = sub.add_parser("probe-order",
                           help="measure a transport's error order")
    probe.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    probe.add_argument("--method", required=True, choices=("spukf", "espukf"))
    probe.set_defaults(handler=_cmd_probe_order)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
