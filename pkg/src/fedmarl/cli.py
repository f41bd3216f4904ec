"""Command-line entry points: single runs, comparison matrices, noise checks.

Log level comes from the FEDMARL_LOG_LEVEL environment variable (default INFO).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ExperimentConfig
from .harness import run_experiment, run_matrix
from .noise import NoiseSchedule, validate_noise_schedule

log = logging.getLogger("fedmarl")


def _load_config(path):
    if path:
        return ExperimentConfig.from_file(path)
    return ExperimentConfig()


def _parse_axis_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _parse_axes(specs):
    axes = {}
    for spec in specs:
        if "=" not in spec:
            raise SystemExit(f"axis {spec!r} must look like KEY=V1,V2")
        key, values = spec.split("=", 1)
        axes[key.strip()] = [_parse_axis_value(v) for v in values.split(",")]
    return axes


def cmd_run(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config.run.seed = args.seed
    if args.noise is not None:
        config.noise.kind = args.noise
    if args.noise_rate is not None:
        config.noise.rate = args.noise_rate
    if args.noise_n0 is not None:
        config.noise.initial_scale = args.noise_n0
    if args.strategy is not None:
        config.federation.strategy = args.strategy
    if args.scheme is not None:
        config.reward.scheme = args.scheme
    summary = run_experiment(config, args.out)
    log.info("run complete: %s", os.path.join(args.out, "summary.json"))
    brief = {k: summary[k] for k in
             ("final_mean_reward", "mean_throughput_mbps", "mean_latency_s",
              "total_energy_j", "convergence_iteration")}
    print(json.dumps(brief, indent=2, sort_keys=True))
    return 0


def cmd_matrix(args) -> int:
    config = _load_config(args.config)
    axes = _parse_axes(args.axis)
    seeds = [int(s) for s in args.seeds.split(",")]
    table = run_matrix(config, axes, seeds, args.out, workers=args.workers)
    log.info("matrix complete: %d cells -> %s", len(table),
             os.path.join(args.out, "matrix.csv"))
    print(f"wrote {len(table)} rows to {os.path.join(args.out, 'matrix.csv')}")
    return 0


def cmd_validate_noise(args) -> int:
    schedule = NoiseSchedule(args.fn, args.rate, args.n0)
    report = validate_noise_schedule(schedule, args.t_lo, args.t_hi)
    if report.passed:
        print(f"PASS: {args.fn} decay (rate={args.rate}, n0={args.n0}) "
              f"meets all conditions on ({args.t_lo}, {args.t_hi})")
        return 0
    print(f"FAIL: {args.fn} decay violates the {report.failed_condition!r} "
          f"condition at t={report.violation_at:.6g}")
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedmarl",
        description="Wireless multi-agent RL lab with federated critic fusion")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", help="YAML config (defaults when omitted)")
    p_run.add_argument("--seed", type=int, help="override run.seed")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--noise", choices=("linear", "cubic"),
                       help="override noise.kind")
    p_run.add_argument("--noise-rate", type=float, help="override noise.rate")
    p_run.add_argument("--noise-n0", type=float,
                       help="override noise.initial_scale")
    p_run.add_argument("--strategy", choices=("fedwgt", "fedavg", "none"),
                       help="override federation.strategy")
    p_run.add_argument("--scheme", type=int, choices=(1, 2),
                       help="override reward.scheme")
    p_run.set_defaults(handler=cmd_run)

    p_mat = sub.add_parser("matrix", help="run a comparison matrix")
    p_mat.add_argument("--config", help="YAML base config")
    p_mat.add_argument("--axis", action="append", required=True,
                       metavar="KEY=V1,V2",
                       help="sweep axis, e.g. noise.rate=0.005,0.01,0.02")
    p_mat.add_argument("--seeds", required=True, help="comma-separated seeds")
    p_mat.add_argument("--out", required=True, help="output directory")
    p_mat.add_argument("--workers", type=int, default=None,
                       help="parallel cell processes (default: cpu count)")
    p_mat.set_defaults(handler=cmd_matrix)

    p_noise = sub.add_parser("validate-noise",
                             help="check a decay curve against the design conditions")
    p_noise.add_argument("--fn", choices=("linear", "cubic"), required=True)
    p_noise.add_argument("--rate", type=float, required=True)
    p_noise.add_argument("--n0", type=float, required=True)
    p_noise.add_argument("--t-lo", type=float, default=0.0)
    p_noise.add_argument("--t-hi", type=float, default=50.0)
    p_noise.set_defaults(handler=cmd_validate_noise)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("FEDMARL_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
