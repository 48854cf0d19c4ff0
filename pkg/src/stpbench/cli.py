"""Command-line front end.

Subcommands:

* ``run --config c.json [--threads N] [--output-dir DIR]``
* ``check --config c.json | --report report.json``  (exit 0 iff all pass)
* ``plot --report report.json --kind K --out fig.svg [--exponent E]``
* ``aggregate --report a.json --report b.json --out merged.json``
* ``constants --config c.json``

The STPBENCH_OUTPUT_DIR environment variable overrides the config's
output directory for ``run``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .checks import run_checks
from .diagnostics import estimate_sublevel_radius, thm4_constants
from .errors import ConfigError
from .experiment import (
    ExperimentConfig,
    aggregate_reports,
    load_report,
    load_trajectories,
    resolve_output_dir,
    run_experiment,
    write_report,
)
from .schedules import thm7_h


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stpbench",
        description="Zeroth-order search benchmark runner and verifier",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a trajectory batch")
    p_run.add_argument("--config", required=True, help="experiment JSON file")
    p_run.add_argument("--threads", type=int, default=1,
                       help="worker processes (results identical at any count)")
    p_run.add_argument("--output-dir", default=None,
                       help="override the config's output directory")
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="run the diagnostic battery")
    src = p_check.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="config whose output directory holds the run")
    src.add_argument("--report", help="path to a stored report.json")
    p_check.add_argument("--out", default=None, help="also write the JSON verdicts here")
    p_check.set_defaults(func=cmd_check)

    p_plot = sub.add_parser("plot", help="render a figure from a report")
    p_plot.add_argument("--report", required=True)
    p_plot.add_argument("--kind", required=True,
                        choices=("grad_vs_iter", "grad_vs_time", "rate_curve",
                                 "fgap_vs_iter"))
    p_plot.add_argument("--out", required=True, help="output figure path (.svg, .png, ...)")
    p_plot.add_argument("--exponent", type=float, default=0.49,
                        help="exponent for the rate_curve kind")
    p_plot.set_defaults(func=cmd_plot)

    p_agg = sub.add_parser("aggregate", help="merge reports for comparison plots")
    p_agg.add_argument("--report", action="append", required=True,
                       help="report.json path (repeatable)")
    p_agg.add_argument("--out", required=True)
    p_agg.set_defaults(func=cmd_aggregate)

    p_const = sub.add_parser("constants",
                             help="print the analytic constants for a config")
    p_const.add_argument("--config", required=True)
    p_const.set_defaults(func=cmd_constants)
    return parser


def cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    out = resolve_output_dir(config, args.output_dir)
    trajs, report = run_experiment(config, threads=args.threads,
                                   output_dir=args.output_dir)
    print(f"wrote {len(trajs)} trajectories to {out}")
    print(f"config digest: {report['config_digest']}")
    return 0


def cmd_check(args) -> int:
    if args.report:
        report_path = Path(args.report)
        report = load_report(report_path)
        base_dir = report_path.parent
    else:
        config = ExperimentConfig.from_file(args.config)
        base_dir = resolve_output_dir(config, None)
        report = load_report(base_dir / "report.json")
    config = ExperimentConfig.from_dict(report["config"])
    trajs = load_trajectories(report, base_dir)
    verdict = run_checks(config, trajs)
    text = json.dumps(verdict, sort_keys=True, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0 if verdict["all_pass"] else 1


def cmd_plot(args) -> int:
    from .plots import plot_report  # matplotlib import kept off the run path

    report_path = Path(args.report)
    report = load_report(report_path)
    out = plot_report(report, report_path.parent, args.kind, args.out,
                      exponent=args.exponent)
    print(f"wrote {out}")
    return 0


def cmd_aggregate(args) -> int:
    merged = aggregate_reports(args.report)
    write_report(merged, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_constants(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    obj = config.build_objective()
    sampler = config.build_sampler()
    consts = sampler.constants(obj.dim)
    info: dict = {
        "objective": config.objective,
        "distribution": config.distribution["name"],
        "mu_d": consts.mu_d,
        "gamma_d": consts.gamma_d,
        "smoothness": obj.smoothness,
        "strong_convexity": obj.mu,
        "f_star": obj.f_star,
    }
    if obj.mu > 0.0:
        info["thm7_h"] = thm7_h(consts.mu_d, obj.mu, obj.smoothness)
    if obj.f_star is not None:
        try:
            radius = estimate_sublevel_radius(obj, config.initial_point())
            if radius > 0.0:
                alpha = None
                if config.schedule and config.schedule["name"] == "harmonic":
                    alpha = config.schedule["alpha"]
                c4 = thm4_constants(obj, config.initial_point(), consts.mu_d,
                                    alpha=alpha, radius=radius)
                info["sublevel_radius"] = c4.radius
                info["thm4_alpha"] = c4.alpha
                info["thm4_a"] = c4.a
            else:
                info["sublevel_radius"] = 0.0
        except Exception as exc:  # unsupported objective, alpha too small, ...
            info["thm4_error"] = str(exc)
    print(json.dumps(info, sort_keys=True, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
