"""Command-line entry point: ``jointmc {sweep,limits,calibrate,verify}``.

On failure a single ``<category>: <message>`` line goes to stderr and the
exit status is nonzero (2 for usage/config errors, 1 otherwise).
"""

import argparse
import logging
import sys

from jointmc.errors import ConfigError, JointMCError

log = logging.getLogger("jointmc")


def _cmd_sweep(args):
    from jointmc.config import load_config, parse_assignments
    from jointmc.sweep import aggregate, build_model, emit_csv, emit_region_overlay, run_sweep

    overrides = parse_assignments(args.set or [], source="--set")
    if args.out:
        overrides["output_path"] = args.out
    if args.overlay:
        overrides["overlay_path"] = args.overlay
    if args.regenerate_truth_per_trial:
        overrides["regenerate_truth_per_trial"] = True
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    config = load_config(args.config, overrides)
    model = build_model(config)
    log.info("dims %s", model.dims)

    def progress(done, total):
        if done == total or done % max(total // 20, 1) == 0:
            log.info("%d/%d work items", done, total)

    records = run_sweep(config, threads=args.threads, model=model, progress=progress)
    emit_csv(aggregate(records), config.output_path)
    if config.overlay_path:
        emit_region_overlay(model.dims, config.overlay_path)
    print(f"wrote {config.output_path} ({len(records)} records)")
    return 0


def _cmd_limits(args):
    from jointmc.limits import (
        ProblemDims,
        beneficial_necessary,
        beneficial_rank_bound,
        classify_region,
        independent_threshold,
        is_beneficial,
        joint_threshold,
        r7_nonempty,
    )

    if (args.k1 is None) != (args.k2 is None):
        raise ConfigError("--k1 and --k2 must be given together")
    dims = ProblemDims(args.m, args.n, args.r1, args.r2, args.r)
    print(f"t1 = {independent_threshold(dims.m, dims.n, dims.r1)}")
    print(f"t2 = {independent_threshold(dims.m, dims.n, dims.r2)}")
    print(f"tj = {joint_threshold(dims.m, dims.n, dims.r)}")
    print(f"necessary_condition = {beneficial_necessary(dims)}")
    print(f"rank_bound = {beneficial_rank_bound(dims):.10g}")
    print(f"beneficial = {is_beneficial(dims)}")
    print(f"r7_nonempty = {r7_nonempty(dims)}")
    if args.k1 is not None:
        report = classify_region(args.k1, args.k2, dims)
        print(f"flags = {report.flag_string}")
        print(f"region = {report.region_label}")
    return 0


def _cmd_calibrate(args):
    from jointmc.covariance_model import calibrate_tail

    tail = calibrate_tail(args.target_rank, args.m, args.n, args.seed)
    print(f"tail_correlation = {tail:.10g}")
    return 0


def _cmd_verify(args):
    from jointmc.acceptance import run_all

    results = run_all(report=print)
    failed = [r.key for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="jointmc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run the Monte-Carlo (k1, k2) sweep")
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--out", help="output CSV (overrides output_path)")
    p.add_argument("--overlay", help="threshold-line CSV (overrides overlay_path)")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--regenerate-truth-per-trial", action="store_true")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("limits", help="thresholds, region and rank bound for given dims")
    for name in ("m", "n", "r1", "r2", "r"):
        p.add_argument(f"--{name}", type=int, required=True)
    p.add_argument("--k1", type=int)
    p.add_argument("--k2", type=int)
    p.set_defaults(func=_cmd_limits)

    p = sub.add_parser("calibrate", help="tail correlation for a target effective rank")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--target-rank", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except JointMCError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1


if __name__ == "__main__":
    sys.exit(main())
