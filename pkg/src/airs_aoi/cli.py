"""Command-line entry point: ``airs-aoi {run,sweep,converge,selfcheck}``.

Errors are reported as a single ``error: <kind>: <message>`` line on stderr with a
nonzero exit status.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import (ConfigError, ScenarioConfig, build_config, load_scenario, parse_assignments,
                     parse_override)
from .selfcheck import run_selfcheck
from .simulation import (POLICIES, SweepSpec, apply_axis, convergence_report, run_episode,
                         run_sweep, summarize, write_aoi_trace_csv, write_convergence_csv,
                         write_summary_csv, write_sweep_csv, write_trajectory_csv)

EXIT_USAGE = 2
EXIT_FAILURE = 1


class CliError(Exception):
    def __init__(self, kind: str, message: str, status: int = EXIT_USAGE):
        super().__init__(message)
        self.kind = kind
        self.status = status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError("usage", message)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="airs-aoi", description="Aerial-IRS AoI simulator and optimiser.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out=True):
        sp.add_argument("--scenario", type=Path, help="scenario file (defaults built in)")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a scenario key (repeatable)")
        sp.add_argument("--seed", type=_seed, help="episode seed (default: rng_seed)")
        if out:
            sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")

    run = sub.add_parser("run", help="simulate one episode")
    common(run)
    run.add_argument("--policy", choices=POLICIES, default="proposed")

    sweep = sub.add_parser("sweep", help="sweep one scenario key over several values")
    common(sweep)
    sweep.add_argument("--axis", required=True, metavar="NAME:V1,V2,...")
    sweep.add_argument("--seeds-per-point", type=int, default=20)
    sweep.add_argument("--policy", action="append", choices=POLICIES,
                       help="policy to include (repeatable; default proposed and fixed-location)")
    sweep.add_argument("--workers", type=int, default=1, help="worker processes")

    conv = sub.add_parser("converge", help="per-iteration SCA objective for sampled slots")
    common(conv)
    conv.add_argument("--slots", type=int, default=10, help="number of slots to sample")

    check = sub.add_parser("selfcheck", help="run the oracle-equivalence suites")
    common(check, out=False)
    return p


def _config(args) -> ScenarioConfig:
    # validate override keys before touching the file or running anything
    pairs = [parse_override(o) for o in args.overrides]
    parse_assignments(pairs)
    if args.scenario is None:
        return build_config(parse_assignments(pairs))
    return load_scenario(args.scenario, args.overrides)


def _parse_axis(text: str, cfg: ScenarioConfig):
    if ":" not in text:
        raise CliError("usage", f"--axis must look like name:v1,v2,..., got {text!r}")
    name, values = text.split(":", 1)
    name = name.strip()
    try:
        vals = tuple(float(v) for v in values.split(",") if v.strip())
    except ValueError:
        raise CliError("usage", f"non-numeric axis value in {values!r}") from None
    if not vals:
        raise CliError("usage", "--axis needs at least one value")
    vals = tuple(int(v) if v == int(v) else v for v in vals)
    for v in vals:
        apply_axis(cfg, name, v)  # surfaces unknown keys and invalid values early
    return name, vals


def cmd_run(args, cfg) -> int:
    res = run_episode(cfg, args.policy, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    write_aoi_trace_csv(res, args.out / "aoi_trace.csv")
    write_trajectory_csv(res, args.out / "trajectory.csv")
    print(f"policy={res.policy} seed={res.seed} weighted_sum_aoi={res.weighted_sum_aoi:g} "
          f"infeasible_slots={len(res.infeasible_slots)}")
    if not res.audit.passed:
        slot, kind, msg = res.audit.violations[0]
        raise CliError("audit", f"slot {slot} {kind}: {msg}", EXIT_FAILURE)
    return 0


def cmd_sweep(args, cfg) -> int:
    name, values = _parse_axis(args.axis, cfg)
    if args.seeds_per_point < 1:
        raise CliError("usage", "--seeds-per-point must be >= 1")
    base = cfg.rng_seed if args.seed is None else args.seed
    seeds = tuple(base + i for i in range(args.seeds_per_point))
    policies = tuple(args.policy) if args.policy else ("proposed", "fixed-location")
    spec = SweepSpec(name, values, seeds, policies)
    try:
        rows = run_sweep(spec, cfg, workers=max(1, args.workers))
    except RuntimeError as exc:
        raise CliError("audit", str(exc), EXIT_FAILURE) from None
    write_sweep_csv(rows, args.out / "sweep.csv")
    summary = summarize(rows)
    write_summary_csv(summary, args.out / "sweep_summary.csv")
    for s in summary:
        print(f"{s.policy:15s} {s.axis_name}={s.axis_value:g}: "
              f"{s.mean:.2f} +/- {s.sem:.2f} (n={s.n})")
    return 0


def cmd_converge(args, cfg) -> int:
    if args.slots < 1:
        raise CliError("usage", "--slots must be >= 1")
    rows, traces = convergence_report(cfg, args.slots, args.seed)
    write_convergence_csv(rows, args.out / "convergence.csv")
    for n, tr in traces.items():
        print(f"slot {n}: {tr.iterations} iterations, objective {tr.objectives[-1]:.6g}")
    return 0


def cmd_selfcheck(args, cfg) -> int:
    results = run_selfcheck(cfg, seed=args.seed or 0)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise CliError("selfcheck", f"{len(failed)} suite(s) failed", EXIT_FAILURE)
    print(f"all {len(results)} suites passed")
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "converge": cmd_converge,
            "selfcheck": cmd_selfcheck}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except CliError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return exc.status
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
