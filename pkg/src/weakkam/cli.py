"""Command-line experiment runner.

    weakkam verify --config mechanical_band --out out/mech

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

from . import pipeline, tables
from .config import ConfigError, bundled_configs, load_config
from .errors import ConvergenceError, DiagnosticError, PreconditionError

logger = logging.getLogger("weakkam")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 1, 2, 3

STAGES = {
    "critical": pipeline.run_critical,
    "barrier": pipeline.run_barrier,
    "mather": pipeline.run_mather,
    "discounted": pipeline.run_discounted,
    "limit": pipeline.run_limit,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="weakkam", description=__doc__.splitlines()[0])
    ap.add_argument("--list-configs", action="store_true", help="print the bundled config names and exit")
    sub = ap.add_subparsers(dest="command")
    for name, helptext in [
        ("critical", "critical value by minimum mean cycle"),
        ("barrier", "Peierls barrier and Aubry nodes"),
        ("mather", "discrete Mather measures"),
        ("discounted", "discounted solution at the first ladder rung and one backward path"),
        ("limit", "lambda ladder and the selected limit"),
        ("verify", "full pipeline plus the invariant suite, writes report.json"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON config path or bundled config name")
        p.add_argument("--out", default=None, help="output directory (overrides outputs.directory)")
        p.add_argument("--threads", type=int, default=0, help="numba threads, 0 = automatic")
        p.add_argument("--seed", type=int, default=None, help="seed for sampled checks (overrides config)")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _set_threads(n):
    if n < 0:
        raise ConfigError("--threads", "must be >= 0")
    if n:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _summary(ctx, command):
    lines = []
    if ctx.c_grid is not None:
        lines.append(f"c_grid = {ctx.c_grid!r}  (analytic {ctx.oracle.c_analytic!r})")
    if ctx.barrier is not None:
        lines.append(f"barrier: {ctx.barrier.steps_used} squarings, {len(ctx.aubry)} Aubry nodes"
                     + (", reused from barrier.csv" if ctx.barrier_reused else ""))
    if ctx.family is not None:
        lines.append(f"Mather family: {len(ctx.family.measures)} extreme measures")
    if ctx.discounted is not None:
        d = ctx.discounted
        lines.append(f"discounted: lambda = {d.lam:g}, {d.iterations} iterations, residual {d.residual:.3g}")
    if ctx.selection is not None:
        lines.append(f"ladder: final gap {ctx.selection.final_gap:.3g} at lambda = {ctx.selection.per_lambda_gap[-1][0]:g}")
    return lines


def run(args) -> int:
    cfg = load_config(args.config)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=Path(args.out))
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed", "must be >= 0")
        eff = dict(cfg.effective, seed=args.seed)
        cfg = dataclasses.replace(cfg, seed=args.seed, effective=eff)
    _set_threads(args.threads)
    ctx = pipeline.new_context(cfg)
    t0 = time.perf_counter()
    if args.command != "verify":
        STAGES[args.command](ctx)
        for line in _summary(ctx, args.command):
            print(line)
        print(f"outputs in {cfg.out_dir} ({time.perf_counter() - t0:.1f} s)")
        return EXIT_OK

    from .verify import run_suite
    results = run_suite(ctx)
    tables.write_json(cfg.out_dir / "report.json", {"checks": [r.as_dict() for r in results]})
    for r in results:
        extra = f"  [{r.detail}]" if r.status != "pass" and r.detail else ""
        print(f"{r.status.upper():4} {r.module}.{r.name}{extra}")
    failed = [r for r in results if r.status == "fail"]
    warned = sum(r.status == "warn" for r in results)
    print(f"{len(results) - len(failed) - warned} pass, {warned} warn, {len(failed)} fail "
          f"({time.perf_counter() - t0:.1f} s); report in {cfg.out_dir / 'report.json'}")
    if not failed:
        return EXIT_OK
    if any(r.detail.startswith("ConvergenceError") for r in failed):
        return EXIT_NONCONVERGENCE
    return EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_configs:
        print("\n".join(bundled_configs()))
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (PreconditionError, DiagnosticError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
