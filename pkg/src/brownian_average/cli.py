"""Command-line front end: ``density``, ``sample`` and ``verify``.

Exit codes are 0 on success, 1 when verification fails (or sampling cannot
produce a nonzero weight) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import excursion as exc
from . import io
from . import meander as mea
from .paths import MONITORS, RngStream
from .verify import GROUPS, run_suite

SEED_ENV = "BROWNIAN_AVERAGE_SEED"
DEFAULT_SEED = 20240601

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"error: {SEED_ENV}={raw!r} is not an integer") from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _finite_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"{text!r} is not finite")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brownian-average",
        description="Densities and conditional laws of the time average of the Brownian meander and excursion.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"master seed (default: ${SEED_ENV} or {DEFAULT_SEED})")
    common.add_argument(
        "--n-chunks", type=_positive_int, default=os.cpu_count() or 1,
        help="independent RNG substreams run in parallel; part of the reproducibility key (default: CPU count)",
    )
    common.add_argument("--output", "-o", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="csv (default) or json; verify always writes json")
    common.add_argument("--monitor", choices=MONITORS, default="corrected", help="positivity check on the grid")

    d = sub.add_parser("density", parents=[common], help="tabulate the density of the time average")
    d.add_argument("--process", choices=("meander", "excursion"), required=True)
    d.add_argument("--c-min", type=_finite_float, default=None)
    d.add_argument("--c-max", type=_finite_float, default=None)
    d.add_argument("--dc", type=_finite_float, default=None)
    d.add_argument("--n", type=_positive_int, default=100_000, help="number of paths")
    d.add_argument("--grid-n", type=int, default=1024, help="time steps on [0, 1]")

    s = sub.add_parser("sample", parents=[common], help="weighted paths given the time average")
    s.add_argument("--process", choices=("meander", "excursion"), required=True)
    s.add_argument("--c", type=_finite_float, required=True, help="time average to condition on (c > 0)")
    s.add_argument("--n", type=_positive_int, default=10_000, help="number of proposal paths")
    s.add_argument("--grid-n", type=int, default=256, help="time steps on [0, 1]")

    v = sub.add_parser("verify", parents=[common], help="run the verification suite")
    v.add_argument("--quick", action="store_true", help="reduced path counts")
    v.add_argument("--only", default=None, help=f"comma-separated subset of {','.join(GROUPS)}")
    return parser


def _c_grid(args, parser, mod) -> np.ndarray:
    lo, hi, dc = mod.DEFAULT_C_GRID
    lo = lo if args.c_min is None else args.c_min
    hi = hi if args.c_max is None else args.c_max
    dc = dc if args.dc is None else args.dc
    if lo < 0:
        parser.error(f"--c-min must be >= 0 (the density vanishes for negative c), got {lo:g}")
    if hi < lo:
        parser.error(f"--c-max ({hi:g}) must be >= --c-min ({lo:g})")
    if dc <= 0:
        parser.error(f"--dc must be positive, got {dc:g}")
    steps = (hi - lo) / dc
    n = int(round(steps))
    if abs(steps - n) > 1e-9 * max(1.0, steps):
        n = int(math.floor(steps))
    return lo + dc * np.arange(n + 1)


def _check_grid_n(args, parser) -> None:
    if args.grid_n < 2:
        parser.error(f"--grid-n must be >= 2, got {args.grid_n}")
    if args.process == "excursion" and args.grid_n < 3:
        parser.error("--grid-n must be >= 3 for the excursion")


@contextlib.contextmanager
def _open_output(path: Optional[str]):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            yield fh


def _config(args, **extra) -> dict[str, object]:
    keys = ("command", "process", "n", "grid_n", "seed", "n_chunks", "monitor", "quick", "only")
    cfg = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    cfg["version"] = __version__
    cfg.update(extra)
    return cfg


def cmd_density(args, parser) -> int:
    mod = mea if args.process == "meander" else exc
    cs = _c_grid(args, parser, mod)
    _check_grid_n(args, parser)
    grid = mod.default_grid(args.grid_n)
    fn = mea.density_table_meander if args.process == "meander" else exc.density_table_excursion
    table = fn(cs, args.n, grid, RngStream(args.seed), args.n_chunks, args.monitor)
    cfg = _config(args, c_min=io.fmt(cs[0]), c_max=io.fmt(cs[-1]), dc=io.fmt(args.dc or mod.DEFAULT_C_GRID[2]))
    with _open_output(args.output) as out:
        if args.format == "csv":
            io.write_density_csv(table, out, cfg)
        else:
            io.write_density_json(table, out, cfg)
    return EXIT_OK


def cmd_sample(args, parser) -> int:
    if not args.c > 0:
        parser.error(f"--c must satisfy c > 0: the conditional law is defined only for c > 0 (got {args.c:g})")
    _check_grid_n(args, parser)
    if args.format == "csv" and args.output is None:
        parser.error("sample --format csv needs --output (weights go to a sidecar file)")
    mod = mea if args.process == "meander" else exc
    grid = mod.default_grid(args.grid_n)
    fn = mea.sample_conditional_meander if args.process == "meander" else exc.sample_conditional_excursion
    try:
        ens = fn(args.c, args.n, grid, RngStream(args.seed), args.n_chunks, args.monitor)
    except ValueError as err:
        print(f"brownian-average sample: {err}", file=sys.stderr)
        return EXIT_FAIL
    cfg = _config(args, c=io.fmt(args.c))
    if args.format == "csv":
        with _open_output(args.output) as out, open(io.weights_sidecar(args.output), "w", newline="\n") as wout:
            io.write_ensemble_csv(ens, out, wout, cfg)
    else:
        with _open_output(args.output) as out:
            io.write_ensemble_json(ens, out, cfg)
    return EXIT_OK


def cmd_verify(args, parser) -> int:
    only = None
    if args.only:
        only = [g.strip() for g in args.only.split(",") if g.strip()]
        unknown = [g for g in only if g not in GROUPS]
        if unknown:
            parser.error(f"--only: unknown group(s) {', '.join(unknown)}; choose from {', '.join(GROUPS)}")

    def progress(res):
        state = "PASS" if res.passed else "FAIL"
        tries = "" if res.attempts == 1 else f" (after {res.attempts} attempts)"
        print(f"[{state}] {res.name}: {len(res.reports)} comparisons{tries}", file=sys.stderr)

    results = run_suite(args.seed, args.quick, only, args.n_chunks, args.monitor, progress)
    rows = [(r.name, rep) for r in results for rep in r.reports]
    with _open_output(args.output) as out:
        io.write_reports_json(rows, out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = _default_seed()
    sub = parser._subparsers._group_actions[0].choices[args.command]
    if args.command == "verify":
        if args.format == "csv":
            sub.error("verify writes a JSON report; --format csv is not supported")
        args.format = "json"
    elif args.format is None:
        args.format = "csv"
    handler = {"density": cmd_density, "sample": cmd_sample, "verify": cmd_verify}[args.command]
    return handler(args, sub)


if __name__ == "__main__":
    sys.exit(main())
