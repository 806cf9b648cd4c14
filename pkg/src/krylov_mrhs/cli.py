"""Command line interface: ``krylov-mrhs {solve,bench,speedup,rho}``."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from .exceptions import ConfigError, ParseError, UnsupportedField
from .harness import (RHO_FIELDS, SPEEDUP_FIELDS, RunConfig, build_preconditioner,
                      build_problem, exit_code, read_config_file, resolve_output_dir, rho_table,
                      run_config, run_suite, write_csv)
from .instrumentation import measure_block_speedup
from .problems import compute_rho


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; 2 is reserved for
    # unconverged runs here
    def error(self, message):
        raise UsageError(message)


def _parser():
    p = _Parser(prog="krylov-mrhs", description="Simultaneous Krylov solvers for many right-hand sides.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one problem with one or more methods")
    s.add_argument("--config", help="key = value configuration file (flags override it)")
    s.add_argument("--matrix", help="gen2d:m=..,a1=..,a2=..,a3=.. | gen3d:m=..,nu=.. | mm:PATH")
    s.add_argument("--rhs", help="default | unit:COUNT | random:COUNT")
    s.add_argument("--shift", help="solve with A - t I, e.g. -0.0919+0.0848j")
    s.add_argument("--method", action="append", help="method name, comma list or 'all'; repeatable")
    s.add_argument("--precond", help="none | ilu0 | ilut[:DROPTOL]")
    s.add_argument("--tol", type=float)
    s.add_argument("--maxit", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory")
    s.add_argument("--no-preprocess", action="store_true", help="do not orthonormalize the right-hand sides")

    b = sub.add_parser("bench", help="run the example suite")
    b.add_argument("--suite", default="paper", choices=["paper"])
    b.add_argument("--scale", default="desk", choices=["desk", "full"])
    b.add_argument("--ex4", help="Matrix Market file of the Wilson-Dirac example")
    b.add_argument("--ex5", help="Matrix Market file of the graphene example")
    b.add_argument("--method", action="append", help="restrict to these methods")
    b.add_argument("--tol", type=float, default=1e-10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--reps", type=int, default=5, help="repetitions of the speedup timing")
    b.add_argument("--out")

    sp = sub.add_parser("speedup", help="time s single matvecs against one block matvec")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--s", type=int, required=True)
    sp.add_argument("--reps", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="write speedup.csv here instead of printing only")

    r = sub.add_parser("rho", help="print s*n/nnz")
    r.add_argument("--matrix", help="problem spec; omitted: table for the generated examples")
    r.add_argument("--s", type=int, help="number of right-hand sides (default: from the problem)")
    r.add_argument("--precond", default="none", help="add the nnz of the ILU factors")
    r.add_argument("--scale", default="desk", choices=["desk", "full"])
    r.add_argument("--out")
    return p


def _split_methods(values):
    out = []
    for v in values:
        out.extend(t for t in v.split(",") if t.strip())
    return out


def _cmd_solve(args):
    cfg_kw = read_config_file(args.config) if args.config else {}
    for key, val in (("matrix", args.matrix), ("rhs", args.rhs), ("precond", args.precond),
                     ("tol", args.tol), ("maxit", args.maxit), ("seed", args.seed)):
        if val is not None:
            cfg_kw[key] = val
    if args.shift is not None:
        try:
            cfg_kw["shift"] = complex(args.shift.replace(" ", ""))
        except ValueError:
            raise ConfigError("shift", f"not a number: {args.shift!r}") from None
    if args.method:
        cfg_kw["methods"] = _split_methods(args.method)
    if args.no_preprocess:
        cfg_kw["preprocess_rhs"] = False
    cfg_kw["output_dir"] = resolve_output_dir(args.out, cfg_kw.get("output_dir"))
    cfg = RunConfig(**cfg_kw)
    rows, _ = run_config(cfg)
    for row in rows:
        print(f"{row.method:16s} {row.status:14s} it={row.iterations:5d} "
              f"rel={row.final_relative_residual:.2e} mv={row.matvec_cols_A + row.matvec_cols_AH}")
    print(f"results written to {cfg.output_dir}")
    return exit_code(rows)


def _cmd_bench(args):
    out = resolve_output_dir(args.out)
    methods = None
    if args.method:
        from .harness import parse_methods
        methods = parse_methods(_split_methods(args.method))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = run_suite(out, scale=args.scale, ex4=args.ex4, ex5=args.ex5, seed=args.seed,
                         methods=methods, tol=args.tol, speedup_reps=args.reps)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    ran = [r for r in rows if not r.status.startswith("skipped")]
    for row in ran:
        print(f"{row.example:4s} {row.precond:10s} {row.method:16s} {row.status:14s} it={row.iterations:5d} "
              f"rel={row.final_relative_residual:.2e}")
    print(f"results written to {out}")
    return exit_code(ran)


def _cmd_speedup(args):
    bundle = build_problem(RunConfig(matrix=args.matrix))
    m = measure_block_speedup(bundle.a, args.s, reps=args.reps, seed=args.seed)
    print(f"s={m.s} single={m.t_single_sum:.3e}s block={m.t_block:.3e}s a={m.a_ratio:.2f}")
    if args.out:
        row = dict(example=bundle.label, n=bundle.n, s=m.s, reps=m.reps, threads=m.threads,
                   t_single_sum=m.t_single_sum, t_block=m.t_block, a_ratio=m.a_ratio)
        write_csv(Path(resolve_output_dir(args.out)) / "speedup.csv", [row], SPEEDUP_FIELDS)
    return 0


def _cmd_rho(args):
    if args.matrix is None:
        rows = rho_table(args.scale)
        for r in rows:
            print(f"{r['example']} {r['scale']:5s} n={r['n']:7d} s={r['s']:3d} "
                  f"rho={r['rho']:.2f} rho_ilu0={r['rho_ilu0']:.2f}")
        if args.out:
            write_csv(Path(resolve_output_dir(args.out)) / "rho.csv", rows, RHO_FIELDS)
        return 0
    bundle = build_problem(RunConfig(matrix=args.matrix))
    s = args.s or bundle.s
    factors = build_preconditioner(args.precond, bundle.a)
    print(f"{compute_rho(bundle.a, s, factors):.6f}")
    return 0


_COMMANDS = {"solve": _cmd_solve, "bench": _cmd_bench, "speedup": _cmd_speedup, "rho": _cmd_rho}


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except UsageError as exc:
        print(f"krylov-mrhs: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"krylov-mrhs: error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, UnsupportedField) as exc:
        print(f"krylov-mrhs: error: cannot read matrix: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"krylov-mrhs: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
