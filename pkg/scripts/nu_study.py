"""Sweep the advection strength of the 3D problem and record which methods
converge.

    python scripts/nu_study.py --m 12 --nu 10 100 1000
"""
import argparse
from pathlib import Path

from krylov_mrhs.harness import write_csv, run_problem
from krylov_mrhs.problems import GridSpec3D, gen_advection_3d

DEFAULT_METHODS = ["li-bicgstab", "gl-bicgstab", "bl-bicgstab", "bl-bicgstab-rq",
                   "egl-bicg", "gl-qmr", "bl-bicg-rq"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=12)
    ap.add_argument("--nu", type=float, nargs="+", default=[10.0, 100.0, 1000.0])
    ap.add_argument("--methods", default=",".join(DEFAULT_METHODS))
    ap.add_argument("--precond", default="none")
    ap.add_argument("--out", default="results/nu_study")
    args = ap.parse_args()

    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    table = []
    for nu in args.nu:
        bundle = gen_advection_3d(GridSpec3D(args.m, nu))
        rows, _ = run_problem(bundle, methods, precond=args.precond)
        for r in rows:
            table.append(dict(nu=nu, method=r.method, status=r.status, iterations=r.iterations,
                              final_relative_residual=r.final_relative_residual))
            print(f"nu={nu:<7g} {r.method:16s} {r.status:14s} it={r.iterations:4d} "
                  f"res={r.final_relative_residual:.1e}")
    fields = ["nu", "method", "status", "iterations", "final_relative_residual"]
    write_csv(Path(args.out) / "nu_study.csv", table, fields)


if __name__ == "__main__":
    main()
