"""Plain block methods against their QR-stabilized versions on the 2D
convection-diffusion problem (no preconditioning).

    python scripts/stabilization.py --m 200 --out results/stabilization
"""
import argparse
from pathlib import Path

from krylov_mrhs.harness import export_summary, run_problem
from krylov_mrhs.problems import GridSpec2D, gen_conv_diff_2d

METHODS = ["bl-bicg", "bl-bicg-rq", "bl-bicgstab", "bl-bicgstab-rq"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=200)
    ap.add_argument("--maxit", type=int, default=500)
    ap.add_argument("--precond", default="none")
    ap.add_argument("--out", default="results/stabilization")
    args = ap.parse_args()

    bundle = gen_conv_diff_2d(GridSpec2D(args.m))
    out = Path(args.out)
    rows, _ = run_problem(bundle, METHODS, precond=args.precond, maxit=args.maxit,
                          history_dir=out / "histories")
    export_summary(rows, out)
    print(f"{'method':16s} {'it':>5s} {'time':>8s}  residual  status")
    for r in rows:
        print(f"{r.method:16s} {r.iterations:5d} {r.wall_time:7.2f}s  {r.final_relative_residual:.1e}  {r.status}")


if __name__ == "__main__":
    main()
