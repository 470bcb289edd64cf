#!/usr/bin/env python3
"""Velocity-space refinement experiment: run an increasing ladder of mode
counts, measure distances to the largest-n reference and the tail energy of
the reference solution beyond each truncation.

Example:
    python scripts/galerkin_refinement.py --values 3,9,15,21,33 --out runs/galerkin
"""

import argparse
import os

from qmhd import PhysParams, RegParams
from qmhd.experiments import SweepSpec, content_hash, run_sweep, sweep_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--values", default="3,9,15,21,33", help="mode counts, increasing, reference last")
    ap.add_argument("--benchmark", default="random_smooth")
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--points", type=int, default=128)
    ap.add_argument("--t-end", type=float, default=0.1)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--kappa", type=float, default=0.05)
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--sample-every", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/galerkin_refinement")
    args = ap.parse_args()

    spec = SweepSpec(
        parameter="n",
        values=tuple(int(v) for v in args.values.split(",")),
        benchmark=args.benchmark,
        dim=args.dim,
        points=args.points,
        t_end=args.t_end,
        phys=PhysParams(kappa=args.kappa),
        reg=RegParams(epsilon=args.epsilon, dt=args.dt, picard_tol=1e-11),
        sample_every=args.sample_every,
        seed=args.seed,
    )
    result = run_sweep(spec, workers=args.workers)

    os.makedirs(args.out, exist_ok=True)
    rows = sweep_rows(result)
    columns = sorted({k for row in rows for k in row})
    csv_path = os.path.join(args.out, "galerkin_refinement.csv")
    with open(csv_path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[c]) if c in row else "" for c in columns) + "\n")

    print(f"{'n':>5s} {'d(velocity)':>13s} {'d(sqrt_rho u)':>14s} {'tail energy':>13s}")
    for rung in result.rungs:
        print(
            f"{int(rung.value):5d} {rung.distance_to_reference['velocity']:13.5e} "
            f"{rung.distance_to_reference['sqrt_rho_u']:14.5e} {rung.tail_energy:13.5e}"
        )
    print(f"wrote {csv_path} (sha256 {content_hash(csv_path)[:16]}...)")


if __name__ == "__main__":
    main()
