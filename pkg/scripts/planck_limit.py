#!/usr/bin/env python3
"""Vanishing-Planck-constant experiment: run a kappa ladder against the
kappa=0 reference and report solution distances, the quantum energy, and the
weak integral of the quantum force (value / kappa^2 is the measured constant
of the limit bound).

Example:
    python scripts/planck_limit.py --points 128 --t-end 0.25 --out runs/planck
"""

import argparse
import os

from qmhd import PhysParams, RegParams
from qmhd.experiments import SweepSpec, content_hash, run_sweep, sweep_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--values", default="0.2,0.1,0.05,0.025,0", help="kappa ladder, decreasing, reference last")
    ap.add_argument("--benchmark", default="density_bump")
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--points", type=int, default=128)
    ap.add_argument("--modes", type=int, default=9)
    ap.add_argument("--t-end", type=float, default=0.25)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--eta", type=float, default=1e-3)
    ap.add_argument("--delta", type=float, default=1e-3)
    ap.add_argument("--sample-every", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/planck_limit")
    args = ap.parse_args()

    spec = SweepSpec(
        parameter="kappa",
        values=tuple(float(v) for v in args.values.split(",")),
        benchmark=args.benchmark,
        dim=args.dim,
        points=args.points,
        t_end=args.t_end,
        phys=PhysParams(),
        reg=RegParams(epsilon=args.epsilon, eta=args.eta, delta=args.delta, dt=args.dt, picard_tol=1e-11),
        n_modes=args.modes,
        sample_every=args.sample_every,
        seed=args.seed,
    )
    result = run_sweep(spec, workers=args.workers)

    os.makedirs(args.out, exist_ok=True)
    rows = sweep_rows(result)
    columns = sorted({k for row in rows for k in row})
    csv_path = os.path.join(args.out, "planck_limit.csv")
    with open(csv_path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[c]) if c in row else "" for c in columns) + "\n")

    print(f"{'kappa':>8s} {'d(sqrt_rho u)':>14s} {'d(B)':>12s} {'quantum max':>12s} {'weak/k^2':>10s}")
    for rung in result.rungs:
        print(
            f"{rung.value:8.4f} {rung.distance_to_reference['sqrt_rho_u']:14.6e} "
            f"{rung.distance_to_reference['magnetic']:12.4e} {rung.quantum_energy_max:12.4e} "
            f"{rung.weak_integrals.get('per_kappa_sq', 0.0):10.4f}"
        )
    for key, order in sorted(result.convergence_orders.items()):
        print(f"order[{key}] = {order:.3f}")
    print(f"wrote {csv_path} (sha256 {content_hash(csv_path)[:16]}...)")


if __name__ == "__main__":
    main()
