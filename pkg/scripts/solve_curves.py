"""Run every ridge algorithm once on a single generated instance and print
err_beta every `--every` iterations side by side, with the theory bound for
the two ridge solvers' weighted errors.

    python3 scripts/solve_curves.py --m 400 --n 40 --sigma-min 0.1 --lambda 0.01
"""

import argparse

from ridgekacz import densela, harness, problems, theory
from ridgekacz.solvers import IZInit, SolverKind

ALGS = [(SolverKind.RGSRidge, None), (SolverKind.RKRidge, None),
        (SolverKind.IZ, IZInit.IZ0), (SolverKind.IZ, IZInit.IZ1),
        (SolverKind.IZ, IZInit.IZMIX), (SolverKind.IZ, IZInit.IZRND)]


def main():
    ap = argparse.ArgumentParser(description="side-by-side err_beta curves on one instance")
    ap.add_argument("--m", type=int, default=400)
    ap.add_argument("--n", type=int, default=40)
    ap.add_argument("--sigma-min", type=float, default=0.1)
    ap.add_argument("--lambda", dest="lam", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iters", type=int, default=5000)
    ap.add_argument("--every", type=int, default=500)
    args = ap.parse_args()

    p = problems.generate(args.m, args.n, args.sigma_min, args.lam, args.seed)
    cell = (p.m, p.n, p.lam, p.sigma_min)
    curves = {}
    for kind, init in ALGS:
        label = harness.algorithm_label(kind, init)
        seed = harness.solver_seed(args.seed, cell, 0, label)
        recs = harness.run_algorithm(p, kind, init, seed, args.iters, args.every, metrics=["err_beta"])
        curves[label] = [r.err_beta for r in recs]

    spectrum = densela.singular_values(p.X)
    for kind in (SolverKind.RGSRidge, SolverKind.RKRidge):
        b = theory.contraction_factor(kind, p.m, p.n, p.lam, spectrum)
        print(f"# {kind.value} factor {b.factor:.6f} -> bound after {args.iters} steps "
              f"{b.factor ** args.iters:.3e} x initial weighted error")
    labels = list(curves)
    print("iteration," + ",".join(labels))
    for row, it in enumerate(range(0, args.iters + 1, args.every)):
        print(f"{it}," + ",".join(f"{curves[lab][row]:.3e}" for lab in labels))


if __name__ == "__main__":
    main()
