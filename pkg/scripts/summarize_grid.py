"""Summarize a bench CSV: final trial-mean err_beta per cell and the orderings.

    python3 scripts/summarize_grid.py runs/grid.csv [--median] [--metric err_normal]

Prints one line per cell with every algorithm's final value, then counts how
often each qualitative ordering holds across cells.
"""

import argparse

from ridgekacz import harness


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("--median", action="store_true", help="aggregate with the median")
    ap.add_argument("--metric", default="err_beta",
                    choices=["err_beta", "err_normal", "err_weighted", "noop_count"])
    args = ap.parse_args()

    agg = harness.aggregate(harness.read_csv(args.csv), how="median" if args.median else "mean")
    finals = {k: v[args.metric][-1] for k, v in agg.items()}
    labels = sorted({k[:2] for k in finals})
    cells = sorted({k[2:] for k in finals})

    names = [f"{a}/{i}" if i else a for a, i in labels]
    print("m,n,lambda,sigma_min," + ",".join(names))
    for cell in cells:
        vals = [finals.get(lab + cell, float("nan")) for lab in labels]
        print(",".join(str(c) for c in cell) + "," + ",".join(f"{v:.3e}" for v in vals))

    def get(cell, alg, init=""):
        return finals.get((alg, init) + cell)

    need = [("rk-ridge", ""), ("rgs-ridge", ""), ("iz", "iz0"), ("iz", "iz1")]
    if not all(lab in labels for lab in need):
        return
    rect = [c for c in cells if c[0] != c[1]]
    family = sum((get(c, "rgs-ridge") < get(c, "rk-ridge")) == (c[0] > c[1]) for c in rect)
    tracking = sum((get(c, "iz", "iz1") < get(c, "iz", "iz0")) == (c[0] > c[1]) for c in rect)
    slower = sum(get(c, "iz", "iz0") >= get(c, "rk-ridge") and get(c, "iz", "iz1") >= get(c, "rgs-ridge")
                 for c in cells)
    print(f"\nRGS family faster when m > n, RK when m < n: {family}/{len(rect)} rectangular cells")
    print(f"IZ1 beats IZ0 when m > n, IZ0 when m < n:    {tracking}/{len(rect)} rectangular cells")
    print(f"IZ0 >= RK-ridge and IZ1 >= RGS-ridge:        {slower}/{len(cells)} cells")


if __name__ == "__main__":
    main()
