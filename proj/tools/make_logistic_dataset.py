"""Regenerates data/logistic_n20_m200.csv (seeded, deterministic)."""

import argparse
import pathlib

import numpy as np


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--features", type=int, default=20)
    parser.add_argument("--samples", type=int, default=200)
    parser.add_argument("--seed", type=int, default=20240611)
    parser.add_argument("--out", type=pathlib.Path,
                        default=pathlib.Path(__file__).resolve().parent.parent / "data" / "logistic_n20_m200.csv")
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    n, m = args.features, args.samples
    a = rng.standard_normal((m, n)) / np.sqrt(n)
    w = rng.standard_normal(n) * 2.0
    p = 1.0 / (1.0 + np.exp(-a @ w))
    y = np.where(rng.random(m) < p, 1, 0)

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w") as f:
        f.write(f"# synthetic logistic regression data: {m} samples x {n} features, labels in {{0,1}}\n")
        f.write(f"# generated by tools/make_logistic_dataset.py --seed {args.seed}\n")
        for row, label in zip(a, y):
            f.write(",".join(f"{v:.10f}" for v in row) + f",{label}\n")


if __name__ == "__main__":
    main()
