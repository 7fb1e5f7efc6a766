"""Class-weighted accuracy with and without oversampling on skewed synthetic data."""

import argparse
import time

from audio_adl.experiments import imbalance_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--methods", nargs="+", default=["none", "random", "smote"])
    args = parser.parse_args()

    print("seed," + ",".join(args.methods) + ",seconds")
    for seed in args.seeds:
        start = time.perf_counter()
        scores = imbalance_experiment(seed, methods=tuple(args.methods))
        cells = ",".join(f"{scores[m]:.4f}" for m in args.methods)
        print(f"{seed},{cells},{time.perf_counter() - start:.0f}", flush=True)


if __name__ == "__main__":
    main()
