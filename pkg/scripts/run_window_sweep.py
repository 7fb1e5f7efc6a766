"""Weighted F-score against segmentation window on noisy synthetic clips."""

import argparse
import time

from audio_adl.experiments import window_experiment
from audio_adl.segment import SWEEP_WINDOWS


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--windows", type=int, nargs="+", default=list(SWEEP_WINDOWS))
    parser.add_argument("--noise-ratio", type=float, default=2.0, help="noise sigma over class separation")
    args = parser.parse_args()

    print("seed," + ",".join(f"w{w}" for w in args.windows) + ",seconds")
    for seed in args.seeds:
        start = time.perf_counter()
        scores = window_experiment(seed, windows=tuple(args.windows), noise_ratio=args.noise_ratio)
        cells = ",".join(f"{scores[w]:.4f}" for w in args.windows)
        print(f"{seed},{cells},{time.perf_counter() - start:.0f}", flush=True)


if __name__ == "__main__":
    main()
