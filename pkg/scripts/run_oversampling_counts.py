"""Balance a fixture with the training corpus's class counts and print the result."""

import argparse
import time

import numpy as np

from audio_adl.ontology import CLASS_NAMES
from audio_adl.oversampling import random_oversample, smote
from audio_adl.synthetic import table2_fixture


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--neighbors", choices=["brute", "kdtree"], default="kdtree")
    args = parser.parse_args()

    ds = table2_fixture(seed=args.seed)
    before = np.bincount(ds.labels)
    start = time.perf_counter()
    after_random = np.bincount(random_oversample(ds, seed=args.seed).labels)
    t_random = time.perf_counter() - start
    start = time.perf_counter()
    after_smote = np.bincount(smote(ds, k=5, seed=args.seed, neighbors=args.neighbors).labels)
    t_smote = time.perf_counter() - start

    print(f"{'class':<32}{'before':>10}{'random':>10}{'smote':>10}")
    for c, name in enumerate(CLASS_NAMES):
        print(f"{name:<32}{before[c]:>10}{after_random[c]:>10}{after_smote[c]:>10}")
    print(f"{'total':<32}{before.sum():>10}{after_random.sum():>10}{after_smote.sum():>10}")
    print(f"random {t_random:.1f}s, smote ({args.neighbors}) {t_smote:.1f}s")


if __name__ == "__main__":
    main()
