"""Train the full-size network on 15 separable Gaussian blobs and print the epoch log."""

import argparse

import numpy as np

from audio_adl.cnn import TrainConfig, train
from audio_adl.ontology import NUM_CLASSES, split_train_val
from audio_adl.segment import apply_scaler, fit_scaler
from audio_adl.synthetic import gaussian_blobs


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--per-class", type=int, default=500)
    parser.add_argument("--separation", type=float, default=4.0, help="in units of sigma")
    parser.add_argument("--seed", type=int, default=4)
    args = parser.parse_args()

    ds = gaussian_blobs(np.full(NUM_CLASSES, args.per_class), separation=args.separation, seed=args.seed)
    tr, va = split_train_val(ds, 0.9, seed=0)
    scaler = fit_scaler(tr.features)
    train(
        apply_scaler(tr.features, scaler), tr.labels,
        apply_scaler(va.features, scaler), va.labels,
        TrainConfig(),
        log=lambda r: print(f"epoch {r.epoch:2d} loss {r.train_loss:.4f} val_loss {r.val_loss:.4f} val_acc {r.val_accuracy:.4f}", flush=True),
    )


if __name__ == "__main__":
    main()
