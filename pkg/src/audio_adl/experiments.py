"""Desk-scale synthetic experiments mirroring the qualitative findings.

* :func:`imbalance_experiment` trains on class sizes proportional to the
  training corpus with and without oversampling, scoring class-weighted
  accuracy on a balanced test set.
* :func:`window_experiment` trains on noisy clips at several segmentation
  windows and scores the weighted F-score on held-out clips.
* :func:`random_guess_accuracy` is the chance floor for 15 classes.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .cnn import TrainConfig, predict_proba, train
from .evaluation import topk_hits, weighted_accuracy, weighted_f_score
from .ontology import NUM_CLASSES, LabeledDataset, split_train_val
from .oversampling import ResampleConfig, oversample
from .segment import apply_scaler, fit_scaler, segment_dataset
from .synthetic import gaussian_blobs, skewed_counts

FAST_TRAIN = TrainConfig(max_epochs=20, patience=3)
# Averaging 10 vectors per instance leaves a tenth of the updates per epoch,
# so the window comparison uses a larger step to train both arms to convergence.
WINDOW_TRAIN = TrainConfig(learning_rate=0.01, max_epochs=20, patience=3)


def fit_and_score(train_ds, val_ds, test_ds, cfg: TrainConfig):
    """Scale on the training side, train, and return (model, test probabilities)."""
    scaler = fit_scaler(train_ds.features)
    model, history = train(
        apply_scaler(train_ds.features, scaler),
        train_ds.labels,
        apply_scaler(val_ds.features, scaler),
        val_ds.labels,
        cfg,
    )
    model.scaler = scaler
    return model, predict_proba(model, apply_scaler(test_ds.features, scaler)), history


def imbalance_experiment(
    seed: int = 0,
    scale: float = 400.0,
    separation: float = 2.5,
    test_per_class: int = 40,
    methods=("none", "random"),
    cfg: TrainConfig = FAST_TRAIN,
) -> dict:
    """Class-weighted top-1 accuracy per oversampling method."""
    data_seed = 1000 + seed
    ds = gaussian_blobs(skewed_counts(scale), separation, seed=data_seed)
    test = gaussian_blobs(np.full(NUM_CLASSES, test_per_class), separation, seed=data_seed + 500)
    train_ds, val_ds = split_train_val(ds, 0.9, seed)
    scores = {}
    for method in methods:
        balanced = oversample(train_ds, ResampleConfig(method=method, seed=seed))
        _, probs, _ = fit_and_score(balanced, val_ds, test, replace(cfg, seed=seed))
        scores[method] = weighted_accuracy(test.labels, topk_hits(probs, test.labels, 1))
    return scores


def sign_code_means(separation: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.choice([-0.5, 0.5], size=(NUM_CLASSES, 128)) * separation


def noisy_clip_dataset(means, n_clips_per_class, vectors_per_clip, noise, seed) -> LabeledDataset:
    """Rows grouped into clips; every vector is its class mean plus i.i.d. noise.

    With :func:`sign_code_means`, two classes differ by exactly the
    separation on every coordinate where their codes disagree.
    """
    rng = np.random.default_rng(seed)
    clip_labels = np.repeat(np.arange(NUM_CLASSES), n_clips_per_class)
    labels = np.repeat(clip_labels, vectors_per_clip)
    groups = np.repeat(np.arange(clip_labels.size), vectors_per_clip)
    features = means[labels] + noise * rng.standard_normal((labels.size, 128))
    return LabeledDataset(features, labels, groups)


def window_experiment(
    seed: int = 0,
    windows=(1, 10),
    separation: float = 1.0,
    noise_ratio: float = 2.0,
    clips_per_class: int = 20,
    test_clips_per_class: int = 10,
    vectors_per_clip: int = 20,
    cfg: TrainConfig = WINDOW_TRAIN,
) -> dict:
    """Weighted F-score per window size.

    ``separation`` is the per-coordinate gap between class means and the
    per-coordinate noise standard deviation is ``noise_ratio * separation``.
    """
    data_seed = 2000 + seed
    noise = noise_ratio * separation
    means = sign_code_means(separation, data_seed)
    ds = noisy_clip_dataset(means, clips_per_class, vectors_per_clip, noise, data_seed + 1)
    test = noisy_clip_dataset(means, test_clips_per_class, vectors_per_clip, noise, data_seed + 500)
    n_clips = clips_per_class * NUM_CLASSES
    order = np.random.default_rng(seed).permutation(n_clips)
    n_train = int(np.floor(0.9 * n_clips + 0.5))
    train_rows = np.isin(ds.groups, order[:n_train])
    scores = {}
    for w in windows:
        train_seg = segment_dataset(ds.subset(train_rows), w)
        val_seg = segment_dataset(ds.subset(~train_rows), w)
        test_seg = segment_dataset(test, w)
        _, probs, _ = fit_and_score(train_seg, val_seg, test_seg, replace(cfg, seed=seed))
        scores[w] = weighted_f_score(probs.argmax(axis=1), test_seg.labels)
    return scores


def random_guess_accuracy(n: int = 100_000, seed: int = 0, k: int = 1) -> float:
    """Top-k accuracy of a predictor that ranks classes uniformly at random."""
    rng = np.random.default_rng(seed)
    truths = rng.integers(0, NUM_CLASSES, n)
    ranked = np.argsort(rng.random((n, NUM_CLASSES)), axis=1)[:, :k]
    return float((ranked == truths[:, None]).any(axis=1).mean())
