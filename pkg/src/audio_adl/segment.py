"""Non-overlapping window averaging of embedding sequences and min-max scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ontology import LabeledDataset

DEFAULT_WINDOW = 10
SWEEP_WINDOWS = (1, 3, 5, 10, 15)


def segment_average(vectors: np.ndarray, window: int) -> np.ndarray:
    """Mean of each full window of ``window`` consecutive rows; the remainder is dropped."""
    if window < 1:
        raise ValueError(f"window must be a positive integer, got {window}")
    vectors = np.asarray(vectors, dtype=np.float64)
    n = vectors.shape[0] // window
    return vectors[: n * window].reshape(n, window, *vectors.shape[1:]).mean(axis=1)


@dataclass(frozen=True, eq=False)
class ScalerParams:
    minimum: np.ndarray
    maximum: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, ScalerParams):
            return NotImplemented
        return np.array_equal(self.minimum, other.minimum) and np.array_equal(
            self.maximum, other.maximum
        )


def fit_scaler(features: np.ndarray) -> ScalerParams:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError("fit_scaler needs a non-empty 2-D feature array")
    return ScalerParams(features.min(axis=0), features.max(axis=0))


def apply_scaler(features: np.ndarray, params: ScalerParams, clamp: bool = True) -> np.ndarray:
    """``(x - min) / (max - min)``; constant dimensions map to 0, results clamp to [0, 1]."""
    x = np.asarray(features, dtype=np.float64)
    span = params.maximum - params.minimum
    degenerate = span <= 0
    scaled = (x - params.minimum) / np.where(degenerate, 1.0, span)
    scaled = np.where(degenerate, 0.0, scaled)
    if clamp:
        np.clip(scaled, 0.0, 1.0, out=scaled)
    return scaled


@dataclass
class SegmentSet:
    """Classifier instances with provenance; ``labels`` is -1 for unlabeled data."""

    features: np.ndarray
    labels: np.ndarray
    clip_ids: list
    subject_ids: list
    start_index: np.ndarray  # first source vector of each window within its clip

    def __len__(self):
        return self.labels.shape[0]


def segment_clips(sequences, window: int) -> SegmentSet:
    """Segment each clip independently.

    ``sequences`` yields ``(vectors, class_id, clip_id, subject_id)``; windows
    never span two clips.
    """
    feats, labels, clip_ids, subjects, starts = [], [], [], [], []
    for vectors, class_id, clip_id, subject_id in sequences:
        avg = segment_average(vectors, window)
        feats.append(avg)
        labels.extend([class_id] * len(avg))
        clip_ids.extend([clip_id] * len(avg))
        subjects.extend([subject_id] * len(avg))
        starts.extend(range(0, len(avg) * window, window))
    dim = feats[0].shape[1] if feats else 128
    features = np.concatenate(feats) if feats else np.zeros((0, dim))
    return SegmentSet(
        features,
        np.asarray(labels, dtype=np.int64),
        clip_ids,
        subjects,
        np.asarray(starts, dtype=np.int64),
    )


def segment_dataset(ds: LabeledDataset, window: int) -> LabeledDataset:
    """Window-average a row dataset, grouping rows by their source clip.

    Rows with a non-negative group id are windowed within their group in
    row order.  Generated rows (group -1) form one pseudo-clip per class, in
    generation order.
    """
    groups = ds.groups if ds.groups is not None else np.zeros(len(ds), dtype=np.int64)
    feats, labels = [], []
    real = groups >= 0
    if real.any():
        g = groups[real]
        rows = np.flatnonzero(real)
        # groups in order of first appearance, rows in order within a group
        _, first, ids = np.unique(g, return_index=True, return_inverse=True)
        rank = np.argsort(np.argsort(first, kind="stable"), kind="stable")
        order = np.argsort(rank[ids], kind="stable")
        rows, ids = rows[order], ids[order]
        bounds = np.flatnonzero(np.diff(ids)) + 1
        for chunk in np.split(rows, bounds):
            label_set = np.unique(ds.labels[chunk])
            if label_set.size != 1:
                raise ValueError("a source clip carries more than one class")
            avg = segment_average(ds.features[chunk], window)
            feats.append(avg)
            labels.append(np.full(len(avg), label_set[0]))
    synthetic = np.flatnonzero(~real)
    for c in np.unique(ds.labels[synthetic]):
        chunk = synthetic[ds.labels[synthetic] == c]
        avg = segment_average(ds.features[chunk], window)
        feats.append(avg)
        labels.append(np.full(len(avg), c))
    dim = ds.features.shape[1]
    if not feats:
        return LabeledDataset(np.zeros((0, dim)), np.zeros(0, dtype=np.int64))
    return LabeledDataset(np.concatenate(feats), np.concatenate(labels))
