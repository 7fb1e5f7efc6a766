"""Seeded synthetic embedding data for tests and desk-scale experiments."""

from __future__ import annotations

import numpy as np

from .embedding import EMBEDDING_DIM, EmbeddingClip
from .ontology import NUM_CLASSES, LabeledDataset, LabelMap, table2_counts_by_id


def axis_means(separation: float, n_classes: int = NUM_CLASSES, dim: int = EMBEDDING_DIM) -> np.ndarray:
    """Class ``c`` sits ``separation`` along axis ``c``; all other coordinates are 0."""
    means = np.zeros((n_classes, dim))
    means[np.arange(n_classes), np.arange(n_classes)] = separation
    return means


def gaussian_blobs(counts, separation: float = 4.0, sigma: float = 1.0, seed: int = 0, dim: int = EMBEDDING_DIM):
    """Isotropic Gaussian classes around :func:`axis_means`, rows grouped by class."""
    counts = np.asarray(counts)
    rng = np.random.default_rng(seed)
    means = axis_means(separation * sigma, len(counts), dim)
    labels = np.repeat(np.arange(len(counts)), counts)
    features = means[labels] + sigma * rng.standard_normal((labels.size, dim))
    return LabeledDataset(features, labels)


def table2_fixture(seed: int = 0, dim: int = EMBEDDING_DIM, rank: int = 3, dtype=np.float32) -> LabeledDataset:
    """Rows with the exact per-class counts of the filtered training corpus.

    Every class has its own random 128-dim offset and varies along ``rank``
    randomly chosen coordinate axes, which keeps tree-based exact neighbour
    search fast at half a million rows.
    """
    counts = table2_counts_by_id()
    rng = np.random.default_rng(seed)
    features = np.empty((int(counts.sum()), dim), dtype=dtype)
    labels = np.repeat(np.arange(NUM_CLASSES), counts)
    pos = 0
    for n in counts:
        axes = rng.choice(dim, size=rank, replace=False)
        block = np.repeat(rng.standard_normal((1, dim)) * 4, n, axis=0)
        block[:, axes] += rng.standard_normal((n, rank))
        features[pos : pos + n] = block
        pos += n
    return LabeledDataset(features, labels)


def source_label_for(class_id: int, label_map: LabelMap | None = None) -> str:
    label_map = label_map or LabelMap.default()
    for source, cls in label_map.entries.items():
        if cls.id == class_id:
            return source
    raise KeyError(class_id)


def quantize_unit(values: np.ndarray) -> np.ndarray:
    """Map reals in [-2, 2] to uint8 codes with the default clip range."""
    scaled = (np.clip(values, -2.0, 2.0) + 2.0) / 4.0 * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def synthetic_clips(
    clips_per_class,
    vectors_per_clip: int = 10,
    separation: float = 1.0,
    sigma: float = 0.2,
    seed: int = 0,
    subject_id: str | None = None,
    prefix: str = "clip",
) -> list[EmbeddingClip]:
    """Labelled clips whose dequantized vectors scatter around per-class means.

    Means are :func:`axis_means` centred on zero so they stay inside the
    default [-2, 2] quantization range for separations up to about 3.
    """
    counts = np.broadcast_to(np.asarray(clips_per_class), (NUM_CLASSES,))
    rng = np.random.default_rng(seed)
    means = axis_means(separation) - separation / 2
    label_map = LabelMap.default()
    clips = []
    for c in range(NUM_CLASSES):
        label = source_label_for(c, label_map)
        for j in range(int(counts[c])):
            values = means[c] + sigma * rng.standard_normal((vectors_per_clip, EMBEDDING_DIM))
            clips.append(
                EmbeddingClip(f"{prefix}-{c:02d}-{j:04d}", frozenset({label}), quantize_unit(values), subject_id)
            )
    return clips


def random_clips(rng: np.random.Generator, max_clips: int = 4, max_vectors: int = 12) -> list[EmbeddingClip]:
    """Arbitrary clips for round-trip checks: odd ids, unicode labels, optional subjects."""
    alphabet = list("abcXYZ _-,()é漢😀")
    clips = []
    for i in range(int(rng.integers(0, max_clips + 1))):
        cid = "".join(rng.choice(alphabet, size=int(rng.integers(0, 10))))
        labels = frozenset(
            "".join(rng.choice(alphabet, size=int(rng.integers(0, 8)))) for _ in range(int(rng.integers(0, 4)))
        )
        subject = None if rng.random() < 0.3 else f"s{int(rng.integers(0, 100))}"
        vectors = rng.integers(0, 256, size=(int(rng.integers(1, max_vectors + 1)), EMBEDDING_DIM), dtype=np.uint8)
        clips.append(EmbeddingClip(f"{i}:{cid}", labels, vectors, subject))
    return clips


def skewed_counts(scale: float) -> np.ndarray:
    """Per-class counts proportional to the training corpus, at least 1 each."""
    return np.maximum(1, np.round(table2_counts_by_id() / scale)).astype(np.int64)
