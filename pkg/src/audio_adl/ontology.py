"""Activity classes, source-label association and labeled datasets."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .embedding import EmbeddingClip

NUM_CLASSES = 15


@dataclass(frozen=True)
class ActivityClass:
    id: int
    name: str
    category: str


ACTIVITY_CLASSES = tuple(
    ActivityClass(i, name, category)
    for i, (name, category) in enumerate(
        [
            ("Bathing/Showering", "Bathroom"),
            ("Washing hands and face", "Bathroom"),
            ("Flushing toilet", "Bathroom"),
            ("Brushing teeth", "Bathroom"),
            ("Shavering", "Bathroom"),
            ("Chopping food", "Kitchen"),
            ("Frying food", "Kitchen"),
            ("Boiling water", "Kitchen"),
            ("Squeezing juice", "Kitchen"),
            ("Using microwave oven", "Kitchen"),
            ("Watching TV", "Living/Bed room"),
            ("Listening to music", "Living/Bed room"),
            ("Floor cleaning", "Living/Bed room"),
            ("Chatting", "Living/Bed room"),
            ("Strolling", "Outdoor"),
        ]
    )
)
CLASS_BY_NAME = {c.name: c for c in ACTIVITY_CLASSES}
CLASS_NAMES = tuple(c.name for c in ACTIVITY_CLASSES)

# Embedding vectors per class in the filtered training corpus.
TABLE2_COUNTS = {
    "Chatting": 174_220,
    "Listening to music": 115_200,
    "Strolling": 81_450,
    "Watching TV": 22_250,
    "Flushing toilet": 22_190,
    "Floor cleaning": 19_710,
    "Washing hands and face": 17_080,
    "Frying food": 15_820,
    "Bathing/Showering": 14_270,
    "Squeezing juice": 12_600,
    "Shavering": 8_570,
    "Using microwave oven": 8_180,
    "Boiling water": 4_440,
    "Chopping food": 2_060,
    "Brushing teeth": 1_230,
}


def table2_counts_by_id() -> np.ndarray:
    return np.array([TABLE2_COUNTS[name] for name in CLASS_NAMES], dtype=np.int64)


class LabelMap:
    """Exact-string mapping from source ontology labels to activity classes."""

    def __init__(self, entries: dict[str, ActivityClass]):
        self.entries = dict(entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, label: str) -> ActivityClass:
        return self.entries[label]

    def __contains__(self, label):
        return label in self.entries

    @classmethod
    def from_csv_text(cls, text: str) -> "LabelMap":
        reader = csv.DictReader(io.StringIO(text))
        missing = {"source_label", "activity_name", "category"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"label map CSV lacks columns {sorted(missing)}")
        entries = {}
        for row in reader:
            source = row["source_label"]
            try:
                cls_ = CLASS_BY_NAME[row["activity_name"]]
            except KeyError:
                raise ValueError(f"unknown activity {row['activity_name']!r}") from None
            if cls_.category != row["category"]:
                raise ValueError(
                    f"{row['activity_name']!r} belongs to {cls_.category!r}, not {row['category']!r}"
                )
            if source in entries and entries[source] != cls_:
                raise ValueError(f"source label {source!r} mapped to two classes")
            entries[source] = cls_
        return cls(entries)

    @classmethod
    def from_csv(cls, path) -> "LabelMap":
        with open(path, newline="", encoding="utf-8") as fh:
            return cls.from_csv_text(fh.read())

    @classmethod
    def default(cls) -> "LabelMap":
        text = resources.files("audio_adl").joinpath("data/label_map.csv").read_text("utf-8")
        return cls.from_csv_text(text)

    def to_csv_text(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["source_label", "activity_name", "category"])
        for source, cls_ in self.entries.items():
            writer.writerow([source, cls_.name, cls_.category])
        return out.getvalue()


def associate(raw_labels: Iterable[str], label_map: LabelMap) -> set[ActivityClass]:
    return {label_map[label] for label in raw_labels if label in label_map}


@dataclass(frozen=True)
class LabeledClip:
    clip: EmbeddingClip
    class_id: int


def filter_cooccurrence(clips: Iterable[EmbeddingClip], label_map: LabelMap) -> list[LabeledClip]:
    """Keep clips whose labels name exactly one target activity.

    Non-target labels are ignored; two target activities on one clip
    disqualify it.
    """
    kept = []
    for clip in clips:
        classes = associate(clip.raw_labels, label_map)
        if len(classes) == 1:
            kept.append(LabeledClip(clip, next(iter(classes)).id))
    return kept


@dataclass
class LabeledDataset:
    """Feature rows with class ids; ``groups`` records the source clip of each row."""

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels differ in length")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES):
            raise ValueError("class ids must lie in 0..14")
        if self.groups is not None:
            self.groups = np.asarray(self.groups, dtype=np.int64)
            if self.groups.shape != self.labels.shape:
                raise ValueError("groups and labels differ in length")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def class_counts(self) -> np.ndarray:
        return class_histogram(self)

    def subset(self, index) -> "LabeledDataset":
        groups = None if self.groups is None else self.groups[index]
        return LabeledDataset(self.features[index], self.labels[index], groups)


def class_histogram(ds: LabeledDataset) -> np.ndarray:
    return np.bincount(ds.labels, minlength=NUM_CLASSES).astype(np.int64)


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_indices(n: int, ratio: float = 0.9, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Seeded permutation cut into ``round(ratio * n)`` train and the rest val."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    if n < 2:
        raise ValueError(f"need at least 2 items to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_train = round_half_up(ratio * n)
    return order[:n_train], order[n_train:]


def split_train_val(
    ds: LabeledDataset, ratio: float = 0.9, seed: int = 0
) -> tuple[LabeledDataset, LabeledDataset]:
    train_idx, val_idx = split_indices(len(ds), ratio, seed)
    return ds.subset(train_idx), ds.subset(val_idx)


def dataset_from_clips(
    labeled: Sequence[LabeledClip], decode=None
) -> LabeledDataset:
    """Stack every vector of every clip; ``decode`` maps uint8 codes to floats."""
    if not labeled:
        return LabeledDataset(np.zeros((0, 128)), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    feats, labels, groups = [], [], []
    for g, item in enumerate(labeled):
        vecs = item.clip.vectors if decode is None else decode(item.clip.vectors)
        feats.append(vecs)
        labels.append(np.full(len(vecs), item.class_id))
        groups.append(np.full(len(vecs), g))
    return LabeledDataset(np.concatenate(feats), np.concatenate(labels), np.concatenate(groups))
