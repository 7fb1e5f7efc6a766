import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from audio_adl.embedding import EmbeddingClip
from audio_adl.ontology import (
    ACTIVITY_CLASSES,
    CLASS_BY_NAME,
    LabeledDataset,
    LabelMap,
    associate,
    class_histogram,
    filter_cooccurrence,
    split_indices,
    split_train_val,
    table2_counts_by_id,
)

TABLE1 = {
    "Bathtub (filling or washing)": ("Bathing/Showering", "Bathroom"),
    "Sink (filling or washing)": ("Washing hands and face", "Bathroom"),
    "Water tap, faucet": ("Washing hands and face", "Bathroom"),
    "Toilet flush": ("Flushing toilet", "Bathroom"),
    "Toothbrush": ("Brushing teeth", "Bathroom"),
    "Electric shaver, electric razor": ("Shavering", "Bathroom"),
    "Chopping (food)": ("Chopping food", "Kitchen"),
    "Frying (food)": ("Frying food", "Kitchen"),
    "Boiling": ("Boiling water", "Kitchen"),
    "Blender": ("Squeezing juice", "Kitchen"),
    "Microwave oven": ("Using microwave oven", "Kitchen"),
    "Television": ("Watching TV", "Living/Bed room"),
    "Piano": ("Listening to music", "Living/Bed room"),
    "Vacuum cleaner": ("Floor cleaning", "Living/Bed room"),
    "Conversation": ("Chatting", "Living/Bed room"),
    "Narration, monologue": ("Chatting", "Living/Bed room"),
    "Walk, footsteps": ("Strolling", "Outdoor"),
    "Wind noise (microphone)": ("Strolling", "Outdoor"),
}


def _clip(labels, n=2):
    return EmbeddingClip("c", labels, np.zeros((n, 128), dtype=np.uint8))


def test_fifteen_classes():
    assert len(ACTIVITY_CLASSES) == 15
    assert [c.id for c in ACTIVITY_CLASSES] == list(range(15))
    assert {c.category for c in ACTIVITY_CLASSES} == {"Bathroom", "Kitchen", "Living/Bed room", "Outdoor"}


def test_default_map_is_table1():
    lm = LabelMap.default()
    assert len(lm) == 18
    for source, (name, category) in TABLE1.items():
        assert lm[source].name == name
        assert lm[source].category == category
    per_class = {}
    for cls in lm.entries.values():
        per_class[cls.name] = per_class.get(cls.name, 0) + 1
    doubles = {k for k, v in per_class.items() if v == 2}
    assert doubles == {"Washing hands and face", "Chatting", "Strolling"}
    assert set(per_class.values()) == {1, 2}
    assert len(per_class) == 15


def test_map_csv_round_trip():
    lm = LabelMap.default()
    assert LabelMap.from_csv_text(lm.to_csv_text()).entries == lm.entries


def test_map_rejects_wrong_category():
    with pytest.raises(ValueError):
        LabelMap.from_csv_text("source_label,activity_name,category\nPiano,Listening to music,Kitchen\n")


@pytest.mark.parametrize(
    "labels,expected",
    [
        ({"Toilet flush"}, {"Flushing toilet"}),
        ({"Water tap, faucet"}, {"Washing hands and face"}),
        ({"Rain"}, set()),
        ({"toilet flush"}, set()),  # exact-string matching only
    ],
)
def test_associate(labels, expected):
    assert {c.name for c in associate(labels, LabelMap.default())} == expected


def test_filter_cooccurrence_examples():
    lm = LabelMap.default()
    clips = [_clip({"Piano", "Television"}), _clip({"Toothbrush"}), _clip({"Piano", "Rain"}), _clip({"Rain"})]
    kept = filter_cooccurrence(clips, lm)
    assert [k.class_id for k in kept] == [CLASS_BY_NAME["Brushing teeth"].id, CLASS_BY_NAME["Listening to music"].id]
    # two source labels of one class are not a co-occurrence
    both = filter_cooccurrence([_clip({"Conversation", "Narration, monologue"})], lm)
    assert [k.class_id for k in both] == [CLASS_BY_NAME["Chatting"].id]


LABEL_POOL = list(TABLE1) + ["Rain", "Dog", "Music", "Speech"]


@settings(max_examples=200)
@given(st.lists(st.sets(st.sampled_from(LABEL_POOL), max_size=5), max_size=20))
def test_filter_keeps_exactly_single_class(label_sets):
    lm = LabelMap.default()
    clips = [_clip(s) for s in label_sets]
    kept = filter_cooccurrence(clips, lm)
    # brute-force recount of mapped classes per clip
    expected = [s for s in label_sets if len({TABLE1[l][0] for l in s if l in TABLE1}) == 1]
    assert [set(k.clip.raw_labels) for k in kept] == expected
    for k in kept:
        names = {TABLE1[l][0] for l in k.clip.raw_labels if l in TABLE1}
        assert names == {ACTIVITY_CLASSES[k.class_id].name}


def test_split_sizes():
    ds = LabeledDataset(np.zeros((100, 2)), np.zeros(100, dtype=int))
    train, val = split_train_val(ds)
    assert (len(train), len(val)) == (90, 10)


def test_split_table2_total():
    train, val = split_indices(519_270, 0.9, 0)
    assert (train.size, val.size) == (467_343, 51_927)


def test_split_deterministic():
    a = split_indices(50, 0.9, 0)
    b = split_indices(50, 0.9, 0)
    np.testing.assert_array_equal(a[0], b[0])
    assert not np.array_equal(a[0], split_indices(50, 0.9, 1)[0])


@pytest.mark.parametrize("n,ratio", [(1, 0.9), (0, 0.9), (10, 0.0), (10, 1.0)])
def test_split_errors(n, ratio):
    with pytest.raises(ValueError):
        split_indices(n, ratio)


@settings(max_examples=100)
@given(st.integers(2, 500), st.floats(0.01, 0.99), st.integers(0, 1000))
def test_split_is_partition(n, ratio, seed):
    train, val = split_indices(n, ratio, seed)
    assert train.size == int(np.floor(ratio * n + 0.5))
    both = np.concatenate([train, val])
    np.testing.assert_array_equal(np.sort(both), np.arange(n))


def test_histogram_table2():
    counts = table2_counts_by_id()
    ds = LabeledDataset(np.zeros((counts.sum(), 1), dtype=np.uint8), np.repeat(np.arange(15), counts))
    hist = class_histogram(ds)
    assert hist[CLASS_BY_NAME["Chatting"].id] == 174_220
    assert hist[CLASS_BY_NAME["Brushing teeth"].id] == 1_230
    assert hist.sum() == 519_270
    assert hist.min() / hist.max() == pytest.approx(0.00706, abs=5e-6)


def test_histogram_empty():
    ds = LabeledDataset(np.zeros((0, 3)), np.zeros(0, dtype=int))
    np.testing.assert_array_equal(class_histogram(ds), np.zeros(15))
