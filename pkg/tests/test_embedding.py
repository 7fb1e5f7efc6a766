import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from audio_adl.embedding import (
    EmbeddingClip,
    ExtractionError,
    PcaParams,
    StandinExtractor,
    decode_records,
    dequantize,
    encode_records,
    export_records_csv,
    extract,
    fit_pca,
    identity_pca,
    load_records,
    postprocess,
    project,
    read_records,
    write_records,
)
from audio_adl.errors import CorruptionError, FormatError, InvalidParamsError
from audio_adl.frontend import MelPatch
from audio_adl.synthetic import random_clips


def test_standin_is_deterministic(rng):
    patch = MelPatch(rng.standard_normal((96, 64)), 0.0)
    a = extract(patch, StandinExtractor(0))
    b = extract(patch, StandinExtractor(0))
    assert a.shape == (128,)
    assert a.tobytes() == b.tobytes()


def test_standin_is_not_constant():
    ex = StandinExtractor(0)
    one_hot = np.zeros((96, 64))
    one_hot[10, 20] = 1.0
    zero = extract(MelPatch(np.zeros((96, 64)), 0.0), ex)
    hot = extract(MelPatch(one_hot, 0.0), ex)
    assert not np.array_equal(zero, hot)


def test_standin_matches_projection_oracle(rng):
    frames = rng.standard_normal((96, 64))
    # independent: regenerate the matrix and do the dot products by hand
    matrix = np.random.default_rng(7).standard_normal((6144, 128)) / np.sqrt(6144)
    flat = [frames[i // 64, i % 64] for i in range(6144)]
    expected = [np.tanh(sum(flat[i] * matrix[i, j] for i in range(6144))) for j in range(0, 128, 17)]
    got = extract(MelPatch(frames, 0.0), StandinExtractor(7))[::17]
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_extract_wraps_failures():
    def broken(frames):
        raise RuntimeError("boom")

    with pytest.raises(ExtractionError, match="1.92s"):
        extract(MelPatch(np.zeros((96, 64)), 1.92), broken)


def test_extract_checks_patch_shape():
    with pytest.raises(ValueError):
        extract(MelPatch(np.zeros((95, 64)), 0.0), StandinExtractor(0))


def test_quantize_endpoints_and_midpoint():
    pca = identity_pca(-2.0, 2.0)
    raw = np.zeros(128)
    raw[0], raw[1], raw[2] = -2.0, 2.0, 0.0
    raw[3], raw[4] = -7.0, 9.0  # clipped
    codes = postprocess(raw, pca)
    assert codes.dtype == np.uint8
    assert codes[0] == 0 and codes[1] == 255
    assert codes[2] == 128  # 127.5 rounds half up
    assert codes[3] == 0 and codes[4] == 255


def test_dequantize_endpoints():
    pca = identity_pca(-2.0, 2.0)
    assert dequantize(np.uint8(0), pca) == -2.0
    assert dequantize(np.uint8(255), pca) == 2.0


def test_invalid_clip_range():
    with pytest.raises(InvalidParamsError):
        PcaParams(np.zeros(128), np.eye(128), 1.0, 1.0)


@settings(max_examples=100)
@given(hnp.arrays(np.float64, 128, elements=st.floats(-5, 5)), st.floats(0.1, 3.0))
def test_quantization_step_bound(raw, half_range):
    pca = identity_pca(-half_range, half_range)
    back = dequantize(postprocess(raw, pca), pca)
    target = np.clip(raw, -half_range, half_range)
    assert np.max(np.abs(back - target)) <= pca.step / 2 + 1e-12


@given(hnp.arrays(np.uint8, 128))
def test_requantizing_is_stable(codes):
    pca = identity_pca()
    np.testing.assert_array_equal(postprocess(dequantize(codes, pca), pca), codes)


def test_fit_pca_orthonormal_rows(rng):
    raw = rng.standard_normal((500, 128)) @ rng.standard_normal((128, 128))
    pca = fit_pca(raw)
    np.testing.assert_allclose(pca.projection @ pca.projection.T, np.eye(128), atol=1e-6)
    var = ((raw - pca.mean) @ pca.projection.T).var(axis=0)
    assert np.all(np.diff(var) <= 1e-9)  # decreasing variance


def test_postprocess_with_fitted_pca(rng):
    raw = np.tanh(rng.standard_normal((300, 128)))
    pca = fit_pca(raw)
    codes = postprocess(raw, pca)
    assert codes.shape == (300, 128)
    back = dequantize(codes, pca)
    assert np.max(np.abs(back - project(raw, pca))) <= pca.step / 2 + 1e-12


def test_records_empty_round_trip(tmp_path):
    write_records([], tmp_path / "e.adle")
    assert read_records(tmp_path / "e.adle") == []


def test_records_single_clip_round_trip(tmp_path, rng):
    clip = EmbeddingClip("yt:abc", {"Toilet flush", "Rain"}, rng.integers(0, 256, (10, 128), dtype=np.uint8), "s01")
    pca = PcaParams(rng.standard_normal(128), rng.standard_normal((128, 128)), -1.5, 2.5)
    write_records([clip], tmp_path / "one.adle", pca)
    pca_back, clips = load_records(tmp_path / "one.adle")
    assert clips == [clip]
    assert pca_back == pca
    # byte-identical re-encode
    assert encode_records(clips, pca_back) == (tmp_path / "one.adle").read_bytes()


def test_records_flipped_magic(tmp_path, rng):
    clip = EmbeddingClip("c", {"Piano"}, rng.integers(0, 256, (3, 128), dtype=np.uint8))
    data = bytearray(encode_records([clip], identity_pca()))
    data[0] ^= 0xFF
    with pytest.raises(FormatError, match="magic"):
        decode_records(bytes(data))


def test_records_bad_version():
    data = bytearray(encode_records([], identity_pca()))
    data[4:6] = struct.pack("<H", 99)
    with pytest.raises(FormatError, match="version"):
        decode_records(bytes(data))


@pytest.mark.parametrize("cut", [5, 100, 2000, 131000, -1, -129])
def test_records_truncated_reports_offset(rng, cut):
    clip = EmbeddingClip("c", {"Piano"}, rng.integers(0, 256, (3, 128), dtype=np.uint8), "s")
    data = encode_records([clip], identity_pca())
    with pytest.raises(CorruptionError) as info:
        decode_records(data[:cut])
    assert 0 <= info.value.offset <= len(data[:cut])
    assert "byte offset" in str(info.value)


def test_records_trailing_garbage():
    data = encode_records([], identity_pca()) + b"\x00"
    with pytest.raises(CorruptionError):
        decode_records(data)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_records_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    clips = random_clips(rng)
    pca = PcaParams(rng.standard_normal(128), rng.standard_normal((128, 128)), -2.0, float(rng.uniform(-1.9, 5)))
    pca_back, back = decode_records(encode_records(clips, pca))
    assert back == clips
    assert pca_back == pca


def test_clip_validation():
    with pytest.raises(ValueError):
        EmbeddingClip("c", set(), np.zeros((0, 128), dtype=np.uint8))
    with pytest.raises(ValueError):
        EmbeddingClip("c", set(), np.zeros((2, 128)))


def test_csv_export(tmp_path, rng):
    clips = [EmbeddingClip("a", {"Piano"}, rng.integers(0, 256, (2, 128), dtype=np.uint8))]
    export_records_csv(tmp_path / "r.csv", clips)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].split(",")[:4] == ["clip_id", "label", "vector_index", "d0"]
    assert len(lines) == 3
    assert lines[2].split(",")[3] == str(clips[0].vectors[1, 0])
