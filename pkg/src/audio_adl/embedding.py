"""128-dim quantized embeddings and the ``.adle`` record file format.

Record layout (little-endian)::

    b"ADLE"  u16 version
    f64 mean[128]  f64 projection[128*128] (row-major)  f64 clip_min  f64 clip_max
    u32 clip_count
    per clip:
        u32 len, utf-8 clip_id
        u32 label_count, then per label: u32 len, utf-8 label   (sorted)
        u8 has_subject, [u32 len, utf-8 subject_id]
        u32 vector_count, vector_count * 128 raw bytes
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import CorruptionError, FormatError, InvalidParamsError
from .frontend import MelPatch

EMBEDDING_DIM = 128
PATCH_SHAPE = (96, 64)
RECORD_MAGIC = b"ADLE"
RECORD_VERSION = 1


@dataclass(frozen=True, eq=False)
class PcaParams:
    mean: np.ndarray  # (128,)
    projection: np.ndarray  # (128, 128), rows are principal directions
    clip_min: float = -2.0
    clip_max: float = 2.0

    def __post_init__(self):
        if not self.clip_max > self.clip_min:
            raise InvalidParamsError(
                f"clip_max ({self.clip_max}) must exceed clip_min ({self.clip_min})"
            )
        if np.shape(self.mean) != (EMBEDDING_DIM,) or np.shape(self.projection) != (
            EMBEDDING_DIM,
            EMBEDDING_DIM,
        ):
            raise InvalidParamsError("PCA mean must be (128,) and projection (128, 128)")

    @property
    def step(self) -> float:
        return (self.clip_max - self.clip_min) / 255.0

    def __eq__(self, other):
        if not isinstance(other, PcaParams):
            return NotImplemented
        return (
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.projection, other.projection)
            and self.clip_min == other.clip_min
            and self.clip_max == other.clip_max
        )


def identity_pca(clip_min: float = -2.0, clip_max: float = 2.0) -> PcaParams:
    return PcaParams(np.zeros(EMBEDDING_DIM), np.eye(EMBEDDING_DIM), clip_min, clip_max)


def fit_pca(raw: np.ndarray, clip_min: float = -2.0, clip_max: float = 2.0) -> PcaParams:
    """PCA from a sample of raw embeddings via covariance eigendecomposition.

    Rows of the projection are unit eigenvectors in decreasing eigenvalue
    order, each signed so its largest-magnitude entry is positive.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] != EMBEDDING_DIM or raw.shape[0] < 2:
        raise InvalidParamsError("fit_pca needs at least two 128-dim raw embeddings")
    mean = raw.mean(axis=0)
    cov = np.cov(raw - mean, rowvar=False)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    rows = eigvecs[:, order].T
    signs = np.sign(rows[np.arange(EMBEDDING_DIM), np.abs(rows).argmax(axis=1)])
    return PcaParams(mean, rows * signs[:, None], clip_min, clip_max)


class EmbeddingExtractor(Protocol):
    def __call__(self, frames: np.ndarray) -> np.ndarray:
        """Map a (96, 64) log-mel patch to 128 finite reals."""


class StandinExtractor:
    """Seeded random projection of the flattened patch followed by ``tanh``.

    Deterministic and shape-correct, but not acoustically meaningful: it
    stands in for a pretrained network that this package does not ship.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        rng = np.random.default_rng(seed)
        n_in = PATCH_SHAPE[0] * PATCH_SHAPE[1]
        self.weights = rng.standard_normal((n_in, EMBEDDING_DIM)) / np.sqrt(n_in)

    def __call__(self, frames: np.ndarray) -> np.ndarray:
        return np.tanh(np.asarray(frames, dtype=np.float64).reshape(-1) @ self.weights)


class ExtractionError(RuntimeError):
    def __init__(self, start_time, cause):
        super().__init__(f"extractor failed on patch at {start_time:.2f}s: {cause}")
        self.start_time = start_time


def extract(patch: MelPatch, extractor: EmbeddingExtractor) -> np.ndarray:
    frames = np.asarray(patch.frames)
    if frames.shape != PATCH_SHAPE:
        raise ValueError(f"patch must be {PATCH_SHAPE}, got {frames.shape}")
    try:
        raw = np.asarray(extractor(frames), dtype=np.float64)
    except Exception as exc:
        raise ExtractionError(patch.start_time, exc) from exc
    if raw.shape != (EMBEDDING_DIM,) or not np.all(np.isfinite(raw)):
        raise ExtractionError(patch.start_time, "output is not 128 finite values")
    return raw


def project(raw: np.ndarray, pca: PcaParams) -> np.ndarray:
    """PCA output clipped to the quantization range, before rounding."""
    y = (np.asarray(raw, dtype=np.float64) - pca.mean) @ pca.projection.T
    return np.clip(y, pca.clip_min, pca.clip_max)


def postprocess(raw: np.ndarray, pca: PcaParams) -> np.ndarray:
    """Project, clip and quantize to uint8 codes (round half up).

    Accepts a single vector or a stack of them along the first axis.
    """
    y = project(raw, pca)
    scaled = (y - pca.clip_min) / (pca.clip_max - pca.clip_min) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def dequantize(codes: np.ndarray, pca: PcaParams) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.float64)
    return pca.clip_min + codes / 255.0 * (pca.clip_max - pca.clip_min)


@dataclass(eq=False)
class EmbeddingClip:
    clip_id: str
    raw_labels: frozenset[str]
    vectors: np.ndarray  # (n, 128) uint8
    subject_id: str | None = None

    def __post_init__(self):
        self.raw_labels = frozenset(self.raw_labels)
        self.vectors = np.asarray(self.vectors)
        if self.vectors.dtype != np.uint8:
            raise ValueError("embedding vectors must be uint8 codes")
        if self.vectors.ndim != 2 or self.vectors.shape[1] != EMBEDDING_DIM:
            raise ValueError(f"clip {self.clip_id!r}: vectors must be (n, 128)")
        if self.vectors.shape[0] == 0:
            raise ValueError(f"clip {self.clip_id!r} has no vectors")

    def __eq__(self, other):
        if not isinstance(other, EmbeddingClip):
            return NotImplemented
        return (
            self.clip_id == other.clip_id
            and self.raw_labels == other.raw_labels
            and self.subject_id == other.subject_id
            and np.array_equal(self.vectors, other.vectors)
        )

    def __len__(self):
        return self.vectors.shape[0]


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def encode_records(clips: Sequence[EmbeddingClip], pca: PcaParams) -> bytes:
    parts = [
        RECORD_MAGIC,
        struct.pack("<H", RECORD_VERSION),
        np.asarray(pca.mean, dtype="<f8").tobytes(),
        np.asarray(pca.projection, dtype="<f8").tobytes(),
        struct.pack("<dd", pca.clip_min, pca.clip_max),
        struct.pack("<I", len(clips)),
    ]
    for clip in clips:
        parts.append(_pack_str(clip.clip_id))
        labels = sorted(clip.raw_labels)
        parts.append(struct.pack("<I", len(labels)))
        parts.extend(_pack_str(label) for label in labels)
        if clip.subject_id is None:
            parts.append(b"\x00")
        else:
            parts.append(b"\x01" + _pack_str(clip.subject_id))
        parts.append(struct.pack("<I", len(clip)))
        parts.append(np.ascontiguousarray(clip.vectors, dtype=np.uint8).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptionError(
                f"truncated record: need {n} bytes for {what}, "
                f"{len(self.data) - self.pos} left",
                self.pos,
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def string(self, what: str) -> str:
        start = self.pos
        raw = self.take(self.u32(what), what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptionError(f"invalid utf-8 in {what}", start) from exc


def decode_records(data: bytes) -> tuple[PcaParams, list[EmbeddingClip]]:
    if data[:4] != RECORD_MAGIC:
        raise FormatError("not an .adle record file (bad magic)")
    r = _Reader(data)
    r.take(4, "magic")
    (version,) = struct.unpack("<H", r.take(2, "version"))
    if version != RECORD_VERSION:
        raise FormatError(f"unsupported .adle version {version}")
    mean = np.frombuffer(r.take(8 * EMBEDDING_DIM, "PCA mean"), dtype="<f8").astype(np.float64)
    proj = np.frombuffer(r.take(8 * EMBEDDING_DIM**2, "PCA projection"), dtype="<f8")
    proj = proj.astype(np.float64).reshape(EMBEDDING_DIM, EMBEDDING_DIM)
    offset = r.pos
    clip_min, clip_max = struct.unpack("<dd", r.take(16, "clip range"))
    try:
        pca = PcaParams(mean, proj, clip_min, clip_max)
    except InvalidParamsError as exc:
        raise CorruptionError(str(exc), offset) from exc
    count = r.u32("clip count")
    clips = []
    for i in range(count):
        clip_id = r.string(f"clip {i} id")
        labels = [r.string(f"clip {i} label") for _ in range(r.u32(f"clip {i} label count"))]
        flag_pos = r.pos
        flag = r.take(1, f"clip {i} subject flag")
        if flag == b"\x00":
            subject = None
        elif flag == b"\x01":
            subject = r.string(f"clip {i} subject id")
        else:
            raise CorruptionError(f"clip {i}: bad subject flag {flag!r}", flag_pos)
        n_pos = r.pos
        n = r.u32(f"clip {i} vector count")
        if n == 0:
            raise CorruptionError(f"clip {i} declares zero vectors", n_pos)
        payload = r.take(n * EMBEDDING_DIM, f"clip {i} vectors")
        vectors = np.frombuffer(payload, dtype=np.uint8).reshape(n, EMBEDDING_DIM).copy()
        clips.append(EmbeddingClip(clip_id, frozenset(labels), vectors, subject))
    if r.pos != len(data):
        raise CorruptionError(f"{len(data) - r.pos} trailing bytes after last clip", r.pos)
    return pca, clips


def write_records(clips: Iterable[EmbeddingClip], path, pca: PcaParams | None = None) -> None:
    data = encode_records(list(clips), pca if pca is not None else identity_pca())
    Path(path).write_bytes(data)


def load_records(path) -> tuple[PcaParams, list[EmbeddingClip]]:
    return decode_records(Path(path).read_bytes())


def read_records(path) -> list[EmbeddingClip]:
    return load_records(path)[1]


def export_records_csv(path, clips: Sequence[EmbeddingClip]) -> None:
    """Flat export: clip_id, label (';'-joined raw labels), vector_index, d0..d127."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clip_id", "label", "vector_index"] + [f"d{i}" for i in range(EMBEDDING_DIM)])
        for clip in clips:
            label = ";".join(sorted(clip.raw_labels))
            for j, vec in enumerate(clip.vectors):
                writer.writerow([clip.clip_id, label, j, *vec.tolist()])
