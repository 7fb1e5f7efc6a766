"""End-to-end stages shared by the command line and the experiment scripts."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import cnn
from .config import PipelineConfig
from .embedding import (
    EmbeddingClip,
    PcaParams,
    StandinExtractor,
    dequantize,
    extract,
    identity_pca,
    postprocess,
)
from .errors import SchemaError, TooShortError
from .evaluation import EvalReport, evaluate
from .frontend import FrontendConfig, frame_examples, load_wav, log_mel_spectrogram, resample_mono
from .ontology import CLASS_NAMES, NUM_CLASSES, LabelMap, dataset_from_clips, filter_cooccurrence, split_indices
from .oversampling import oversample
from .segment import apply_scaler, fit_scaler, segment_average, segment_clips, segment_dataset

log = logging.getLogger(__name__)


def embed_wav(
    path,
    extractor=None,
    pca: PcaParams | None = None,
    frontend: FrontendConfig = FrontendConfig(),
):
    """WAV file -> (uint8 codes of shape (n, 128), patch start times)."""
    extractor = extractor or StandinExtractor(0)
    pca = pca or identity_pca()
    signal = resample_mono(load_wav(path), frontend.sample_rate)
    patches = frame_examples(log_mel_spectrogram(signal, frontend), frontend)
    if not patches:
        return np.zeros((0, 128), dtype=np.uint8), np.zeros(0)
    raw = np.stack([extract(p, extractor) for p in patches])
    return postprocess(raw, pca), np.array([p.start_time for p in patches])


@dataclass
class PreparedData:
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    scaler: object
    train_counts_before: np.ndarray
    train_counts_after: np.ndarray


def prepare_training(clips: Sequence[EmbeddingClip], pca: PcaParams, cfg: PipelineConfig, label_map=None):
    """Filter labels, split clips 90/10, oversample the training side, segment and scale."""
    label_map = label_map or LabelMap.default()
    labeled = filter_cooccurrence(clips, label_map)
    classes = {item.class_id for item in labeled}
    if len(classes) < 2:
        raise SchemaError(
            f"training needs at least two activity classes, found {len(classes)} "
            f"among {len(clips)} clip(s)"
        )
    train_idx, val_idx = split_indices(len(labeled), cfg.split_ratio, cfg.split_seed)
    decode = lambda codes: dequantize(codes, pca)
    train_rows = dataset_from_clips([labeled[i] for i in sorted(train_idx)], decode)
    val_rows = dataset_from_clips([labeled[i] for i in sorted(val_idx)], decode)
    before = train_rows.class_counts
    balanced = oversample(train_rows, cfg.resample)
    train_seg = segment_dataset(balanced, cfg.window)
    val_seg = segment_dataset(val_rows, cfg.window)
    if len(train_seg) == 0 or len(val_seg) == 0:
        raise TooShortError(
            f"window {cfg.window} leaves {len(train_seg)} training and {len(val_seg)} "
            "validation instances; clips are too short"
        )
    scaler = fit_scaler(train_seg.features)
    return PreparedData(
        apply_scaler(train_seg.features, scaler),
        train_seg.labels,
        apply_scaler(val_seg.features, scaler),
        val_seg.labels,
        scaler,
        before,
        balanced.class_counts,
    )


def train_from_clips(clips, pca: PcaParams, cfg: PipelineConfig, label_map=None, epoch_log=None):
    data = prepare_training(clips, pca, cfg, label_map)
    log.info(
        "training on %d instances (%d validation), window %d, resample %s",
        len(data.train_y), len(data.val_y), cfg.window, cfg.resample.method,
    )
    model, history = cnn.train(data.train_x, data.train_y, data.val_x, data.val_y, cfg.train, log=epoch_log)
    model.scaler = data.scaler
    model.window = cfg.window
    return model, history


def check_model(model: cnn.CnnModel) -> None:
    if model.arch.n_classes != NUM_CLASSES or model.arch.input_length != 128:
        raise SchemaError(
            f"checkpoint predicts {model.arch.n_classes} classes from {model.arch.input_length} "
            f"inputs; expected {NUM_CLASSES} from 128"
        )
    if model.scaler is None:
        raise SchemaError("checkpoint carries no feature scaler")


def segment_labeled_clips(clips, pca: PcaParams, window: int, label_map=None, subject: str | None = None):
    label_map = label_map or LabelMap.default()
    labeled = filter_cooccurrence(clips, label_map)
    return segment_clips(
        (
            (
                dequantize(item.clip.vectors, pca),
                item.class_id,
                item.clip.clip_id,
                subject or item.clip.subject_id or "anon",
            )
            for item in labeled
        ),
        window,
    )


def evaluate_clips(
    model: cnn.CnnModel,
    clips,
    pca: PcaParams,
    ks=(1, 3),
    window: int | None = None,
    label_map=None,
    subject: str | None = None,
) -> EvalReport:
    check_model(model)
    window = window or model.window
    segs = segment_labeled_clips(clips, pca, window, label_map, subject)
    if len(segs) == 0:
        raise TooShortError(f"no labelled clip yields a full window of {window} vectors")
    probs = cnn.predict_proba(model, apply_scaler(segs.features, model.scaler))
    report = evaluate(probs, segs.labels, segs.subject_ids, ks)
    report.notes.append(f"window: {window} embedding vectors")
    return report


@dataclass(frozen=True)
class SegmentPrediction:
    start_time: float
    top: tuple  # ((class_name, probability), ...)


def predict_codes(model: cnn.CnnModel, codes, pca: PcaParams, k: int = 3, window: int | None = None,
                  patch_seconds: float = 0.96) -> list[SegmentPrediction]:
    check_model(model)
    window = window or model.window
    feats = segment_average(dequantize(codes, pca), window)
    if len(feats) == 0:
        raise TooShortError(
            f"audio gives {len(codes)} embedding vector(s); one segment needs {window} "
            f"({window * patch_seconds:.2f} s of patches)"
        )
    probs = cnn.predict_proba(model, apply_scaler(feats, model.scaler))
    top = cnn.predict_topk(probs, k)
    return [
        SegmentPrediction(
            i * window * patch_seconds,
            tuple((CLASS_NAMES[c], float(probs[i, c])) for c in top[i]),
        )
        for i in range(len(feats))
    ]


def predict_wav(model, path, pca=None, extractor=None, frontend=FrontendConfig(), k: int = 3):
    pca = pca or identity_pca()
    codes, _ = embed_wav(path, extractor, pca, frontend)
    return predict_codes(model, codes, pca, k, patch_seconds=frontend.patch_seconds)
