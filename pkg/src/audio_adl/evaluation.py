"""Top-k and class-weighted metrics, F-scores, confusion matrices and report files.

Every "weighted" score here gives each class (or subject) equal say regardless
of how many instances it holds.  Divisions by an empty support yield 0 and a
:class:`ZeroSupportWarning`, never NaN.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ontology import CLASS_NAMES, NUM_CLASSES


class ZeroSupportWarning(UserWarning):
    pass


def top_k_accuracy(topk: np.ndarray, truths: np.ndarray, k: int | None = None) -> float:
    """Fraction of rows whose truth appears among the first ``k`` predicted ids."""
    topk = np.asarray(topk)
    truths = np.asarray(truths)
    if topk.ndim == 1:
        topk = topk[:, None]
    if truths.size == 0 or topk.shape[0] != truths.shape[0]:
        raise ValueError("need the same, non-zero number of predictions and truths")
    if k is not None:
        topk = topk[:, :k]
    return float((topk == truths[:, None]).any(axis=1).mean())


def topk_hits(probs: np.ndarray, truths: np.ndarray, k: int) -> np.ndarray:
    """Boolean per row: truth among the ``k`` most probable classes (ties to the lower id)."""
    order = np.argsort(-np.asarray(probs), axis=1, kind="stable")[:, :k]
    return (order == np.asarray(truths)[:, None]).any(axis=1)


def per_class_accuracy(truths, correct, n_classes: int = NUM_CLASSES) -> np.ndarray:
    """Accuracy per class; NaN marks classes without instances."""
    truths = np.asarray(truths)
    correct = np.asarray(correct, dtype=np.float64)
    support = np.bincount(truths, minlength=n_classes)
    hits = np.bincount(truths, weights=correct, minlength=n_classes)
    out = np.full(n_classes, np.nan)
    present = support > 0
    out[present] = hits[present] / support[present]
    return out


def weighted_accuracy(truths, correct) -> float:
    """Mean of the per-class accuracies over the classes present."""
    truths = np.asarray(truths)
    if truths.size == 0:
        raise ValueError("weighted accuracy needs at least one instance")
    n_classes = max(NUM_CLASSES, int(truths.max()) + 1)
    acc = per_class_accuracy(truths, correct, n_classes)
    return float(np.nanmean(acc))


def precision_recall_f1(preds, truths, n_classes: int = NUM_CLASSES):
    """One-vs-rest precision, recall, F1 and support per class."""
    preds = np.asarray(preds)
    truths = np.asarray(truths)
    tp = np.bincount(truths[preds == truths], minlength=n_classes).astype(np.float64)
    predicted = np.bincount(preds, minlength=n_classes).astype(np.float64)
    support = np.bincount(truths, minlength=n_classes).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    return precision, recall, f1, support


def weighted_f_score(preds, truths, n_classes: int = NUM_CLASSES) -> float:
    """Support-weighted mean of the per-class F1 scores."""
    truths = np.asarray(truths)
    if truths.size == 0:
        raise ValueError("weighted F-score needs at least one instance")
    _, _, f1, support = precision_recall_f1(preds, truths, n_classes)
    return float((support * f1).sum() / support.sum())


def confusion_matrix(preds, truths, n_classes: int = NUM_CLASSES) -> np.ndarray:
    """Row-normalized counts; row ``c`` is the prediction distribution for true class ``c``."""
    preds = np.asarray(preds)
    truths = np.asarray(truths)
    counts = np.zeros((n_classes, n_classes))
    np.add.at(counts, (truths, preds), 1.0)
    rows = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)


def per_class_stats(per_subject: dict) -> dict:
    """Mean and population standard deviation of class accuracies across subjects.

    ``per_subject`` maps subject -> {class_id: accuracy}.  Subjects count
    equally; a class missing from every subject is dropped with a warning.
    """
    classes = sorted({c for accs in per_subject.values() for c in accs})
    out = {}
    for c in classes:
        values = np.array([accs[c] for accs in per_subject.values() if c in accs and not np.isnan(accs[c])])
        if values.size == 0:
            warnings.warn(f"class {c} has no tested instances", ZeroSupportWarning, stacklevel=2)
            continue
        out[c] = (float(values.mean()), float(values.std()))
    return out


@dataclass
class EvalReport:
    ks: tuple[int, ...]
    per_subject: dict  # subject -> {k: weighted accuracy}
    per_class: dict  # k -> {class_id: (mean, deviation)}
    overall: dict  # k -> weighted accuracy over all instances
    overall_f1: float
    confusion: np.ndarray
    n_instances: int
    notes: list = field(default_factory=list)


def evaluate(probs, truths, subjects=None, ks=(1, 3)) -> EvalReport:
    """Per-subject and per-class top-k report from class probabilities."""
    probs = np.asarray(probs)
    truths = np.asarray(truths, dtype=np.int64)
    if truths.size == 0:
        raise ValueError("nothing to evaluate")
    if truths.min() < 0 or truths.max() >= probs.shape[1]:
        raise ValueError("truth ids fall outside the model's classes")
    subjects = np.asarray(["anon"] * len(truths) if subjects is None else subjects, dtype=object)
    top1 = probs.argmax(axis=1)
    per_subject, per_class, overall = {}, {}, {}
    for k in ks:
        hits = topk_hits(probs, truths, k)
        overall[k] = weighted_accuracy(truths, hits)
        class_acc = {}
        for s in sorted(set(subjects)):
            mask = subjects == s
            per_subject.setdefault(s, {})[k] = weighted_accuracy(truths[mask], hits[mask])
            acc = per_class_accuracy(truths[mask], hits[mask], probs.shape[1])
            class_acc[s] = {c: a for c, a in enumerate(acc) if not np.isnan(a)}
        per_class[k] = per_class_stats(class_acc)
    return EvalReport(
        tuple(ks),
        per_subject,
        per_class,
        overall,
        weighted_f_score(top1, truths, probs.shape[1]),
        confusion_matrix(top1, truths, probs.shape[1]),
        int(truths.size),
    )


def write_report(report: EvalReport, directory, prefix: str = "") -> list[Path]:
    """Write ``per_subject.csv``, ``per_class.csv``, ``confusion.csv`` and ``summary.txt``.

    Column names:
      per_subject.csv  subject, top{k}_weighted_accuracy...
      per_class.csv    class_id, class_name, top{k}_mean, top{k}_deviation...
      confusion.csv    true_class, then one column per predicted class name
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    ks = report.ks

    path = directory / f"{prefix}per_subject.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject"] + [f"top{k}_weighted_accuracy" for k in ks])
        for s, accs in report.per_subject.items():
            w.writerow([s] + [f"{accs[k]:.6f}" for k in ks])
    paths.append(path)

    path = directory / f"{prefix}per_class.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["class_id", "class_name"]
        for k in ks:
            header += [f"top{k}_mean", f"top{k}_deviation"]
        w.writerow(header)
        for c in range(report.confusion.shape[0]):
            if c not in report.per_class[ks[0]]:
                continue
            row = [c, CLASS_NAMES[c] if c < len(CLASS_NAMES) else str(c)]
            for k in ks:
                mean, dev = report.per_class[k][c]
                row += [f"{mean:.6f}", f"{dev:.6f}"]
            w.writerow(row)
    paths.append(path)

    path = directory / f"{prefix}confusion.csv"
    names = [CLASS_NAMES[c] if c < len(CLASS_NAMES) else str(c) for c in range(report.confusion.shape[0])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true_class"] + names)
        for name, row in zip(names, report.confusion):
            w.writerow([name] + [f"{v:.6f}" for v in row])
    paths.append(path)

    path = directory / f"{prefix}summary.txt"
    lines = [f"instances: {report.n_instances}", f"weighted F-score: {report.overall_f1:.4f}"]
    for k in ks:
        lines.append(f"top-{k} class-weighted accuracy: {report.overall[k]:.4f}")
        subj = [report.per_subject[s][k] for s in report.per_subject]
        lines.append(f"top-{k} mean over {len(subj)} subject(s): {np.mean(subj):.4f}")
    lines.append("per-class deviation is the population standard deviation across subjects")
    lines.extend(report.notes)
    path.write_text("\n".join(lines) + "\n")
    paths.append(path)
    return paths
