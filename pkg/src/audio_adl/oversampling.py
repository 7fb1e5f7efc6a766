"""Class balancing by random oversampling with replacement and SMOTE.

Both methods grow every class to the majority count.  Classes are handled
in ascending id order, each with its own generator seeded by
``seed + class_id``, so results do not depend on processing order.
Original rows keep their positions; generated rows are appended per class.
Generated rows get group id ``-1``: they belong to no source clip.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import CannotBalanceError, InsufficientNeighborsError
from .ontology import LabeledDataset

METHODS = ("none", "random", "smote")
SYNTHETIC_GROUP = -1


@dataclass(frozen=True)
class ResampleConfig:
    method: str = "random"
    k_neighbors: int = 5
    seed: int = 0
    neighbors: str = "brute"  # "brute" or "kdtree"; both exact

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.neighbors not in ("brute", "kdtree"):
            raise ValueError("neighbors must be 'brute' or 'kdtree'")


@dataclass
class SmoteLog:
    """One row per synthetic point, indices into the input dataset."""

    class_id: np.ndarray
    x_index: np.ndarray
    n_index: np.ndarray
    lam: np.ndarray

    def __len__(self):
        return self.class_id.shape[0]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class", "x_index", "n_index", "lambda"])
            for row in zip(self.class_id, self.x_index, self.n_index, self.lam):
                writer.writerow([int(row[0]), int(row[1]), int(row[2]), repr(float(row[3]))])


def _balance_plan(ds: LabeledDataset, classes=None):
    if len(ds) == 0:
        raise CannotBalanceError("cannot balance an empty dataset")
    counts = np.bincount(ds.labels, minlength=15)
    if classes is not None:
        empty = [c for c in classes if counts[c] == 0]
        if empty:
            raise CannotBalanceError(f"classes {empty} have no instances to resample")
    present = np.flatnonzero(counts)
    target = int(counts.max())
    return counts, present, target


def _assemble(ds, counts, target, pieces, dtype):
    """Concatenate originals and per-class generated rows into preallocated arrays."""
    n_total = target * int(np.count_nonzero(counts))
    features = np.empty((n_total,) + ds.features.shape[1:], dtype=dtype)
    labels = np.empty(n_total, dtype=np.int64)
    groups = np.empty(n_total, dtype=np.int64)
    n = len(ds)
    features[:n] = ds.features
    labels[:n] = ds.labels
    groups[:n] = ds.groups if ds.groups is not None else np.arange(n)
    pos = n
    for class_id, rows in pieces:
        m = rows.shape[0]
        features[pos : pos + m] = rows
        labels[pos : pos + m] = class_id
        groups[pos : pos + m] = SYNTHETIC_GROUP
        pos += m
    assert pos == n_total
    return LabeledDataset(features, labels, groups)


def random_oversample(ds: LabeledDataset, seed: int = 0, classes=None) -> LabeledDataset:
    """Pad each minority class with uniform draws (with replacement) of its own rows."""
    counts, present, target = _balance_plan(ds, classes)
    pieces = []
    for c in present:
        need = target - counts[c]
        if need == 0:
            continue
        members = np.flatnonzero(ds.labels == c)
        rng = np.random.default_rng(seed + int(c))
        pieces.append((int(c), ds.features[members[rng.integers(0, members.size, need)]]))
    return _assemble(ds, counts, target, pieces, ds.features.dtype)


def _brute_knn(points: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """Exact k nearest neighbours of ``points[queries]`` among ``points``, self excluded.

    Ties in distance resolve toward the lower index.
    """
    pts = np.asarray(points, dtype=np.float64)
    sq = np.einsum("ij,ij->i", pts, pts)
    out = np.empty((queries.size, k), dtype=np.int64)
    chunk = max(1, int(2e7 // max(1, pts.shape[0])))
    for start in range(0, queries.size, chunk):
        q = queries[start : start + chunk]
        d2 = sq[q, None] + sq[None, :] - 2.0 * (pts[q] @ pts.T)
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(q.size), q] = np.inf
        if k < pts.shape[0] - 1:
            cand = np.argpartition(d2, k, axis=1)[:, : k + 1]
        else:
            cand = np.tile(np.arange(pts.shape[0]), (q.size, 1))
        cand_d = np.take_along_axis(d2, cand, axis=1)
        order = np.lexsort((cand, cand_d), axis=1)[:, :k]
        out[start : start + chunk] = np.take_along_axis(cand, order, axis=1)
    return out


def _kdtree_knn(points: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    tree = cKDTree(np.asarray(points, dtype=np.float64))
    _, idx = tree.query(points[queries], k=k + 1)
    idx = np.asarray(idx).reshape(queries.size, k + 1)
    drop = idx == queries[:, None]
    drop[~drop.any(axis=1), -1] = True  # self lost among zero-distance duplicates
    drop[np.cumsum(drop, axis=1) > 1] = False
    return idx[~drop].reshape(queries.size, k)


def nearest_neighbors(points, queries, k: int, method: str = "brute") -> np.ndarray:
    queries = np.asarray(queries, dtype=np.int64)
    if method == "brute":
        return _brute_knn(points, queries, k)
    if method == "kdtree":
        return _kdtree_knn(points, queries, k)
    raise ValueError(f"unknown neighbour search {method!r}")


def smote(
    ds: LabeledDataset,
    k: int = 5,
    seed: int = 0,
    neighbors: str = "brute",
    return_log: bool = False,
    classes=None,
):
    """Synthesize minority rows as ``x + lam * (n - x)``.

    ``x`` is a uniformly drawn member of the class, ``n`` one of its ``k``
    nearest same-class neighbours (Euclidean), ``lam ~ U[0, 1)``.  The
    majority class is left untouched.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counts, present, target = _balance_plan(ds, classes)
    pieces = []
    log_parts = []
    for c in present:
        need = int(target - counts[c])
        if need == 0:
            continue
        if counts[c] <= k:
            raise InsufficientNeighborsError(int(c), int(counts[c]), k)
        members = np.flatnonzero(ds.labels == c)
        points = ds.features[members]
        rng = np.random.default_rng(seed + int(c))
        x_local = rng.integers(0, members.size, need)
        pick = rng.integers(0, k, need)
        lam = rng.random(need)
        anchors, inverse = np.unique(x_local, return_inverse=True)
        knn = nearest_neighbors(points, anchors, k, neighbors)
        n_local = knn[inverse, pick]
        x = points[x_local].astype(np.float64)
        synth = x + lam[:, None] * (points[n_local] - x)
        pieces.append((int(c), synth))
        if return_log:
            log_parts.append((np.full(need, c), members[x_local], members[n_local], lam))
    dtype = ds.features.dtype if np.issubdtype(ds.features.dtype, np.floating) else np.float64
    out = _assemble(ds, counts, target, pieces, dtype)
    if not return_log:
        return out
    if log_parts:
        log = SmoteLog(*(np.concatenate(parts) for parts in zip(*log_parts)))
    else:
        empty_i = np.zeros(0, dtype=np.int64)
        log = SmoteLog(empty_i, empty_i, empty_i, np.zeros(0))
    return out, log


def oversample(ds: LabeledDataset, cfg: ResampleConfig) -> LabeledDataset:
    if cfg.method == "none":
        return ds
    if cfg.method == "random":
        return random_oversample(ds, cfg.seed)
    return smote(ds, cfg.k_neighbors, cfg.seed, cfg.neighbors)
