"""Trace-inference adversary: windowed kNN attack and Bayes-risk estimation.

The attacker observes windows of L consecutive released planar points and
tries to infer the grid cell of the last true fix in the window. Held-out
kNN misclassification rate serves as the plug-in Bayes-risk estimate; the
nearest-neighbor family is universally consistent, so the estimate converges
to the true risk as the training set grows.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .ingest import Grid, Trace

_PREDICT_CHUNK = 256


@dataclass(frozen=True)
class AttackDataset:
    """Feature matrix of flattened release windows with true-cell labels."""

    features: np.ndarray  # (N, 2L) float
    labels: np.ndarray  # (N,) int cell ids
    window_len: int
    traces_skipped: int = 0

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[1] != 2 * self.window_len:
            raise ValueError("features must be (N, 2*window_len)")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with features")

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class RiskEstimate:
    """Held-out misclassification rate of the kNN attacker."""

    bayes_risk: float
    n_eval: int
    n_train: int
    k: int

    def __post_init__(self):
        if not 0.0 <= self.bayes_risk <= 1.0:
            raise ValueError("bayes_risk must lie in [0, 1]")


def choose_k(n_train: int) -> int:
    """Neighbor count k = round(ln T), floored at 1."""
    if n_train < 1:
        raise ValueError("training set must be nonempty")
    return max(1, round(math.log(n_train)))


def build_attack_dataset(
    pairs: list[tuple[Trace, np.ndarray]],
    grid: Grid,
    window_len: int,
) -> AttackDataset:
    """Slide length-L windows over each (true, released) trace pair.

    One sample per window position: features are the window's released points
    flattened oldest-first as (x, y) pairs; the label is the grid cell of the
    window's last true fix. Traces shorter than L are skipped and counted.
    """
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    feats, labels, skipped = [], [], 0
    for trace, released in pairs:
        released = np.asarray(released, dtype=float)
        if released.shape != (len(trace), 2):
            raise ValueError("released points must align 1:1 with trace fixes")
        if len(trace) < window_len:
            skipped += 1
            continue
        true_cells = grid.to_cells(trace.planar())
        for end in range(window_len - 1, len(trace)):
            feats.append(released[end - window_len + 1 : end + 1].ravel())
            labels.append(true_cells[end])
    if not feats:
        raise ValueError("no windows produced; all traces shorter than window_len")
    return AttackDataset(
        features=np.array(feats),
        labels=np.array(labels, dtype=np.int64),
        window_len=window_len,
        traces_skipped=skipped,
    )


@dataclass(frozen=True)
class KnnModel:
    """kNN classifier over attack samples, k tied to the training size."""

    features: np.ndarray  # (T, D)
    labels: np.ndarray  # (T,)
    k: int

    @classmethod
    def fit(cls, features: np.ndarray, labels: np.ndarray) -> "KnnModel":
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] == 0:
            raise ValueError("features must be a nonempty (T, D) array")
        if labels.shape != (features.shape[0],):
            raise ValueError("labels must align with features")
        return cls(features=features, labels=labels, k=choose_k(features.shape[0]))


def _vote(d2_row: np.ndarray, labels: np.ndarray, k: int) -> int:
    """Majority label among the k nearest; ties go to the label whose tied
    member is nearest."""
    t = d2_row.shape[0]
    if k < t:
        near = np.argpartition(d2_row, k - 1)[:k]
    else:
        near = np.arange(t)
    counts = Counter(labels[near].tolist())
    top = max(counts.values())
    tied = [lab for lab, c in counts.items() if c == top]
    if len(tied) == 1:
        return tied[0]
    tied_set = set(tied)
    best_lab, best_d2 = -1, math.inf
    for idx in near:
        lab = int(labels[idx])
        if lab in tied_set and d2_row[idx] < best_d2:
            best_lab, best_d2 = lab, d2_row[idx]
    return best_lab


def knn_predict(model: KnnModel, features: np.ndarray) -> int:
    """Predict the cell label for one feature vector."""
    features = np.asarray(features, dtype=float)
    if features.shape != (model.features.shape[1],):
        raise ValueError("feature length mismatch")
    d2 = np.sum((model.features - features) ** 2, axis=1)
    return int(_vote(d2, model.labels, model.k))


def knn_predict_batch(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    """Vectorized knn_predict over an (M, D) query matrix."""
    queries = np.asarray(queries, dtype=float)
    if queries.ndim != 2 or queries.shape[1] != model.features.shape[1]:
        raise ValueError("query shape mismatch")
    train_sq = np.sum(model.features**2, axis=1)
    out = np.empty(queries.shape[0], dtype=np.int64)
    for lo in range(0, queries.shape[0], _PREDICT_CHUNK):
        chunk = queries[lo : lo + _PREDICT_CHUNK]
        # squared distances via the expansion |q - t|^2 = |q|^2 - 2 q.t + |t|^2
        d2 = np.sum(chunk**2, axis=1)[:, None] - 2.0 * (chunk @ model.features.T) + train_sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        for i in range(chunk.shape[0]):
            out[lo + i] = _vote(d2[i], model.labels, model.k)
    return out


def estimate_bayes_risk(
    dataset: AttackDataset,
    rng: np.random.Generator,
    split: float = 0.25,
) -> RiskEstimate:
    """Estimate the attacker's Bayes risk by held-out kNN error.

    Randomly holds out `split` of the samples, fits kNN with
    k = max(1, round(ln(train size))) on the rest, and returns the eval-set
    misclassification rate.
    """
    n = len(dataset)
    if n < 10:
        raise ValueError(f"need at least 10 samples, got {n}")
    if not 0.0 < split < 1.0:
        raise ValueError("split must lie in (0, 1)")
    perm = rng.permutation(n)
    n_eval = min(max(1, round(split * n)), n - 1)
    eval_idx, train_idx = perm[:n_eval], perm[n_eval:]
    model = KnnModel.fit(dataset.features[train_idx], dataset.labels[train_idx])
    pred = knn_predict_batch(model, dataset.features[eval_idx])
    risk = float(np.mean(pred != dataset.labels[eval_idx]))
    return RiskEstimate(bayes_risk=risk, n_eval=n_eval, n_train=len(train_idx), k=model.k)
