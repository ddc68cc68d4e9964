"""Reconstruction metrics and the task-specific measures for hashing and detection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import ContractError, DimensionError

MAPE_EPS = 1e-8


class UndefinedMetricError(ValueError):
    pass


def _pair(x, xr) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    xr = np.asarray(xr, dtype=float)
    if x.shape != xr.shape:
        raise DimensionError(f"shapes {x.shape} and {xr.shape} differ")
    if x.ndim == 1:
        x, xr = x[None], xr[None]
    return x.reshape(len(x), -1), xr.reshape(len(xr), -1)


def mse(x, xr) -> float:
    x, xr = _pair(x, xr)
    return float(np.mean(np.mean((x - xr) ** 2, axis=1)))


def rmse(x, xr) -> float:
    x, xr = _pair(x, xr)
    return float(np.mean(np.sqrt(np.mean((x - xr) ** 2, axis=1))))


def mae(x, xr) -> float:
    x, xr = _pair(x, xr)
    return float(np.mean(np.mean(np.abs(x - xr), axis=1)))


def mape(x, xr) -> float:
    """Mean absolute percentage error; coordinates with |x_i| < 1e-8 are skipped."""
    x, xr = _pair(x, xr)
    keep = np.abs(x) >= MAPE_EPS
    rows = keep.any(axis=1)
    if not rows.any():
        raise UndefinedMetricError("mape undefined: every reference coordinate is zero")
    ratio = np.where(keep, np.abs((x - xr) / np.where(keep, x, 1.0)), 0.0)
    per = ratio[rows].sum(axis=1) / keep[rows].sum(axis=1)
    return float(per.mean())


def reconstruction_errors(net, X, batch: int = 256) -> np.ndarray:
    """Per-instance MSE between each row and its eval-mode reconstruction."""
    X = np.asarray(X, dtype=float)
    R = net.predict(X, batch=batch)
    return np.mean((X - R).reshape(len(X), -1) ** 2, axis=1)


def hamming(h1: str, h2: str) -> int:
    if len(h1) != len(h2):
        raise DimensionError(f"hash lengths differ: {len(h1)} vs {len(h2)}")
    return sum(a != b for a, b in zip(h1, h2))


def cosine_distance(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise UndefinedMetricError("cosine distance undefined for a zero vector")
    return float(1.0 - np.dot(u, v) / (nu * nv))


def _unit_rows(A: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise UndefinedMetricError("cosine distance undefined for a zero vector")
    return A / norms


def intercluster_distance(A, B) -> float:
    """Mean cosine distance over all pairs (a, b) with a in A, b in B."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.size == 0 or B.size == 0:
        raise ContractError("intercluster distance needs two non-empty clusters")
    # mean of 1 - <a,b> = 1 - <mean a_hat, mean b_hat>
    return float(1.0 - _unit_rows(A).mean(axis=0) @ _unit_rows(B).mean(axis=0))


def tfidf_scores(cluster_counts, corpus_counts) -> np.ndarray:
    """tf(term, cluster) * max(0, ln(N / (1 + df(term, corpus)))), cluster as one pseudo-document.

    The idf is floored at 0 so terms common to (nearly) every document score 0
    instead of going negative and sinking below absent terms.
    """
    cluster_counts = np.atleast_2d(np.asarray(cluster_counts, dtype=float))
    corpus_counts = np.atleast_2d(np.asarray(corpus_counts, dtype=float))
    if cluster_counts.shape[1] != corpus_counts.shape[1]:
        raise DimensionError("cluster and corpus vocabularies differ in size")
    tf = cluster_counts.sum(axis=0)
    N = corpus_counts.shape[0]
    df = (corpus_counts > 0).sum(axis=0)
    return tf * np.maximum(np.log(N / (1.0 + df)), 0.0)


def tfidf_rank(cluster_counts, corpus_counts, m: int, vocabulary: Sequence[str]) -> list[tuple[str, float]]:
    """Top-m (term, score) pairs, highest score first; ties go to the larger raw
    term frequency, then lexicographic order."""
    scores = tfidf_scores(cluster_counts, corpus_counts)
    tf = np.atleast_2d(np.asarray(cluster_counts, dtype=float)).sum(axis=0)
    order = sorted(range(len(scores)), key=lambda j: (-scores[j], -tf[j], vocabulary[j]))
    return [(vocabulary[j], float(scores[j])) for j in order[:m]]


@dataclass
class PRPoint:
    threshold: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    tn: int = 0


@dataclass
class PRCurve:
    points: list[PRPoint]

    def at(self, threshold: float) -> PRPoint:
        for pt in self.points:
            if pt.threshold == threshold:
                return pt
        raise KeyError(threshold)


def confusion_at(scores, labels, threshold: float) -> PRPoint:
    """Counts and precision/recall when flagging ``score > threshold``."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    flagged = scores > threshold
    tp = int(np.sum(flagged & labels))
    fp = int(np.sum(flagged & ~labels))
    fn = int(np.sum(~flagged & labels))
    tn = int(np.sum(~flagged & ~labels))
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return PRPoint(float(threshold), precision, recall, tp, fp, fn, tn)


def pr_curve(scores, labels) -> PRCurve:
    """Sweep thresholds over the sorted unique scores, preceded by one below the minimum.

    With nothing flagged, precision is reported as 1 by convention.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise DimensionError(f"scores {scores.shape} vs labels {labels.shape}")
    if not labels.any():
        raise ContractError("precision-recall needs at least one positive label")
    uniq = np.unique(scores)
    below = uniq[0] - 1.0 if len(uniq) else 0.0
    thresholds = np.concatenate([[below], uniq])
    return PRCurve([confusion_at(scores, labels, t) for t in thresholds])


def spearman(a, b) -> float:
    """Spearman rank correlation with average ranks for ties."""
    from scipy.stats import rankdata

    ra, rb = rankdata(a), rankdata(b)
    ra, rb = ra - ra.mean(), rb - rb.mean()
    denom = np.sqrt((ra ** 2).sum() * (rb ** 2).sum())
    return float((ra * rb).sum() / denom) if denom else 0.0
