"""Modality-gap diagnostics: centroid distance and exact Wasserstein-2.

Wasserstein-2 between equal-size, equal-weight point clouds reduces to a
min-cost assignment on the squared-distance matrix; batching estimates the
full-set distance from seeded equal-size subsets.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .corpus import EmbeddingSet


class GeometryError(Exception):
    code = "geometry-error"


@dataclass
class GapReport:
    centroid_gap: float
    w2_mean: float
    w2_batches: int
    batch_size: int
    seed: int
    dropped: int = 0
    manifest: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "centroid_gap": self.centroid_gap,
            "w2_mean": self.w2_mean,
            "w2_batches": self.w2_batches,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "dropped": self.dropped,
            "manifest": self.manifest,
        }


def _as_points(x):
    if isinstance(x, EmbeddingSet):
        return x.data.astype(np.float64)
    return np.asarray(x, dtype=np.float64)


def centroid_gap(a, b) -> float:
    """Euclidean distance between the two clouds' centroids."""
    pa, pb = _as_points(a), _as_points(b)
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        raise GeometryError("centroid of an empty set is undefined")
    if pa.shape[1] != pb.shape[1]:
        raise GeometryError(f"dims {pa.shape[1]} vs {pb.shape[1]}")
    d = pa.mean(axis=0) - pb.mean(axis=0)
    return float(np.sqrt(np.sum(d * d)))


def wasserstein2_exact(a, b) -> float:
    """W2 between equal-size clouds via exact min-cost assignment.

    The matched squared costs are summed in sorted order so the result is
    bit-identical under argument swap.
    """
    pa, pb = _as_points(a), _as_points(b)
    if pa.shape[0] != pb.shape[0]:
        raise GeometryError(f"sizes {pa.shape[0]} vs {pb.shape[0]}")
    if pa.shape[0] == 0:
        raise GeometryError("empty point sets")
    if pa.shape[1] != pb.shape[1]:
        raise GeometryError(f"dims {pa.shape[1]} vs {pb.shape[1]}")
    cost = cdist(pa, pb, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    matched = np.sort(cost[rows, cols])
    return float(np.sqrt(np.sum(matched) / pa.shape[0]))


def wasserstein2_batched(a, b, batch_size: int = 256, seed: int = 0):
    """Mean of per-batch exact W2 over a seeded paired partition.

    Both clouds are sliced by the same shuffled indices; a short remainder
    batch is dropped and its size recorded.
    """
    pa, pb = _as_points(a), _as_points(b)
    if pa.shape[0] != pb.shape[0]:
        raise GeometryError(f"counts {pa.shape[0]} vs {pb.shape[0]}")
    if batch_size < 1:
        raise GeometryError("batch_size must be >= 1")
    n = pa.shape[0]
    if batch_size > n:
        raise GeometryError(f"batch_size {batch_size} exceeds count {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_batches = n // batch_size
    dropped = n - n_batches * batch_size
    values = []
    for i in range(n_batches):
        idx = order[i * batch_size : (i + 1) * batch_size]
        values.append(wasserstein2_exact(pa[idx], pb[idx]))
    return float(np.mean(values)), n_batches, dropped


def gap_report(a, b, batch_size: int = 256, seed: int = 0) -> GapReport:
    w2_mean, n_batches, dropped = wasserstein2_batched(a, b, batch_size, seed)
    return GapReport(centroid_gap(a, b), w2_mean, n_batches, batch_size, seed, dropped)


def save_gap_json(report: GapReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2)
