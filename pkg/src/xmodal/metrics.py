"""Standard (dis)similarity metrics and dense cross-modal score matrices.

Four metrics: euclidean, manhattan, chi_square (dissimilarities, lower is
closer) and cosine (similarity, higher is closer). All accumulation is in
64-bit precision regardless of the 32-bit storage format.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .corpus import EmbeddingSet

METRICS = ("euclidean", "cosine", "manhattan", "chi_square")
SIMILARITY_METRICS = frozenset({"cosine"})


class MetricError(Exception):
    code = "metric-error"


class DimensionMismatchError(MetricError):
    code = "dim-mismatch"


class ZeroNormError(MetricError):
    code = "zero-norm"


def is_similarity(metric: str) -> bool:
    """True when higher scores mean closer; learned scorers count as similarity."""
    return metric in SIMILARITY_METRICS or metric == "model"


def _check_metric(metric):
    if metric not in METRICS:
        raise MetricError(f"unknown metric {metric!r}")


def score(metric: str, p, q) -> float:
    """Evaluate one metric on a single vector pair."""
    _check_metric(metric)
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1 or p.size < 1:
        raise DimensionMismatchError(f"shapes {p.shape} vs {q.shape}")
    if metric == "euclidean":
        d = p - q
        return float(np.sqrt(np.sum(d * d)))
    if metric == "manhattan":
        return float(np.sum(np.abs(p - q)))
    if metric == "cosine":
        np_norm = np.sqrt(np.sum(p * p))
        nq_norm = np.sqrt(np.sum(q * q))
        if np_norm == 0.0 or nq_norm == 0.0:
            raise ZeroNormError("cosine is undefined for zero-norm vectors")
        val = np.sum(p * q) / (np_norm * nq_norm)
        return float(min(1.0, max(-1.0, val)))
    # chi-square: terms with a zero denominator are skipped
    num = (p - q) ** 2
    den = p + q
    safe = np.where(den != 0.0, den, 1.0)
    return float(0.5 * np.sum(np.where(den != 0.0, num / safe, 0.0)))


@dataclass
class ScoreMatrix:
    metric: str
    values: np.ndarray  # (rows, cols) float64
    row_ids: tuple
    col_ids: tuple

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def to_json(self) -> dict:
        return {
            "metric": self.metric,
            "row_ids": list(self.row_ids),
            "col_ids": list(self.col_ids),
            "values": self.values.tolist(),
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([""] + list(self.col_ids))
            for rid, row in zip(self.row_ids, self.values):
                writer.writerow([rid] + [repr(v) for v in row])


def score_matrix(metric: str, a: EmbeddingSet, b: EmbeddingSet,
                 chunk_rows: int = 128) -> ScoreMatrix:
    """Dense metric evaluation of every a-row against every b-row.

    Entries match elementwise `score` calls bit-for-bit; rows are processed
    in chunks to bound the broadcast buffer.
    """
    _check_metric(metric)
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dims {a.dim} vs {b.dim}")
    A = a.data.astype(np.float64)
    B = b.data.astype(np.float64)
    if metric == "cosine":
        for emb, mat in ((a, A), (b, B)):
            norms = np.sqrt(np.sum(mat * mat, axis=1))
            bad = np.nonzero(norms == 0.0)[0]
            if bad.size:
                raise ZeroNormError(
                    f"zero-norm row {emb.ids[bad[0]]!r} under cosine"
                )
    out = np.empty((a.count, b.count), dtype=np.float64)
    for start in range(0, a.count, chunk_rows):
        stop = min(start + chunk_rows, a.count)
        out[start:stop] = _chunk(metric, A[start:stop], B)
    return ScoreMatrix(metric, out, a.ids, b.ids)


def _chunk(metric, A, B):
    # broadcast shapes mirror the scalar kernels so results are bit-identical
    if metric == "cosine":
        na = np.sqrt(np.sum(A * A, axis=1))
        nb = np.sqrt(np.sum(B * B, axis=1))
        num = np.sum(A[:, None, :] * B[None, :, :], axis=-1)
        return np.clip(num / (na[:, None] * nb[None, :]), -1.0, 1.0)
    diff = A[:, None, :] - B[None, :, :]
    if metric == "euclidean":
        out = np.sum(np.multiply(diff, diff, out=diff), axis=-1)
        return np.sqrt(out, out=out)
    if metric == "manhattan":
        return np.sum(np.abs(diff, out=diff), axis=-1)
    num = diff * diff
    den = A[:, None, :] + B[None, :, :]
    safe = np.where(den != 0.0, den, 1.0)
    return 0.5 * np.sum(np.where(den != 0.0, num / safe, 0.0), axis=-1)


def save_matrix_json(matrix: ScoreMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(matrix.to_json(), fh)
