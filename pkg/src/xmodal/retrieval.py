"""Top-K ranking, hit-rate@K / precision@K, and precision upper bounds.

Both rate families are always reported: hit-rate@K (ground truth appears in
the top K) and ratio precision@K (share of the top K that is relevant).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import metrics as _metrics
from .corpus import PairedCorpus, RelevanceMap

DIRECTIONS = ("text_to_image", "image_to_text")


class RetrievalError(Exception):
    code = "retrieval-error"


class KOutOfRangeError(RetrievalError):
    code = "k-out-of-range"


@dataclass
class Ranking:
    query_id: str
    candidate_ids: list
    scores: list


@dataclass
class RetrievalReport:
    direction: str
    metric: str
    k_values: list
    query_count: int
    hit_counts: dict          # k -> number of queries with a relevant hit in top k
    hit_rate_at_k: dict       # k -> fraction
    precision_at_k: dict      # k -> fraction
    manifest: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "direction": self.direction,
            "metric": self.metric,
            "k_values": list(self.k_values),
            "query_count": self.query_count,
            "hit_counts": {str(k): v for k, v in self.hit_counts.items()},
            "hit_rate_at_k": {str(k): v for k, v in self.hit_rate_at_k.items()},
            "precision_at_k": {str(k): v for k, v in self.precision_at_k.items()},
            "manifest": self.manifest,
        }

    @classmethod
    def from_json(cls, obj) -> "RetrievalReport":
        return cls(
            direction=obj["direction"],
            metric=obj["metric"],
            k_values=[int(k) for k in obj["k_values"]],
            query_count=int(obj["query_count"]),
            hit_counts={int(k): int(v) for k, v in obj["hit_counts"].items()},
            hit_rate_at_k={int(k): float(v) for k, v in obj["hit_rate_at_k"].items()},
            precision_at_k={int(k): float(v) for k, v in obj["precision_at_k"].items()},
            manifest=obj.get("manifest", {}),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["direction", "metric", "k", "hit_rate", "precision",
                            "hit_count", "query_count"])
            for k in self.k_values:
                writer.writerow([self.direction, self.metric, k,
                                repr(self.hit_rate_at_k[k]),
                                repr(self.precision_at_k[k]),
                                self.hit_counts[k], self.query_count])


def rank(matrix: _metrics.ScoreMatrix, direction: str, k: int):
    """Per-query top-k candidate lists, orientation-aware.

    The matrix is laid out text rows x image columns; `direction` selects
    which axis supplies the queries. Ties break by ascending candidate index.
    """
    if direction not in DIRECTIONS:
        raise RetrievalError(f"unknown direction {direction!r}")
    values = matrix.values
    query_ids, cand_ids = matrix.row_ids, matrix.col_ids
    if direction == "image_to_text":
        values = values.T
        query_ids, cand_ids = matrix.col_ids, matrix.row_ids
    n_cand = values.shape[1]
    if not 1 <= k <= n_cand:
        raise KOutOfRangeError(f"k={k} with {n_cand} candidates")
    keys = -values if _metrics.is_similarity(matrix.metric) else values
    order = np.argsort(keys, axis=1, kind="stable")[:, :k]
    rankings = []
    for qi, qid in enumerate(query_ids):
        idx = order[qi]
        rankings.append(Ranking(qid, [cand_ids[j] for j in idx],
                                [float(values[qi, j]) for j in idx]))
    return rankings


def hit_rate_at_k(rankings, relevance: RelevanceMap, k: int) -> float:
    """Fraction of queries whose top-k list contains a relevant candidate."""
    return hits_at_k(rankings, relevance, k) / len(rankings)


def hits_at_k(rankings, relevance: RelevanceMap, k: int) -> int:
    hits = 0
    for r in rankings:
        if len(r.candidate_ids) < k:
            raise KOutOfRangeError(f"ranking for {r.query_id!r} shorter than k={k}")
        rel = set(relevance.relevant(r.query_id))
        if any(c in rel for c in r.candidate_ids[:k]):
            hits += 1
    return hits


def precision_at_k(rankings, relevance: RelevanceMap, k: int) -> float:
    """Mean over queries of (#relevant in top k) / k."""
    total = 0.0
    for r in rankings:
        if len(r.candidate_ids) < k:
            raise KOutOfRangeError(f"ranking for {r.query_id!r} shorter than k={k}")
        rel = set(relevance.relevant(r.query_id))
        total += sum(1 for c in r.candidate_ids[:k] if c in rel) / k
    return total / len(rankings)


def precision_upper_bound(direction: str, k: int, captions_per_item: int = 1) -> float:
    """Best achievable precision@k given the relevance multiplicity."""
    if direction not in DIRECTIONS:
        raise RetrievalError(f"unknown direction {direction!r}")
    if k < 1 or captions_per_item < 1:
        raise RetrievalError("k and captions_per_item must be >= 1")
    if direction == "image_to_text":
        return min(captions_per_item, k) / k
    return min(1, k) / k


def evaluate(corpus: PairedCorpus, metric_or_model, direction: str,
             k_list=(1, 5, 10)) -> RetrievalReport:
    """Full retrieval evaluation of one corpus in one direction.

    `metric_or_model` is a metric name or a trained scorer exposing
    `pairwise_scores(text_data, image_data)`.
    """
    if isinstance(metric_or_model, str):
        matrix = _metrics.score_matrix(metric_or_model, corpus.side_a, corpus.side_b)
        name = metric_or_model
    else:
        values = metric_or_model.pairwise_scores(corpus.side_a.data, corpus.side_b.data)
        matrix = _metrics.ScoreMatrix("model", values, corpus.side_a.ids, corpus.side_b.ids)
        name = "model"
    relevance = (corpus.relevance_a_to_b if direction == "text_to_image"
                 else corpus.relevance_b_to_a)
    k_list = sorted(set(int(k) for k in k_list))
    rankings = rank(matrix, direction, max(k_list))
    hit_counts, hit_rates, precisions = {}, {}, {}
    for k in k_list:
        hit_counts[k] = hits_at_k(rankings, relevance, k)
        hit_rates[k] = hit_counts[k] / len(rankings)
        precisions[k] = precision_at_k(rankings, relevance, k)
    return RetrievalReport(direction, name, k_list, len(rankings),
                           hit_counts, hit_rates, precisions)


def export_rankings_tsv(rankings, path) -> None:
    """Ranked lists as `query_id, rank, candidate_id, score` TSV rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("query_id\trank\tcandidate_id\tscore\n")
        for r in rankings:
            for pos, (cid, s) in enumerate(zip(r.candidate_ids, r.scores), 1):
                fh.write(f"{r.query_id}\t{pos}\t{cid}\t{s!r}\n")


def save_report_json(report: RetrievalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2)


def load_report_json(path) -> RetrievalReport:
    with open(path, "r", encoding="utf-8") as fh:
        return RetrievalReport.from_json(json.load(fh))
