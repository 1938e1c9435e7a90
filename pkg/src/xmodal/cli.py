"""Batch command-line surface over the library modules.

Commands: gap, retrieve, train, heatmap, compare, ingest-check. Every JSON
report embeds the run manifest (command, inputs, resolved parameters) so any
run can be reproduced exactly.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, corpus, geometry, metrics, retrieval, scorer, stats

THREADS_ENV = "XMODAL_THREADS"


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _manifest(command, inputs, params):
    return {
        "command": command,
        "inputs": inputs,
        "params": params,
        "version": __version__,
        "threads": int(os.environ.get(THREADS_ENV, "1")),
    }


def _emit(report: dict, args) -> None:
    text = json.dumps(report, indent=2)
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        if not args.quiet:
            print(f"wrote {args.out}")
    elif not args.quiet:
        print(text)


def _load_corpus(args):
    a = corpus.load_embeddings(args.text)
    b = corpus.load_embeddings(args.image)
    return corpus.build_corpus(a, b, args.manifest)


def _subset_corpus(c, n, seed):
    """Seeded paired subsample of n side-b items with their captions."""
    units = [bid for bid in c.side_b.ids if bid in c.relevance_b_to_a.entries]
    if n > len(units):
        raise CliError("subset-too-large", f"subset {n} exceeds {len(units)} pairs")
    rng = np.random.default_rng(seed)
    keep = [units[i] for i in sorted(rng.choice(len(units), size=n, replace=False))]
    a_ids = [q for bid in keep for q in c.relevance_b_to_a.entries[bid]]
    return corpus.PairedCorpus(
        c.side_a.subset(a_ids),
        c.side_b.subset(keep),
        corpus.RelevanceMap({q: list(c.relevance_a_to_b.entries[q]) for q in a_ids}),
        corpus.RelevanceMap({b: list(c.relevance_b_to_a.entries[b]) for b in keep}),
        c.captions_per_item,
    )


def cmd_gap(args) -> int:
    a = corpus.load_embeddings(args.a)
    b = corpus.load_embeddings(args.b)
    if a.dim != b.dim:
        raise CliError("dim-mismatch", f"dims {a.dim} vs {b.dim}")
    batch_size = min(args.batch_size, a.count)
    report = geometry.gap_report(a, b, batch_size=batch_size, seed=args.seed)
    report.manifest = _manifest(
        "gap", {"a": args.a, "b": args.b},
        {"batch_size": batch_size, "seed": args.seed},
    )
    _emit(report.to_json(), args)
    return 0


def cmd_retrieve(args) -> int:
    if args.metric and args.model:
        raise CliError("usage", "--metric and --model are mutually exclusive")
    if not args.metric and not args.model:
        raise CliError("usage", "one of --metric or --model is required")
    c = _load_corpus(args)
    if args.subset:
        c = _subset_corpus(c, args.subset, args.seed)
    k_list = [int(k) for k in args.k.split(",")]
    scorer_or_metric = args.metric or scorer.load_model(args.model)
    report = retrieval.evaluate(c, scorer_or_metric, args.direction, k_list)
    report.manifest = _manifest(
        "retrieve",
        {"text": args.text, "image": args.image, "manifest": args.manifest,
         "model": args.model},
        {"metric": args.metric, "direction": args.direction, "k": k_list,
         "subset": args.subset, "seed": args.seed},
    )
    if args.ranked_out:
        if isinstance(scorer_or_metric, str):
            matrix = metrics.score_matrix(scorer_or_metric, c.side_a, c.side_b)
        else:
            matrix = metrics.ScoreMatrix(
                "model",
                scorer_or_metric.pairwise_scores(c.side_a.data, c.side_b.data),
                c.side_a.ids, c.side_b.ids,
            )
        rankings = retrieval.rank(matrix, args.direction, max(k_list))
        retrieval.export_rankings_tsv(rankings, args.ranked_out)
    if args.output == "csv" and args.out:
        report_obj = report
        report_obj.to_csv(args.out)
        if not args.quiet:
            print(f"wrote {args.out}")
    else:
        _emit(report.to_json(), args)
    return 0


def cmd_train(args) -> int:
    c = _load_corpus(args)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    spec = corpus.SplitSpec(ratios=ratios, seed=args.seed)
    if ratios[1] <= 0:
        raise CliError("no-validation-split", "validation ratio must be > 0")
    splits = corpus.split_corpus(c, spec)
    config = scorer.TrainConfig(
        base_lr=args.lr, batch_size=args.batch_size, max_epochs=args.epochs,
        loss=args.loss, negative_mode=args.negatives, seed=args.seed,
    )
    if args.search:
        space = {"depths": range(1, 6), "widths": range(100, 1101, 100)}
        arch, val = scorer.search_architectures(space, args.budget, splits, config)
    elif args.arch:
        arch = [int(x) for x in args.arch.split(",")]
    else:
        raise CliError("usage", "one of --arch or --search is required")
    model, history = scorer.train(splits, config, arch)
    model_path = args.out_prefix + ".model.json"
    history_path = args.out_prefix + ".history.csv"
    scorer.save_model(model, model_path, extra={
        "loss": config.loss, "seed": config.seed, "arch": arch,
    })
    history.to_csv(history_path)
    summary = {
        "arch": arch,
        "model_file": model_path,
        "history_file": history_path,
        "initial_loss": history.initial_loss,
        "final_loss": history.final_loss,
        "best_epoch": history.best_epoch,
        "stopped_epoch": history.stopped_epoch,
        "manifest": _manifest(
            "train",
            {"text": args.text, "image": args.image, "manifest": args.manifest},
            {"loss": args.loss, "lr": args.lr, "batch_size": args.batch_size,
             "epochs": args.epochs, "negatives": args.negatives,
             "ratios": list(ratios), "seed": args.seed,
             "search": bool(args.search), "budget": args.budget},
        ),
    }
    args.out = None
    _emit(summary, args)
    return 0


def cmd_heatmap(args) -> int:
    c = _load_corpus(args)
    n_pairs = len(c.relevance_b_to_a.entries)
    if args.samples > n_pairs:
        raise CliError("sample-too-large", f"{args.samples} > {n_pairs} pairs")
    if args.samples == 0:
        matrix = {"metric": args.metric, "row_ids": [], "col_ids": [], "values": []}
    else:
        sub = _subset_corpus(c, args.samples, args.seed)
        matrix = metrics.score_matrix(args.metric, sub.side_a, sub.side_b).to_json()
    matrix["manifest"] = _manifest(
        "heatmap",
        {"text": args.text, "image": args.image, "manifest": args.manifest},
        {"metric": args.metric, "samples": args.samples, "seed": args.seed},
    )
    _emit(matrix, args)
    return 0


def cmd_compare(args) -> int:
    reports = [retrieval.load_report_json(p) for p in args.reports]
    if len(reports) < 2:
        raise CliError("usage", "need at least 2 reports")
    base = reports[0]
    for r in reports[1:]:
        if (r.query_count != base.query_count or r.direction != base.direction
                or r.k_values != base.k_values):
            raise CliError("incompatible-reports",
                           "reports must share N, direction, and K list")
    labels = [r.metric or f"report{i}" for i, r in enumerate(reports)]
    families = {}
    for k in base.k_values:
        cells = []
        raw = []
        for i in range(len(reports)):
            for j in range(i + 1, len(reports)):
                stat, p = stats.two_proportion_chisq(
                    stats.ProportionSample(reports[i].hit_counts[k],
                                           reports[i].query_count, labels[i]),
                    stats.ProportionSample(reports[j].hit_counts[k],
                                           reports[j].query_count, labels[j]),
                )
                cells.append((i, j, stat))
                raw.append(p)
        adjusted = stats.holm_adjust(raw)
        families[str(k)] = [
            {"a": labels[i], "b": labels[j], "statistic": stat,
             "p_raw": raw[idx], "p_adjusted": adjusted[idx]}
            for idx, (i, j, stat) in enumerate(cells)
        ]
    out = {
        "labels": labels,
        "families": families,
        "manifest": _manifest("compare", {"reports": list(args.reports)}, {}),
    }
    _emit(out, args)
    return 0


def cmd_ingest_check(args) -> int:
    checked = []
    sets = {}
    for path in args.files:
        emb = corpus.load_embeddings(path)
        sets[path] = emb
        checked.append({"file": path, "modality": emb.modality,
                        "count": emb.count, "dim": emb.dim})
    if args.manifest:
        if len(sets) != 2:
            raise CliError("usage", "manifest validation needs exactly 2 files")
        embs = list(sets.values())
        text = next((e for e in embs if e.modality == "text"), embs[0])
        image = next((e for e in embs if e.modality == "image"), embs[1])
        corpus.build_corpus(text, image, args.manifest)
        checked.append({"manifest": args.manifest, "status": "ok"})
    _emit({"checked": checked,
           "manifest": _manifest("ingest-check",
                                 {"files": list(args.files),
                                  "manifest": args.manifest}, {})}, args)
    return 0


def _add_corpus_args(p):
    p.add_argument("--text", required=True, help="text XEB1 file")
    p.add_argument("--image", required=True, help="image XEB1 file")
    p.add_argument("--manifest", required=True, help="pairing manifest TSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xmodal",
        description="Cross-modal embedding alignment and retrieval evaluation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", choices=("json", "csv"), default="json")
        p.add_argument("--quiet", action="store_true")
        p.add_argument("--out", help="write the report to this path")

    p = sub.add_parser("gap", help="centroid modality gap and Wasserstein-2")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--batch-size", type=int, default=256)
    common(p)
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("retrieve", help="top-K retrieval evaluation")
    _add_corpus_args(p)
    p.add_argument("--metric", choices=metrics.METRICS)
    p.add_argument("--model", help="trained scorer model file")
    p.add_argument("--direction", choices=retrieval.DIRECTIONS,
                   default="text_to_image")
    p.add_argument("--k", default="1,5,10")
    p.add_argument("--subset", type=int, help="evaluate a seeded paired subsample")
    p.add_argument("--ranked-out", help="write ranked lists TSV here")
    common(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("train", help="train a similarity scorer")
    _add_corpus_args(p)
    p.add_argument("--loss", choices=("mse", "contrastive"), default="contrastive")
    p.add_argument("--arch", help="comma-separated hidden sizes")
    p.add_argument("--search", action="store_true")
    p.add_argument("--budget", type=int, default=1)
    p.add_argument("--lr", type=float, default=5e-5)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--negatives", choices=("in_batch", "full_dataset"),
                   default="in_batch")
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--out-prefix", required=True)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("heatmap", help="cross score matrix of sampled pairs")
    _add_corpus_args(p)
    p.add_argument("--metric", choices=metrics.METRICS, default="cosine")
    p.add_argument("--samples", type=int, default=10)
    common(p)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("compare", help="pairwise significance of reports")
    p.add_argument("reports", nargs="+")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ingest-check", help="validate XEB1 files and manifests")
    p.add_argument("files", nargs="+")
    p.add_argument("--manifest")
    common(p)
    p.set_defaults(func=cmd_ingest_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except (corpus.CorpusError, metrics.MetricError, retrieval.RetrievalError,
            geometry.GeometryError, scorer.ScorerError, stats.StatsError,
            OSError) as exc:
        code = getattr(exc, "code", "io-error")
        print(f"error[{code}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
