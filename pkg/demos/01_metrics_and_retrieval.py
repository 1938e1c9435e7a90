"""Score a small synthetic corpus with every metric and compare retrieval.

Builds 200 aligned text/image pairs where each image embedding is a noisy
copy of its caption embedding, then reports hit rate and precision at
several cutoffs for all four distance/similarity functions.
"""
import numpy as np

from xmodal import (
    EmbeddingSet,
    PairedCorpus,
    RelevanceMap,
    evaluate,
    precision_upper_bound,
)
from xmodal.metrics import METRICS

N, DIM = 200, 32
rng = np.random.default_rng(7)

text = rng.standard_normal((N, DIM)).astype(np.float32)
image = (text + 1.0 * rng.standard_normal((N, DIM))).astype(np.float32)

text_ids = tuple(f"cap{i}" for i in range(N))
image_ids = tuple(f"img{i}" for i in range(N))
corpus = PairedCorpus(
    EmbeddingSet("text", DIM, text_ids, text),
    EmbeddingSet("image", DIM, image_ids, image),
    RelevanceMap({t: [i] for t, i in zip(text_ids, image_ids)}),
    RelevanceMap({i: [t] for t, i in zip(text_ids, image_ids)}),
)

ks = (1, 5, 10)
print(f"{N} noisy aligned pairs, dim {DIM}")
print("precision@k upper bounds: "
      + ", ".join(f"k={k}: {precision_upper_bound('text_to_image', k):.2f}"
                  for k in ks))
print()
for metric in METRICS:
    report = evaluate(corpus, metric, "text_to_image", ks)
    hits = ", ".join(f"hit@{k}={report.hit_rate_at_k[k]:.3f}" for k in ks)
    print(f"{metric:>10}: {hits}")
