"""Cross-modal embedding alignment, retrieval evaluation, and learned scoring."""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    EmbeddingSet,
    PairedCorpus,
    RelevanceMap,
    SplitSpec,
    build_corpus,
    load_embeddings,
    save_embeddings,
    split_corpus,
)
from .geometry import centroid_gap, gap_report, wasserstein2_batched, wasserstein2_exact  # noqa: F401
from .metrics import ScoreMatrix, score, score_matrix  # noqa: F401
from .retrieval import (  # noqa: F401
    RetrievalReport,
    evaluate,
    hit_rate_at_k,
    precision_at_k,
    precision_upper_bound,
    rank,
)
from .scorer import (  # noqa: F401
    ScorerModel,
    TrainConfig,
    TrainHistory,
    contrastive_pair_loss,
    dataset_loss,
    forward,
    gradient_check,
    mse_loss,
    per_query_loss,
    search_architectures,
    train,
)
from .stats import ProportionSample, chi2_sf, holm_adjust, two_proportion_chisq  # noqa: F401
