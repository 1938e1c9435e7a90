import numpy as np
import pytest

from xmodal import corpus as cp


def unit_rows(n, dim, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def make_corpus(text_rows, image_rows, captions_per_item=1, a_to_b=None):
    """Build a PairedCorpus directly from float arrays.

    Default relevance is the identity pairing (row i of each side is a pair).
    """
    n_a = text_rows.shape[0]
    n_b = image_rows.shape[0]
    a_ids = tuple(f"t{i}" for i in range(n_a))
    b_ids = tuple(f"i{i}" for i in range(n_b))
    a = cp.EmbeddingSet("text", text_rows.shape[1], a_ids,
                        text_rows.astype(np.float32))
    b = cp.EmbeddingSet("image", image_rows.shape[1], b_ids,
                        image_rows.astype(np.float32))
    if a_to_b is None:
        assert n_a == n_b
        a_to_b = {f"t{i}": [f"i{i}"] for i in range(n_a)}
    b_to_a = {}
    for q, cands in a_to_b.items():
        for c in cands:
            b_to_a.setdefault(c, []).append(q)
    return cp.PairedCorpus(a, b, cp.RelevanceMap(a_to_b),
                           cp.RelevanceMap(b_to_a), captions_per_item)


@pytest.fixture
def aligned_corpus():
    """N=100 identical text/image sides of distinct random unit vectors."""
    rows = unit_rows(100, 16, seed=42)
    return make_corpus(rows, rows)
