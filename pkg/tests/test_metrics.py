import json

import numpy as np
import pytest

from xmodal import corpus as cp
from xmodal import metrics as mx


HAND_CASES = [
    ("cosine", [1, 0], [0, 1], 0.0),
    ("cosine", [3, 4], [3, 4], 1.0),
    ("cosine", [1, 2], [2, 1], 0.8),        # 4 / (sqrt5 * sqrt5)
    ("euclidean", [0, 0], [3, 4], 5.0),
    ("manhattan", [1, 2], [4, 6], 7.0),
    ("chi_square", [1, 1], [1, 3], 0.5),    # 0.5 * (0/2 + 4/4)
]


@pytest.mark.parametrize("metric,p,q,expected", HAND_CASES)
def test_hand_values(metric, p, q, expected):
    assert mx.score(metric, p, q) == pytest.approx(expected, abs=1e-12)


def test_dimension_mismatch():
    with pytest.raises(mx.DimensionMismatchError):
        mx.score("euclidean", [1, 2], [1, 2, 3])


def test_cosine_zero_norm():
    with pytest.raises(mx.ZeroNormError):
        mx.score("cosine", [0, 0], [1, 2])


def test_chi_square_skips_zero_denominator():
    # p + q == 0 in the first coordinate: that term is skipped
    assert mx.score("chi_square", [1, 1], [-1, 3]) == pytest.approx(0.5, abs=1e-12)


def test_symmetry_random_triples():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        p, q = rng.standard_normal((2, 6))
        for metric in mx.METRICS:
            assert mx.score(metric, p, q) == pytest.approx(
                mx.score(metric, q, p), abs=1e-6)


def test_metric_axioms_random_triples():
    rng = np.random.default_rng(13)
    for _ in range(1000):
        p, q, r = rng.standard_normal((3, 5))
        for metric in ("euclidean", "manhattan"):
            dpq = mx.score(metric, p, q)
            dqr = mx.score(metric, q, r)
            dpr = mx.score(metric, p, r)
            assert dpr <= dpq + dqr + 1e-6
            assert mx.score(metric, p, p) == pytest.approx(0.0, abs=1e-6)


def test_cosine_scale_invariant_ranking():
    rng = np.random.default_rng(3)
    p = rng.standard_normal(8)
    cands = rng.standard_normal((20, 8))
    scores = np.array([mx.score("cosine", p, c) for c in cands])
    scaled = np.array([mx.score("cosine", p, 3.7 * c) for c in cands])
    assert np.array_equal(np.argsort(-scores), np.argsort(-scaled))


def _set(rows, modality="text", prefix="s"):
    rows = np.asarray(rows, dtype=np.float32)
    return cp.EmbeddingSet(modality, rows.shape[1],
                           tuple(f"{prefix}{i}" for i in range(rows.shape[0])), rows)


def test_matrix_diagonal_cosine():
    a = _set(np.random.default_rng(0).standard_normal((5, 4)))
    m = mx.score_matrix("cosine", a, a)
    assert np.allclose(np.diag(m.values), 1.0)


def test_matrix_identity_rows_euclidean():
    a = _set(np.eye(2))
    m = mx.score_matrix("euclidean", a, a)
    expected = np.array([[0.0, np.sqrt(2)], [np.sqrt(2), 0.0]])
    assert np.allclose(m.values, expected, atol=1e-12)


@pytest.mark.parametrize("metric", mx.METRICS)
def test_matrix_transpose_symmetry(metric):
    rng = np.random.default_rng(5)
    a = _set(rng.standard_normal((7, 6)), "text", "a")
    b = _set(rng.standard_normal((9, 6)), "image", "b")
    ab = mx.score_matrix(metric, a, b)
    ba = mx.score_matrix(metric, b, a)
    assert np.array_equal(ab.values, ba.values.T)


@pytest.mark.parametrize("metric", mx.METRICS)
def test_matrix_matches_elementwise_bitwise(metric):
    rng = np.random.default_rng(9)
    a = _set(rng.standard_normal((6, 5)), "text", "a")
    b = _set(rng.standard_normal((4, 5)), "image", "b")
    m = mx.score_matrix(metric, a, b)
    for i in range(6):
        for j in range(4):
            assert m.values[i, j] == mx.score(metric, a.data[i], b.data[j])


def test_matrix_zero_norm_names_offender():
    rows = np.array([[1, 2], [0, 0]], dtype=np.float32)
    a = _set(rows)
    with pytest.raises(mx.ZeroNormError, match="s1"):
        mx.score_matrix("cosine", a, a)


def test_matrix_serialization(tmp_path):
    a = _set(np.random.default_rng(1).standard_normal((3, 2)))
    m = mx.score_matrix("manhattan", a, a)
    obj = m.to_json()
    assert obj["metric"] == "manhattan"
    assert np.allclose(np.array(obj["values"]), m.values)
    csv_path = tmp_path / "m.csv"
    m.to_csv(csv_path)
    lines = csv_path.read_text().strip().splitlines()
    assert len(lines) == 4
    json_path = tmp_path / "m.json"
    mx.save_matrix_json(m, json_path)
    assert json.loads(json_path.read_text())["metric"] == "manhattan"
