import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xmodal import stats as xs

# mpmath-backed reference values for the chi-square (1 df) survival function,
# frozen from mp.gammainc(0.5, x/2, mp.inf, regularized=True) at 50 digits
SF_REFERENCE = {
    0.5: 0.47950012218695346,
    1.0: 0.31731050786291410,
    2.0: 0.15729920705028513,
    5.0: 0.025347318677468264,
    10.0: 0.0015654022580025497,
    20.0: 7.7442164310440836e-06,
}


def test_proportion_sample_validation():
    with pytest.raises(xs.StatsError):
        xs.ProportionSample(5, 0)
    with pytest.raises(xs.StatsError):
        xs.ProportionSample(-1, 10)
    with pytest.raises(xs.StatsError):
        xs.ProportionSample(11, 10)


def test_chisq_identical_proportions():
    stat, p = xs.two_proportion_chisq(xs.ProportionSample(5, 10),
                                      xs.ProportionSample(5, 10))
    assert stat == 0.0 and p == 1.0


def test_chisq_extreme_split():
    stat, p = xs.two_proportion_chisq(xs.ProportionSample(10, 10),
                                      xs.ProportionSample(0, 10))
    assert stat == pytest.approx(20.0, abs=1e-12)
    assert p == pytest.approx(SF_REFERENCE[20.0], abs=1e-8)


def test_chisq_degenerate_all_success():
    stat, p = xs.two_proportion_chisq(xs.ProportionSample(10, 10),
                                      xs.ProportionSample(10, 10))
    assert stat == 0.0 and p == 1.0


def test_chisq_large_n_significance():
    stat, p = xs.two_proportion_chisq(xs.ProportionSample(844, 1000),
                                      xs.ProportionSample(770, 1000))
    assert p < 0.0001
    # independent check against scipy's contingency machinery
    scipy_stats = pytest.importorskip("scipy.stats")
    table = np.array([[844, 156], [770, 230]])
    chi2, sp, _, _ = scipy_stats.chi2_contingency(table, correction=False)
    assert stat == pytest.approx(chi2, rel=1e-12)
    assert p == pytest.approx(sp, rel=1e-8)


def test_survival_function_accuracy():
    for x, expected in SF_REFERENCE.items():
        assert xs.chi2_sf(x, df=1) == pytest.approx(expected, abs=1e-8)


def test_survival_function_edges():
    assert xs.chi2_sf(0.0) == 1.0
    assert xs.chi2_sf(-1.0) == 1.0
    with pytest.raises(xs.StatsError):
        xs.gamma_q(0.0, 1.0)


def test_holm_single():
    assert xs.holm_adjust([0.5]) == [0.5]


def test_holm_hand_case():
    assert xs.holm_adjust([0.01, 0.04, 0.03]) == pytest.approx([0.03, 0.06, 0.06])


def test_holm_clamp():
    assert xs.holm_adjust([1.0, 1.0]) == [1.0, 1.0]


def test_holm_out_of_range():
    with pytest.raises(xs.StatsError):
        xs.holm_adjust([0.5, 1.5])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12))
def test_holm_properties(p_values):
    adjusted = xs.holm_adjust(p_values)
    for raw, adj in zip(p_values, adjusted):
        assert adj >= raw - 1e-15
        assert adj <= 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8),
       st.randoms(use_true_random=False))
def test_holm_permutation_equivariance(p_values, rnd):
    order = list(range(len(p_values)))
    rnd.shuffle(order)
    permuted = [p_values[i] for i in order]
    direct = xs.holm_adjust(p_values)
    via_perm = xs.holm_adjust(permuted)
    assert [direct[i] for i in order] == pytest.approx(via_perm, abs=1e-15)
