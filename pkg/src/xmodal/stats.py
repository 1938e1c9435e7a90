"""Two-proportion chi-square testing with Holm-Bonferroni adjustment.

The chi-square survival function is self-contained, built on the regularized
incomplete gamma function (series for small arguments, continued fraction
otherwise, to 1e-12).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

_MAX_ITER = 500
_EPS = 1e-14


class StatsError(Exception):
    code = "stats-error"


@dataclass(frozen=True)
class ProportionSample:
    successes: int
    trials: int
    label: str = ""

    def __post_init__(self):
        if self.trials < 1 or not 0 <= self.successes <= self.trials:
            raise StatsError("need 0 <= successes <= trials, trials >= 1")


def _gamma_p_series(a, x):
    # lower regularized incomplete gamma by series expansion
    term = 1.0 / a
    total = term
    n = a
    for _ in range(_MAX_ITER):
        n += 1.0
        term *= x / n
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_q_contfrac(a, x):
    # upper regularized incomplete gamma by Lentz continued fraction
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma Q(a, x)."""
    if a <= 0 or x < 0:
        raise StatsError("need a > 0 and x >= 0")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_contfrac(a, x)


def chi2_sf(x: float, df: int = 1) -> float:
    """Chi-square survival function P(X >= x)."""
    if x < 0:
        return 1.0
    return gamma_q(df / 2.0, x / 2.0)


def two_proportion_chisq(a: ProportionSample, b: ProportionSample):
    """Uncorrected chi-square test of two proportions (1 df).

    Returns (statistic, p_value). Identical degenerate proportions give
    statistic 0 and p = 1 rather than an error.
    """
    s1, f1 = a.successes, a.trials - a.successes
    s2, f2 = b.successes, b.trials - b.successes
    n = a.trials + b.trials
    col_s = s1 + s2
    col_f = f1 + f2
    if col_s == 0 or col_f == 0:
        return 0.0, 1.0
    det = s1 * f2 - s2 * f1
    stat = n * det * det / (a.trials * b.trials * col_s * col_f)
    return float(stat), chi2_sf(float(stat), df=1)


def holm_adjust(p_values):
    """Step-down Holm adjustment, returned in the original order."""
    p = list(p_values)
    if any(not 0.0 <= v <= 1.0 for v in p):
        raise StatsError("p-values must lie in [0, 1]")
    m = len(p)
    order = sorted(range(m), key=lambda i: p[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank_pos, idx in enumerate(order):
        value = (m - rank_pos) * p[idx]
        running = max(running, value)
        adjusted[idx] = min(1.0, running)
    return adjusted
