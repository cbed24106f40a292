"""Scoring, contingency tables and the significance tests behind the reports.

The chi-squared survival function is computed from the regularized upper
incomplete gamma function Q(df/2, x/2), implemented here directly (power
series below the a+1 crossover, Lentz continued fraction above) so the
package carries no numerical dependency beyond numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .bag_of_sentences import UNRECOGNIZED


class DegenerateTableError(ValueError):
    """A contingency table with a zero marginal cannot be tested."""


def score(predictions: Iterable[tuple[object, int]]) -> tuple[int, int]:
    """Count exact matches over (predicted, target) pairs.

    An UNRECOGNIZED prediction never matches, mirroring the scoring rule
    that every trial is either correct or incorrect.
    """
    correct = total = 0
    for predicted, target in predictions:
        total += 1
        if predicted is not UNRECOGNIZED and predicted == target:
            correct += 1
    return correct, total


@dataclass(frozen=True)
class ContingencyTable:
    """2 x k counts: correct and incorrect classifications per training level."""

    counts: tuple[tuple[int, ...], tuple[int, ...]]

    def __post_init__(self) -> None:
        correct, incorrect = self.counts
        if len(correct) != len(incorrect) or len(correct) < 2:
            raise ValueError("table needs two rows of equal length >= 2")
        if any(c < 0 for row in self.counts for c in row):
            raise ValueError("counts must be non-negative")

    @classmethod
    def from_level_counts(cls, correct: Sequence[int], totals: Sequence[int]) -> "ContingencyTable":
        if any(c > n for c, n in zip(correct, totals)):
            raise ValueError("correct count exceeds total")
        incorrect = tuple(n - c for c, n in zip(correct, totals))
        return cls(counts=(tuple(correct), incorrect))

    @property
    def k(self) -> int:
        return len(self.counts[0])


def chi_squared_statistic(table: ContingencyTable) -> tuple[float, int]:
    """Pearson statistic of independence and its degrees of freedom.

    Expected cell counts are row_total * col_total / grand_total; no
    continuity correction is applied.
    """
    observed = np.asarray(table.counts, dtype=float)
    row_totals = observed.sum(axis=1)
    col_totals = observed.sum(axis=0)
    grand = observed.sum()
    if np.any(row_totals == 0) or np.any(col_totals == 0):
        raise DegenerateTableError("degenerate table: zero row or column total")
    expected = np.outer(row_totals, col_totals) / grand
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    df = (observed.shape[0] - 1) * (observed.shape[1] - 1)
    return chi2, df


def _upper_gamma_series(a: float, x: float) -> float:
    # P(a, x) by power series (DLMF 8.11.4); returns Q = 1 - P.
    term = 1.0 / a
    total = term
    n = a
    for _ in range(1000):
        n += 1.0
        term *= x / n
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    p = total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    return 1.0 - p


def _upper_gamma_contfrac(a: float, x: float) -> float:
    # Q(a, x) by the Lentz-evaluated continued fraction (DLMF 8.9.2).
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
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
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_upper_gamma(a: float, x: float) -> float:
    """Q(a, x) = Gamma(a, x) / Gamma(a) for a > 0, x >= 0."""
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x < 0:
        raise ValueError("argument must be non-negative")
    if x == 0.0:
        return 1.0
    # Series converges fastest for x < a + 1, the continued fraction beyond.
    if x < a + 1.0:
        return min(1.0, max(0.0, _upper_gamma_series(a, x)))
    return min(1.0, max(0.0, _upper_gamma_contfrac(a, x)))


def chi_squared_pvalue(chi2: float, df: int) -> float:
    """Upper-tail probability of the chi-squared distribution.

    For df = 2 this equals exp(-chi2/2) exactly, which the tests use as a
    closed-form cross-check of the incomplete-gamma path.
    """
    if df < 1:
        raise ValueError(f"invalid degrees of freedom: {df}")
    if chi2 < 0:
        raise ValueError("statistic must be non-negative")
    return regularized_upper_gamma(df / 2.0, chi2 / 2.0)


def chi_squared_test(table: ContingencyTable) -> tuple[float, int, float]:
    chi2, df = chi_squared_statistic(table)
    return chi2, df, chi_squared_pvalue(chi2, df)


def two_proportion_test(c1: int, n1: int, c2: int, n2: int) -> float:
    """Two-sided pooled two-proportion z-test p-value."""
    if not (0 <= c1 <= n1 and 0 <= c2 <= n2) or n1 == 0 or n2 == 0:
        raise ValueError("counts must satisfy 0 <= c <= n with n > 0")
    p1, p2 = c1 / n1, c2 / n2
    pooled = (c1 + c2) / (n1 + n2)
    if pooled in (0.0, 1.0):
        # Both proportions are forced equal; no evidence of a difference.
        return 1.0
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    z = (p1 - p2) / se
    return math.erfc(abs(z) / math.sqrt(2.0))


@dataclass(frozen=True)
class PhraseSummary:
    """Per-phrase correctness at each training level."""

    phrase_id: int
    correct: tuple[int, ...]
    trials: tuple[int, ...]

    @property
    def percent(self) -> tuple[float, ...]:
        return tuple(100.0 * c / n for c, n in zip(self.correct, self.trials))


def summarize(percent_by_level: Mapping[int, Sequence[float]], expected: int = 16) -> dict[int, tuple[float, float]]:
    """Mean and sample (n-1) standard deviation of the per-phrase percentages.

    Raises if any level is missing a phrase, since a partial column would
    silently shift the average.
    """
    out: dict[int, tuple[float, float]] = {}
    for level, percents in percent_by_level.items():
        if len(percents) != expected:
            raise ValueError(f"level {level}: expected {expected} phrase percentages, got {len(percents)}")
        arr = np.asarray(percents, dtype=float)
        out[level] = (float(arr.mean()), float(arr.std(ddof=1)))
    return out
