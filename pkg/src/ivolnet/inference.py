"""Hypothesis tests on covariation estimates and multiple-testing control."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError


@dataclass(frozen=True)
class TestResult:
    """Outcome of one test; ``valid`` is False when the variance estimate
    was unusable (non-positive or singular), in which case the p-value is NaN."""

    statistic: float
    p_value: float
    standard_error: float
    dof: int = 1
    valid: bool = True


def t_test_quadcov(
    estimate: float, avar: float, delta_n: float, one_sided: bool = False
) -> TestResult:
    """t-test of a zero covariation against its estimated asymptotic variance.

    The statistic is delta_n^(-1/4) * estimate / sqrt(avar); two-sided
    normal p-values by default. A non-positive or non-finite variance
    estimate yields an invalid result with NaN p-value rather than a
    clamped one.
    """
    if not np.isfinite(avar) or avar <= 0.0 or not np.isfinite(estimate):
        return TestResult(np.nan, np.nan, np.nan, dof=1, valid=False)
    se = delta_n**0.25 * np.sqrt(avar)
    stat = estimate / se
    if one_sided:
        p = float(stats.norm.sf(stat))
    else:
        p = float(2.0 * stats.norm.sf(abs(stat)))
    return TestResult(float(stat), p, float(se), dof=1, valid=True)


def wald_test(vector_estimate: np.ndarray, sigma: np.ndarray, delta_n: float) -> TestResult:
    """Wald test of a zero covariation vector.

    The scaled vector delta_n^(-1/4) * v is quadratic-formed against the
    inverse covariance and compared to chi-square quantiles with dim(v)
    degrees of freedom; for a single component this reproduces the
    squared two-sided t-test exactly.
    """
    v = np.atleast_1d(np.asarray(vector_estimate, dtype=float))
    S = np.atleast_2d(np.asarray(sigma, dtype=float))
    k = v.shape[0]
    if S.shape != (k, k):
        raise DomainError(f"sigma shape {S.shape} incompatible with vector of length {k}")
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(S))):
        return TestResult(np.nan, np.nan, np.nan, dof=k, valid=False)
    try:
        solved = np.linalg.solve(S, v)
    except np.linalg.LinAlgError:
        return TestResult(np.nan, np.nan, np.nan, dof=k, valid=False)
    quad = float(v @ solved)
    if quad < 0.0 or not np.isfinite(quad):
        # indefinite finite-sample covariance estimate
        return TestResult(np.nan, np.nan, np.nan, dof=k, valid=False)
    stat = quad / np.sqrt(delta_n)
    p = float(stats.chi2.sf(stat, df=k))
    return TestResult(float(stat), p, np.nan, dof=k, valid=True)


@dataclass(frozen=True)
class FdrResult:
    """Step-up rejection decisions over a family of p-values."""

    reject: np.ndarray       # bool, aligned with the input; invalid entries False
    n_valid: int
    n_invalid: int
    q: float

    @property
    def n_rejected(self) -> int:
        return int(np.count_nonzero(self.reject))


def fdr_bh(p_values, q: float, dependent: bool = False) -> FdrResult:
    """Benjamini-Hochberg step-up control of the false discovery rate.

    NaN entries (invalid tests) are excluded from the family and reported;
    ``dependent=True`` applies the Benjamini-Yekutieli correction for
    arbitrary dependence.
    """
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise DomainError("p_values must be one-dimensional")
    valid = np.isfinite(p)
    if np.any((p[valid] < 0.0) | (p[valid] > 1.0)):
        raise DomainError("p-values must lie in [0, 1]")
    if not 0.0 < q < 1.0:
        raise DomainError("q must lie in (0, 1)")
    reject = np.zeros(p.shape[0], dtype=bool)
    m = int(np.count_nonzero(valid))
    if m == 0:
        return FdrResult(reject, 0, p.shape[0], q)
    pv = p[valid]
    order = np.argsort(pv, kind="stable")
    level = q / (np.sum(1.0 / np.arange(1, m + 1)) if dependent else 1.0)
    cutoffs = level * np.arange(1, m + 1) / m
    passed = pv[order] <= cutoffs
    if np.any(passed):
        kmax = int(np.max(np.nonzero(passed)[0]))
        rej_sorted = np.zeros(m, dtype=bool)
        rej_sorted[order[: kmax + 1]] = True
        reject[valid] = rej_sorted
    return FdrResult(reject, m, p.shape[0] - m, q)
