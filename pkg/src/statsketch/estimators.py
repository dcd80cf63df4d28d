"""Threshold and rate estimators with (epsilon, delta) PAC guarantees.

Everything here reduces to one binomial tail computed in log space:

    T(n, h, eps) = sum_{i=0}^{h} C(n, i) eps^i (1 - eps)^(n - i)

The mistake budget k is the largest h with T(n, h, eps) <= delta.  The
threshold estimate then sits just above the (k+1)-th largest calibration
score, so that with probability at least 1 - delta over the draw of the
calibration set, the true mass above the threshold is at most eps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

__all__ = [
    "EstimatorConfig",
    "binom_tail_log",
    "compute_k",
    "empirical_loss",
    "threshold_estimate",
    "lower_bound_estimate",
    "verify_indicator",
]

# Fallback margin when there is no larger sample to split the gap with.
_GAMMA_FLOOR = 1e-9


def _check_eps(eps: float) -> None:
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")


def _check_delta(delta: float) -> None:
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _log_terms(n: int, h: int, eps: float):
    """Yield log of C(n, i) eps^i (1-eps)^(n-i) for i = 0..h."""
    log_eps = math.log(eps)
    log_1m = math.log1p(-eps)
    lg_n1 = math.lgamma(n + 1)
    for i in range(h + 1):
        yield (
            lg_n1
            - math.lgamma(i + 1)
            - math.lgamma(n - i + 1)
            + i * log_eps
            + (n - i) * log_1m
        )


def binom_tail_log(n: int, h: int, eps: float) -> float:
    """Log of the lower binomial tail P[Binom(n, eps) <= h].

    Summed in log space with a running log-sum-exp so large n stays finite.
    """
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    if not (0 <= h <= n):
        raise ValueError(f"h must lie in [0, {n}], got {h}")
    _check_eps(eps)
    acc = -math.inf
    for term in _log_terms(n, h, eps):
        if acc == -math.inf:
            acc = term
        elif term > acc:
            acc = term + math.log1p(math.exp(acc - term))
        else:
            acc = acc + math.log1p(math.exp(term - acc))
    return min(acc, 0.0)


def compute_k(n: int, eps: float, delta: float) -> Optional[int]:
    """Largest h with P[Binom(n, eps) <= h] <= delta, or None if h=0 already fails.

    None is the NotExists case: not even a zero-mistake budget is safe at
    this sample size.  When a budget exists it is always < n for delta < 1.
    """
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    _check_eps(eps)
    _check_delta(delta)
    if n == 0:
        return None
    log_delta = math.log(delta)
    acc = -math.inf
    k: Optional[int] = None
    for h, term in enumerate(_log_terms(n, n - 1, eps)):
        if acc == -math.inf:
            acc = term
        elif term > acc:
            acc = term + math.log1p(math.exp(acc - term))
        else:
            acc = acc + math.log1p(math.exp(term - acc))
        if acc <= log_delta:
            k = h
        else:
            break
    return k


def _check_scores(scores: Sequence[float]) -> None:
    for z in scores:
        if math.isnan(z):
            raise ValueError("scores must not contain NaN")


def empirical_loss(scores: Sequence[float], t: float) -> int:
    """Number of scores strictly above t."""
    _check_scores(scores)
    return sum(1 for z in scores if z > t)


@dataclass(frozen=True)
class EstimatorConfig:
    """Parameters for one threshold estimate.

    gamma overrides the tie-breaking margin policy; it receives the scores
    sorted descending and the index k, and must return a positive margin
    small enough not to cross the next larger sample.  k_zero forces the
    conservative zero-mistake budget used as a baseline.
    """

    epsilon: float
    delta: float
    gamma: Callable[[Sequence[float], int], float] | None = None
    k_zero: bool = False

    def __post_init__(self) -> None:
        _check_eps(self.epsilon)
        _check_delta(self.delta)


def _default_gamma(sorted_desc: Sequence[float], k: int) -> float:
    """Half the gap to the next strictly larger sample, else a tiny floor."""
    v = sorted_desc[k]
    i = k - 1
    while i >= 0 and sorted_desc[i] == v:
        i -= 1
    if i >= 0 and math.isfinite(sorted_desc[i]) and math.isfinite(v):
        return (sorted_desc[i] - v) / 2.0
    return _GAMMA_FLOOR * (1.0 + abs(v))


def threshold_estimate(scores: Sequence[float], cfg: EstimatorConfig) -> float:
    """Smallest threshold tolerating at most k calibration scores above it.

    Returns +inf when no mistake budget exists for (len(scores), epsilon,
    delta); that fill is sound but maximally conservative.  Sentinel scores
    of -inf (vacuous samples) and +inf are allowed.
    """
    _check_scores(scores)
    n = len(scores)
    k = compute_k(n, cfg.epsilon, cfg.delta)
    if cfg.k_zero and k is not None:
        k = 0
    if k is None or k + 1 > n:
        return math.inf
    sorted_desc = sorted(scores, reverse=True)
    v = sorted_desc[k]
    if v == -math.inf or v == math.inf:
        return v
    gamma_fn = cfg.gamma or _default_gamma
    gamma = gamma_fn(sorted_desc, k)
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return v + gamma


def lower_bound_estimate(bits: Sequence[int], delta: float) -> float:
    """One-sided Hoeffding lower confidence bound on a Bernoulli mean.

    With probability at least 1 - delta the true mean is no smaller than
    the returned value, which is clamped to 0.
    """
    _check_delta(delta)
    n = len(bits)
    if n == 0:
        raise ValueError("need at least one sample")
    for b in bits:
        if b not in (0, 1, True, False):
            raise ValueError(f"bits must be 0/1, got {b!r}")
    mean = sum(bits) / n
    return max(0.0, mean - math.sqrt(math.log(1.0 / delta) / (2.0 * n)))


def verify_indicator(bits: Sequence[int], eps: float, delta: float) -> bool:
    """Accept iff the number of zero bits is within the mistake budget.

    A False answer is always safe to report; a True answer asserts the
    underlying satisfaction rate is at least 1 - eps, wrongly so with
    probability at most delta.  No budget (NotExists) means reject.
    """
    for b in bits:
        if b not in (0, 1, True, False):
            raise ValueError(f"bits must be 0/1, got {b!r}")
    k = compute_k(len(bits), eps, delta)
    if k is None:
        return False
    failures = sum(1 for b in bits if not b)
    return failures <= k
