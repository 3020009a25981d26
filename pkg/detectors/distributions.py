"""
One-Tailed Distribution Tails

Upper tails used by the surveillance algorithms. Discrete tails are inclusive,
P(X >= c): the probability of observing c or more cases.

All functions accept scalars or numpy arrays and broadcast; scalar input gives
a float back.
"""

from typing import Union

import numpy as np
from scipy import stats

from utils.errors import DomainError

ArrayLike = Union[float, int, np.ndarray]


def _as_output(values: np.ndarray, scalar: bool):
    values = np.clip(values, 0.0, 1.0)
    return float(values) if scalar else values


def gaussian_upper_tail(x: ArrayLike, mu: ArrayLike, sigma2: ArrayLike):
    """
    P(X >= x) for X ~ N(mu, sigma2)

    A zero variance collapses the distribution onto mu: the tail is 1 when
    x <= mu and 0 otherwise.

    Raises:
        DomainError: if any sigma2 < 0
    """
    scalar = np.ndim(x) == 0 and np.ndim(mu) == 0 and np.ndim(sigma2) == 0
    x, mu, sigma2 = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(mu, dtype=float), np.asarray(sigma2, dtype=float)
    )
    if np.any(sigma2 < 0):
        raise DomainError("gaussian_upper_tail", "sigma2", float(np.min(sigma2)))

    degenerate = sigma2 == 0
    sd = np.sqrt(np.where(degenerate, 1.0, sigma2))
    p = stats.norm.sf(x, loc=mu, scale=sd)
    p = np.where(degenerate, np.where(x <= mu, 1.0, 0.0), p)
    return _as_output(p, scalar)


def standard_normal_upper_tail(z: ArrayLike):
    """1 - Phi(z); +inf maps to 0 and -inf to 1"""
    scalar = np.ndim(z) == 0
    return _as_output(stats.norm.sf(np.asarray(z, dtype=float)), scalar)


def poisson_upper_tail(c: ArrayLike, lam: ArrayLike):
    """
    P(X >= c) for X ~ Poisson(lam)

    Raises:
        DomainError: if any lam <= 0
    """
    scalar = np.ndim(c) == 0 and np.ndim(lam) == 0
    c, lam = np.broadcast_arrays(np.asarray(c, dtype=float), np.asarray(lam, dtype=float))
    if np.any(lam <= 0):
        raise DomainError("poisson_upper_tail", "lambda", float(np.min(lam)))

    # sf(c - 1) = P(X > c - 1) = P(X >= c); c <= 0 covers the whole support
    p = np.where(c <= 0, 1.0, stats.poisson.sf(c - 1, lam))
    return _as_output(p, scalar)


def poisson_pmf(c: ArrayLike, lam: ArrayLike):
    """Poisson probability mass at c"""
    scalar = np.ndim(c) == 0 and np.ndim(lam) == 0
    p = stats.poisson.pmf(np.asarray(c, dtype=float), np.asarray(lam, dtype=float))
    return _as_output(np.asarray(p), scalar)


def negbin_upper_tail(c: ArrayLike, size: ArrayLike, prob: ArrayLike):
    """
    P(X >= c) for the negative binomial with

        pmf(k) = Gamma(k + size) / (Gamma(size) k!) * prob^size * (1 - prob)^k

    i.e. mean size * (1 - prob) / prob. size may be any positive real.

    Raises:
        DomainError: if size <= 0 or prob outside (0, 1)
    """
    scalar = np.ndim(c) == 0 and np.ndim(size) == 0 and np.ndim(prob) == 0
    c, size, prob = np.broadcast_arrays(
        np.asarray(c, dtype=float), np.asarray(size, dtype=float), np.asarray(prob, dtype=float)
    )
    if np.any(size <= 0):
        raise DomainError("negbin_upper_tail", "size", float(np.min(size)))
    bad = (prob <= 0) | (prob >= 1)
    if np.any(bad):
        raise DomainError("negbin_upper_tail", "prob", float(prob[bad].flat[0]))

    p = np.where(c <= 0, 1.0, stats.nbinom.sf(c - 1, size, prob))
    return _as_output(p, scalar)


def negbin_pmf(c: ArrayLike, size: ArrayLike, prob: ArrayLike):
    """Negative binomial probability mass at c (same parametrisation as the tail)"""
    scalar = np.ndim(c) == 0 and np.ndim(size) == 0 and np.ndim(prob) == 0
    p = stats.nbinom.pmf(
        np.asarray(c, dtype=float), np.asarray(size, dtype=float), np.asarray(prob, dtype=float)
    )
    return _as_output(np.asarray(p), scalar)
