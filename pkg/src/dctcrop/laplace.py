"""Laplacian maximum-likelihood fit for AC coefficient samples.

For a Laplace(mu, beta) density 1/(2*beta) * exp(-|x - mu| / beta), the
MLE of mu is the sample median and the MLE of beta is the mean absolute
deviation from that median. beta = 0 is legal for constant samples and
is propagated, not raised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LaplaceFit:
    mu: float
    beta: float
    sample_count: int

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.beta)):
            raise ValueError("mu and beta must be finite")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")


def fit_laplace(samples) -> LaplaceFit:
    """Closed-form Laplacian MLE: median location, mean-absolute-deviation scale.

    Samples are sorted first so the result is bit-identical under any
    permutation of the input.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("cannot fit a Laplacian to an empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples contain non-finite values")
    xs = np.sort(x)
    n = xs.size
    mu = 0.5 * (xs[(n - 1) // 2] + xs[n // 2])
    beta = float(np.mean(np.abs(xs - mu)))
    return LaplaceFit(mu=float(mu), beta=beta, sample_count=int(n))


def laplace_log_likelihood(fit: LaplaceFit, samples) -> float:
    """Sum over samples of -log(2*beta) - |x - mu| / beta."""
    if fit.beta <= 0:
        raise ValueError("log-likelihood undefined for beta = 0")
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("samples must be non-empty")
    return float(-x.size * np.log(2.0 * fit.beta) - np.sum(np.abs(x - fit.mu)) / fit.beta)
