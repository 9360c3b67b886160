"""Distribution families required by the samplers.

Only the families the MCMC blocks actually draw from live here: the
standardized Student-t (variance fixed at sigma^2 for any degrees of
freedom > 2), a truncated gamma for the degrees-of-freedom prior, and a
thin Dirichlet wrapper. All gamma parameters are (shape, rate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import NumericalError

__all__ = [
    "StandardizedT",
    "TruncatedGamma",
    "sample_standardized_t",
    "pdf_standardized_t",
    "logpdf_standardized_t",
    "sample_truncated_gamma",
    "truncated_gamma_logpdf",
    "truncated_gamma_pdf",
    "sample_dirichlet",
]


@dataclass(frozen=True)
class StandardizedT:
    """Student t rescaled so its variance equals `variance` for any dof > 2."""

    mean: float
    variance: float
    dof: float

    def __post_init__(self):
        if not self.dof > 2.0:
            raise ValueError(f"dof must exceed 2 (got {self.dof})")
        if not self.variance > 0.0:
            raise ValueError(f"variance must be positive (got {self.variance})")


@dataclass(frozen=True)
class TruncatedGamma:
    """Gamma(shape, rate) with mass renormalized to [lower, upper]."""

    shape: float
    rate: float
    lower: float = 0.0
    upper: float = np.inf

    def __post_init__(self):
        if not self.shape > 0.0 or not self.rate > 0.0:
            raise ValueError("shape and rate must be positive")
        if not self.lower < self.upper:
            raise ValueError("lower bound must be below upper bound")

    def interval_mass(self) -> float:
        lo = special.gammainc(self.shape, self.rate * max(self.lower, 0.0))
        hi = (
            1.0
            if np.isinf(self.upper)
            else special.gammainc(self.shape, self.rate * self.upper)
        )
        return hi - lo


def sample_standardized_t(dist, rng, size=None):
    """Draw from the standardized t via its normal scale-mixture.

    xi ~ Gamma(nu/2, rate=(nu-2)/2), then x ~ N(mean, variance/xi). The
    rate (nu-2)/2 is what pins the variance at `variance` regardless of nu.
    """
    xi = rng.gamma(dist.dof / 2.0, 2.0 / (dist.dof - 2.0), size=size)
    return rng.normal(dist.mean, np.sqrt(dist.variance / xi))


def logpdf_standardized_t(x, dist):
    """Log density of the standardized t (analytic, not the mixture integral)."""
    s = np.sqrt(dist.variance * (dist.dof - 2.0) / dist.dof)
    z = (np.asarray(x, dtype=float) - dist.mean) / s
    nu = dist.dof
    return (
        special.gammaln((nu + 1.0) / 2.0)
        - special.gammaln(nu / 2.0)
        - 0.5 * np.log(nu * np.pi)
        - np.log(s)
        - (nu + 1.0) / 2.0 * np.log1p(z * z / nu)
    )


def pdf_standardized_t(x, dist):
    return np.exp(logpdf_standardized_t(x, dist))


def sample_truncated_gamma(dist, rng, size=None):
    """Draw from a gamma restricted to [lower, upper].

    Rejection from the untruncated gamma when the interval holds at least
    10% of the mass; inverse-CDF on the renormalized distribution otherwise
    (guaranteed termination in the tail case).
    """
    mass = dist.interval_mass()
    if mass < 1e-12:
        raise NumericalError(
            f"truncation interval [{dist.lower}, {dist.upper}] has mass {mass:.3g}"
        )
    scalar = size is None
    n = 1 if scalar else int(np.prod(size))
    if mass >= 0.1:
        out = np.empty(n)
        filled = 0
        while filled < n:
            # oversample to cover expected rejections
            want = n - filled
            batch = max(16, int(want / mass * 1.5))
            draws = rng.gamma(dist.shape, 1.0 / dist.rate, size=batch)
            keep = draws[(draws >= dist.lower) & (draws <= dist.upper)]
            take = min(len(keep), want)
            out[filled : filled + take] = keep[:take]
            filled += take
    else:
        lo = special.gammainc(dist.shape, dist.rate * max(dist.lower, 0.0))
        u = rng.uniform(lo, lo + mass, size=n)
        out = special.gammaincinv(dist.shape, u) / dist.rate
        out = np.clip(out, dist.lower, dist.upper)
    if scalar:
        return float(out[0])
    return out.reshape(size)


def truncated_gamma_logpdf(x, dist):
    x = np.asarray(x, dtype=float)
    mass = dist.interval_mass()
    if mass < 1e-12:
        raise NumericalError("degenerate truncation interval")
    logp = (
        dist.shape * np.log(dist.rate)
        - special.gammaln(dist.shape)
        + (dist.shape - 1.0) * np.log(x)
        - dist.rate * x
        - np.log(mass)
    )
    return np.where((x >= dist.lower) & (x <= dist.upper), logp, -np.inf)


def truncated_gamma_pdf(x, dist):
    return np.exp(truncated_gamma_logpdf(x, dist))


def sample_dirichlet(weights, rng):
    """Dirichlet draw with explicit renormalization to the simplex."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or np.any(w <= 0.0):
        raise ValueError("Dirichlet weights must be a non-empty positive sequence")
    draw = rng.dirichlet(w)
    return draw / draw.sum()
