"""Model parameterization, stability, conditional densities and simulation.

A tMAR(g; p_1..p_g) process: the conditional distribution of y_t given the
past is a g-component mixture whose k-th component is a standardized
Student-t located at the AR predictor phi_k0 + sum_i phi_ki y_{t-i}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .distributions import StandardizedT, logpdf_standardized_t
from .errors import NumericalError

# AR coefficients live in this box; it is both the birth-move proposal
# support and the reference domain of the (stability-restricted) flat prior.
PHI_BOUND = 1.5

STABILITY_EPS = 1e-10


@dataclass
class TMarSpec:
    """Full tMAR parameterization.

    weights: mixing probabilities (simplex, length g)
    means: component means mu_k (shift phi_k0 = mu_k * (1 - sum_i phi_ki))
    ar_coeffs: per-component AR coefficient vectors, possibly of unequal length
    scales: component standard deviations sigma_k
    dofs: degrees of freedom nu_k, each in (2, 30]
    """

    weights: np.ndarray
    means: np.ndarray
    ar_coeffs: list
    scales: np.ndarray
    dofs: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.scales = np.asarray(self.scales, dtype=float)
        self.dofs = np.asarray(self.dofs, dtype=float)
        self.ar_coeffs = [np.atleast_1d(np.asarray(c, dtype=float)) for c in self.ar_coeffs]
        g = len(self.weights)
        if not (len(self.means) == len(self.ar_coeffs) == len(self.scales) == len(self.dofs) == g):
            raise ValueError("inconsistent component counts across parameter blocks")
        if np.any(self.weights <= 0.0) or abs(self.weights.sum() - 1.0) > 1e-8:
            raise ValueError("weights must be positive and sum to 1")
        if np.any(self.scales <= 0.0):
            raise ValueError("scales must be positive")
        if np.any(self.dofs <= 2.0) or np.any(self.dofs > 30.0):
            raise ValueError("degrees of freedom must lie in (2, 30]")

    @property
    def g(self) -> int:
        return len(self.weights)

    @property
    def orders(self) -> tuple:
        return tuple(len(c) for c in self.ar_coeffs)

    @property
    def p(self) -> int:
        return max(self.orders) if self.orders else 0

    @property
    def taus(self) -> np.ndarray:
        return 1.0 / self.scales**2

    def phi_matrix(self) -> np.ndarray:
        """g x p coefficient matrix, zero-padded for p_k < p."""
        out = np.zeros((self.g, self.p))
        for k, c in enumerate(self.ar_coeffs):
            out[k, : len(c)] = c
        return out

    def intercepts(self) -> np.ndarray:
        """Shifts phi_k0 = mu_k * (1 - sum_i phi_ki)."""
        b = np.array([1.0 - c.sum() for c in self.ar_coeffs])
        return self.means * b


@dataclass
class StabilityReport:
    stable: bool
    spectral_radius: float
    per_component_stable: np.ndarray = field(default_factory=lambda: np.array([], bool))


@dataclass
class LatentState:
    """Per-time-point allocations z_t and precision multipliers xi_t (t = p+1..n)."""

    allocations: np.ndarray
    xis: np.ndarray

    def __post_init__(self):
        self.allocations = np.asarray(self.allocations, dtype=int)
        self.xis = np.asarray(self.xis, dtype=float)
        if len(self.allocations) != len(self.xis):
            raise ValueError("allocations and xis must have equal length")
        if np.any(self.xis <= 0.0):
            raise ValueError("xi values must be positive")


def companion_matrix(spec: TMarSpec, k: int) -> np.ndarray:
    """p x p companion matrix of component k (0-based), zero-padded to max order."""
    p = spec.p
    if p == 0:
        raise ValueError("order-0 model has no companion matrix")
    if not 0 <= k < spec.g:
        raise ValueError(f"component index {k} out of range")
    A = np.zeros((p, p))
    A[0, :] = spec.phi_matrix()[k]
    if p > 1:
        A[1:, :-1] = np.eye(p - 1)
    return A


def spectral_radius_raw(weights, coeff_rows, p) -> float:
    """Spectral radius of sum_k pi_k A_k (x) A_k, from a padded g x p array."""
    if p == 0:
        return 0.0
    weights = np.asarray(weights, dtype=float)
    coeff_rows = np.atleast_2d(np.asarray(coeff_rows, dtype=float))
    if p == 1:
        # the Kronecker matrix is the scalar sum_k pi_k phi_k1^2
        return float(weights @ coeff_rows[:, 0] ** 2)
    g = len(weights)
    Aks = np.zeros((g, p, p))
    Aks[:, 0, :] = coeff_rows
    Aks[:, 1:, :-1] = np.eye(p - 1)
    A = np.einsum("k,kij,klm->iljm", weights, Aks, Aks).reshape(p * p, p * p)
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    return float(np.max(np.abs(eig)))


def is_stable_raw(weights, coeff_rows, p) -> bool:
    return spectral_radius_raw(weights, coeff_rows, p) < 1.0 - STABILITY_EPS


def stability_check(spec: TMarSpec) -> StabilityReport:
    """Stability of the mixture via the Kronecker-sum matrix A.

    All components individually stable is sufficient but not necessary:
    the mixture can be stable with one explosive component.
    """
    p = spec.p
    if p == 0:
        return StabilityReport(True, 0.0, np.ones(spec.g, dtype=bool))
    rows = spec.phi_matrix()
    radius = spectral_radius_raw(spec.weights, rows, p)
    per_comp = np.empty(spec.g, dtype=bool)
    for k in range(spec.g):
        try:
            eig = np.linalg.eigvals(companion_matrix(spec, k))
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
        per_comp[k] = np.max(np.abs(eig)) < 1.0 - STABILITY_EPS
    return StabilityReport(radius < 1.0 - STABILITY_EPS, radius, per_comp)


def _component_means(spec: TMarSpec, history) -> np.ndarray:
    """AR predictors mu_tk given history (last element = y_{t-1})."""
    history = np.asarray(history, dtype=float)
    p = spec.p
    if len(history) < p:
        raise ValueError(f"history of length {len(history)} shorter than max order {p}")
    lags = history[::-1][:p] if p else np.empty(0)
    return spec.intercepts() + spec.phi_matrix() @ lags


def conditional_density(spec: TMarSpec, y_t: float, history) -> float:
    """One-step conditional mixture density f(y_t | history)."""
    mus = _component_means(spec, history)
    dens = 0.0
    for k in range(spec.g):
        comp = StandardizedT(mus[k], spec.scales[k] ** 2, spec.dofs[k])
        dens += spec.weights[k] * np.exp(logpdf_standardized_t(y_t, comp))
    return float(dens)


def conditional_moments(spec: TMarSpec, history) -> tuple:
    """Conditional mean and variance of y_t given history."""
    mus = _component_means(spec, history)
    pi = spec.weights
    mean = float(pi @ mus)
    var = float(pi @ spec.scales**2 + pi @ mus**2 - mean**2)
    return mean, var


def mixture_loglik(spec: TMarSpec, y: np.ndarray, cond: int | None = None) -> float:
    """Log of the latent-marginalized likelihood prod_t f(y_t | past).

    Conditions on the first `cond` observations (default: the model's max
    order). Vectorized over time points.
    """
    y = np.asarray(y, dtype=float)
    p = spec.p
    cond = p if cond is None else int(cond)
    if cond < p:
        raise ValueError("conditioning window shorter than the model order")
    n = len(y)
    yobs = y[cond:]
    m = n - cond
    phi = spec.phi_matrix()
    X = np.empty((m, p))
    for i in range(p):
        X[:, i] = y[cond - 1 - i : n - 1 - i]
    mus = spec.intercepts()[None, :] + (X @ phi.T if p else 0.0)
    e = yobs[:, None] - mus
    nu = spec.dofs[None, :]
    s = np.sqrt(spec.scales**2 * (spec.dofs - 2.0) / spec.dofs)[None, :]
    z = e / s
    logpdf = (
        special.gammaln((nu + 1.0) / 2.0)
        - special.gammaln(nu / 2.0)
        - 0.5 * np.log(nu * np.pi)
        - np.log(s)
        - (nu + 1.0) / 2.0 * np.log1p(z * z / nu)
    )
    rows = logpdf + np.log(spec.weights)[None, :]
    if rows.shape[1] == 1:
        return float(rows.sum())
    m = rows.max(axis=1)
    return float(m.sum() + np.log(np.exp(rows - m[:, None]).sum(axis=1)).sum())


def theoretical_acf(spec: TMarSpec, max_lag: int) -> np.ndarray:
    """Autocorrelations rho_0..rho_max_lag from the mixture Yule-Walker recursion.

    rho_h = sum_i c_i rho_|h-i| with c_i = sum_k pi_k phi_ki; rho_1..rho_p
    solved as a linear system with rho_{-h} = rho_h, then forward recursion.
    """
    if not stability_check(spec).stable:
        raise ValueError("theoretical ACF requires a stable specification")
    p = spec.p
    rho = np.zeros(max_lag + 1)
    rho[0] = 1.0
    if p == 0 or max_lag == 0:
        return rho[: max_lag + 1]
    c = spec.weights @ spec.phi_matrix()
    M = np.eye(p)
    rhs = np.zeros(p)
    for h in range(1, p + 1):
        for i in range(1, p + 1):
            lag = abs(h - i)
            if lag == 0:
                rhs[h - 1] += c[i - 1]
            else:
                M[h - 1, lag - 1] -= c[i - 1]
    try:
        head = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular Yule-Walker system: {exc}") from exc
    rho[1 : min(p, max_lag) + 1] = head[: min(p, max_lag)]
    for h in range(p + 1, max_lag + 1):
        rho[h] = sum(c[i - 1] * rho[h - i] for i in range(1, p + 1))
    return rho


def simulate_series(spec: TMarSpec, n: int, burnin: int, rng) -> tuple:
    """Simulate n observations of the process, discarding `burnin` initial steps.

    Returns (series, LatentState) where the latents cover t = p+1..n of the
    returned series. The first p values are drawn N(0, average component
    variance); burnin removes the initialization bias.
    """
    p = spec.p
    if n < p + 1:
        raise ValueError(f"need n >= p+1 = {p + 1}")
    report = stability_check(spec)
    if not report.stable:
        warnings.warn(
            f"specification is unstable (spectral radius {report.spectral_radius:.4g}); "
            "simulating an explosive path",
            RuntimeWarning,
        )
    total = n + burnin
    var0 = float(spec.weights @ spec.scales**2)
    y = np.empty(p + total)
    y[:p] = rng.normal(0.0, np.sqrt(var0), size=p)
    ks = rng.choice(spec.g, size=total, p=spec.weights)
    xis = rng.gamma(spec.dofs[ks] / 2.0, 2.0 / (spec.dofs[ks] - 2.0))
    eps = rng.normal(0.0, spec.scales[ks] / np.sqrt(xis))
    phi = spec.phi_matrix()
    phi0 = spec.intercepts()
    for t in range(total):
        k = ks[t]
        i = p + t
        hist = y[i - p : i][::-1] if p else np.empty(0)
        y[i] = phi0[k] + phi[k] @ hist + eps[t]
        if not np.isfinite(y[i]):
            raise NumericalError(f"non-finite value at simulation step {t}")
    series = y[p + burnin :]
    # latents aligned with t = p+1..n of the returned series
    latents = LatentState(ks[burnin + p :], xis[burnin + p :])
    return series, latents
