"""Data-augmented MCMC for the tMAR model.

One sweep updates, in fixed order: allocations z, precision multipliers xi,
mixing weights pi, component means mu, precisions tau and their hyperprior
rate lambda, AR coefficients phi (random-walk MH), degrees of freedom nu
(independence MH from the prior).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .distributions import TruncatedGamma, sample_truncated_gamma
from .errors import NumericalError
from .model import PHI_BOUND, TMarSpec, is_stable_raw
from .priors import PriorConfig

_ADAPT_TARGET = 0.25


@dataclass
class GibbsSettings:
    iterations: int
    burnin: int
    gamma0: float = 0.1

    def __post_init__(self):
        if not self.iterations > self.burnin >= 0:
            raise ValueError("need iterations > burnin >= 0")


@dataclass
class ChainTrace:
    """Post-burnin draws of all parameter blocks plus acceptance bookkeeping."""

    g: int
    orders: tuple
    pi: np.ndarray
    mu: np.ndarray
    tau: np.ndarray
    nu: np.ndarray
    lam: np.ndarray
    phi: list
    loglik: np.ndarray
    phi_attempted: np.ndarray
    phi_accepted: np.ndarray
    nu_attempted: np.ndarray
    nu_accepted: np.ndarray
    gamma: np.ndarray
    fix_means_to_zero: bool = False

    def __len__(self):
        return len(self.lam)

    def acceptance_rates(self) -> dict:
        with np.errstate(invalid="ignore", divide="ignore"):
            return {
                "phi": self.phi_accepted / np.maximum(self.phi_attempted, 1),
                "nu": self.nu_accepted / np.maximum(self.nu_attempted, 1),
            }

    def parameter_names(self) -> list:
        names = [f"pi{k + 1}" for k in range(self.g)]
        if not self.fix_means_to_zero:
            names += [f"mu{k + 1}" for k in range(self.g)]
        names += [f"tau{k + 1}" for k in range(self.g)]
        for k, pk in enumerate(self.orders):
            names += [f"phi{k + 1}_{i + 1}" for i in range(pk)]
        names += [f"nu{k + 1}" for k in range(self.g)]
        names.append("lambda")
        return names

    def as_matrix(self) -> np.ndarray:
        cols = [self.pi]
        if not self.fix_means_to_zero:
            cols.append(self.mu)
        cols.append(self.tau)
        cols.extend(self.phi)
        cols.append(self.nu)
        cols.append(self.lam[:, None])
        return np.hstack(cols)

    def spec_at(self, j: int) -> TMarSpec:
        return TMarSpec(
            weights=self.pi[j],
            means=self.mu[j],
            ar_coeffs=[self.phi[k][j] for k in range(self.g)],
            scales=1.0 / np.sqrt(self.tau[j]),
            dofs=self.nu[j],
        )


class GibbsSampler:
    """Holds the full augmented state and performs per-block updates.

    `cond` is the number of initial observations conditioned on (defaults to
    the max AR order); the reversible-jump driver pins it at p_max so that
    likelihoods stay comparable across orders.

    `frozen` is a set of block tags excluded from the sweep: 'z', 'xi',
    'pi', 'mu', 'tau', plus per-component 'phi:0'.. and 'nu:0'.. (the
    evidence module's reduced chains rely on this).
    """

    def __init__(self, y, g, orders, priors: PriorConfig, rng,
                 cond=None, gamma0=0.1):
        self.y = np.asarray(y, dtype=float)
        self.g = int(g)
        self.orders = list(orders)
        if len(self.orders) != self.g or any(p < 0 for p in self.orders):
            raise ValueError("need one nonnegative order per component")
        self.priors = priors
        self.rng = rng
        self.n = len(self.y)
        p = max(self.orders) if self.orders else 0
        self.cond = p if cond is None else int(cond)
        if self.cond < p:
            raise ValueError("conditioning window shorter than the max order")
        self.m = self.n - self.cond
        if self.m < 1:
            raise ValueError("series too short for the requested orders")
        self.yobs = self.y[self.cond:]
        self.X = np.empty((self.m, self.cond))
        for i in range(self.cond):
            self.X[:, i] = self.y[self.cond - 1 - i : self.n - 1 - i]

        self.frozen: set = set()
        self.gamma = np.full(self.g, float(gamma0))
        self.phi_attempted = np.zeros(self.g, dtype=int)
        self.phi_accepted = np.zeros(self.g, dtype=int)
        self.nu_attempted = np.zeros(self.g, dtype=int)
        self.nu_accepted = np.zeros(self.g, dtype=int)

        self._initialize()

    # ------------------------------------------------------------------ state

    def _initialize(self, max_tries: int = 500):
        y, g, rng = self.y, self.g, self.rng
        self.pi = np.full(g, 1.0 / g)
        if self.priors.fix_means_to_zero:
            self.mu = np.zeros(g)
        else:
            self.mu = np.quantile(y, (np.arange(g) + 1.0) / (g + 1.0))
        self.tau = np.full(g, 1.0 / max(np.var(y), 1e-12))
        self.nu = np.full(g, 10.0)
        self.lam = self.priors.a / self.priors.b
        for _ in range(max_tries):
            phi = [rng.uniform(-0.5, 0.5, size=pk) for pk in self.orders]
            if self._stable_with(phi, self.pi):
                self.phi = phi
                break
        else:
            raise NumericalError("no stable initialization found")
        self.z = rng.choice(g, size=self.m, p=self.pi)
        self.xi = np.ones(self.m)

    def _stable_with(self, phi_list, pi) -> bool:
        p = max((len(c) for c in phi_list), default=0)
        if p == 0:
            return True
        rows = np.zeros((self.g, p))
        for k, c in enumerate(phi_list):
            rows[k, : len(c)] = c
        return is_stable_raw(pi, rows, p)

    def spec(self) -> TMarSpec:
        return TMarSpec(
            weights=self.pi.copy(),
            means=self.mu.copy(),
            ar_coeffs=[c.copy() for c in self.phi],
            scales=1.0 / np.sqrt(self.tau),
            dofs=self.nu.copy(),
        )

    def set_state(self, pi=None, mu=None, tau=None, nu=None, lam=None, phi=None):
        if pi is not None:
            self.pi = np.asarray(pi, dtype=float).copy()
        if mu is not None:
            self.mu = np.asarray(mu, dtype=float).copy()
        if tau is not None:
            self.tau = np.asarray(tau, dtype=float).copy()
        if nu is not None:
            self.nu = np.asarray(nu, dtype=float).copy()
        if lam is not None:
            self.lam = float(lam)
        if phi is not None:
            self.phi = [np.atleast_1d(np.asarray(c, dtype=float)).copy() for c in phi]
            self.orders = [len(c) for c in self.phi]

    # -------------------------------------------------------------- residuals

    def resid0(self, k: int) -> np.ndarray:
        """AR residual of component k with the mean removed (mu_k = 0)."""
        pk = self.orders[k]
        if pk == 0:
            return self.yobs
        return self.yobs - self.X[:, :pk] @ self.phi[k]

    def resid(self, k: int) -> np.ndarray:
        b = 1.0 - self.phi[k].sum()
        return self.resid0(k) - b * self.mu[k]

    def resid_matrix(self) -> np.ndarray:
        return np.column_stack([self.resid(k) for k in range(self.g)])

    # ---------------------------------------------------------------- updates

    def update_z(self, E=None):
        """Allocation full conditional given xi.

        The weight of component k is pi_k/sigma_k times the normal kernel at
        sd sigma_k/sqrt(xi_t), times the gamma density of xi_t under nu_k:
        the latter enters because the distribution of xi_t depends on the
        allocation, and dropping it breaks the joint posterior whenever the
        nu_k differ.
        """
        if E is None:
            E = self.resid_matrix()
        logw = (
            np.log(self.pi)[None, :]
            + 0.5 * np.log(self.tau)[None, :]
            - 0.5 * self.tau[None, :] * self.xi[:, None] * E * E
        )
        nu = self.nu[None, :]
        logw += (
            nu / 2.0 * np.log((nu - 2.0) / 2.0)
            - special.gammaln(nu / 2.0)
            + (nu / 2.0 - 1.0) * np.log(self.xi)[:, None]
            - (nu - 2.0) / 2.0 * self.xi[:, None]
        )
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        cdf = np.cumsum(w, axis=1)
        u = self.rng.uniform(size=self.m) * cdf[:, -1]
        self.z = (u[:, None] > cdf).sum(axis=1)

    def allocation_probabilities(self) -> np.ndarray:
        """Exact per-t allocation probabilities under the current state."""
        E = self.resid_matrix()
        logw = (
            np.log(self.pi)[None, :]
            + 0.5 * np.log(self.tau)[None, :]
            - 0.5 * self.tau[None, :] * self.xi[:, None] * E * E
        )
        nu = self.nu[None, :]
        logw += (
            nu / 2.0 * np.log((nu - 2.0) / 2.0)
            - special.gammaln(nu / 2.0)
            + (nu / 2.0 - 1.0) * np.log(self.xi)[:, None]
            - (nu - 2.0) / 2.0 * self.xi[:, None]
        )
        logw -= special.logsumexp(logw, axis=1, keepdims=True)
        return np.exp(logw)

    def update_xi(self, E=None):
        """xi_t ~ Gamma((nu_k+1)/2, rate tau_k e_tk^2/2 + (nu_k-2)/2), k = z_t."""
        if E is None:
            E = self.resid_matrix()
        e = E[np.arange(self.m), self.z]
        nu_z = self.nu[self.z]
        tau_z = self.tau[self.z]
        shape = (nu_z + 1.0) / 2.0
        rate = tau_z * e * e / 2.0 + (nu_z - 2.0) / 2.0
        assert np.all(rate > 0.0)
        self.xi = self.rng.gamma(shape, 1.0 / rate)

    def counts(self) -> np.ndarray:
        return np.bincount(self.z, minlength=self.g)

    def update_pi(self, max_tries: int = 1000):
        """pi ~ Dirichlet(w + n), rejected into the stability region.

        The flat prior on phi is an indicator of joint (pi, phi) stability,
        so the pi conditional is the conjugate Dirichlet truncated to weights
        keeping the current phi stable; rejection sampling draws from it
        exactly. If the region is so tight that no draw lands in it, the
        current value is kept (a valid, if sticky, MH fallback).
        """
        alpha = self.priors.dirichlet_weights + self.counts()
        for _ in range(max_tries):
            cand = self.rng.dirichlet(alpha)
            if self._stable_with(self.phi, cand):
                self.pi = cand
                return
        # fall back to the current weights

    def mu_conditional_params(self) -> tuple:
        """Posterior (mean, sd) of each mu_k given the rest of the state.

        Residuals enter with mu_k = 0 (raw AR residuals), which makes the
        conditional a proper function of the remaining parameters.
        """
        pri = self.priors
        means = np.empty(self.g)
        sds = np.empty(self.g)
        for k in range(self.g):
            mask = self.z == k
            r = self.resid0(k)[mask]
            xi_k = self.xi[mask]
            d = float(xi_k.sum())
            s = float(xi_k @ r)
            b = 1.0 - self.phi[k].sum()
            prec = self.tau[k] * b * b * d + pri.kappa
            assert prec > 0.0
            means[k] = (self.tau[k] * b * s + pri.kappa * pri.zeta) / prec
            sds[k] = 1.0 / np.sqrt(prec)
        return means, sds

    def update_mu(self):
        if self.priors.fix_means_to_zero:
            return
        means, sds = self.mu_conditional_params()
        self.mu = self.rng.normal(means, sds)

    def tau_conditional_params(self) -> tuple:
        """Posterior gamma (shape, rate) of each tau_k given the rest."""
        pri = self.priors
        shapes = np.empty(self.g)
        rates = np.empty(self.g)
        E = self.resid_matrix()
        for k in range(self.g):
            mask = self.z == k
            e = E[mask, k]
            xi_k = self.xi[mask]
            shapes[k] = mask.sum() / 2.0 + pri.c
            rates[k] = 0.5 * float(xi_k @ (e * e)) + self.lam
        return shapes, rates

    def update_tau_lambda(self):
        shapes, rates = self.tau_conditional_params()
        self.tau = self.rng.gamma(shapes, 1.0 / rates)
        pri = self.priors
        self.lam = self.rng.gamma(pri.a + pri.c * self.g, 1.0 / (pri.b + self.tau.sum()))

    def phi_log_accept(self, k: int, candidate) -> float:
        """Log acceptance ratio for phi_k -> candidate (mu_k held fixed).

        -inf when the candidate leaves the coefficient box or destabilizes
        the mixture; otherwise -(tau_k/2) sum_{t:z=k} xi_t (e*^2 - e^2).
        """
        candidate = np.asarray(candidate, dtype=float)
        if np.any(np.abs(candidate) > PHI_BOUND):
            return -np.inf
        trial = list(self.phi)
        trial[k] = candidate
        if not self._stable_with(trial, self.pi):
            return -np.inf
        mask = self.z == k
        xi_k = self.xi[mask]
        e_cur = self.resid(k)[mask]
        pk = len(candidate)
        r0 = self.yobs - (self.X[:, :pk] @ candidate if pk else 0.0)
        e_new = (r0 - (1.0 - candidate.sum()) * self.mu[k])[mask]
        return -0.5 * self.tau[k] * float(xi_k @ (e_new * e_new - e_cur * e_cur))

    def update_phi(self, adapt_step: float = 0.0):
        if "phi" in self.frozen:
            return
        for k in range(self.g):
            if f"phi:{k}" in self.frozen or self.orders[k] == 0:
                continue
            cand = self.phi[k] + np.sqrt(self.gamma[k]) * self.rng.standard_normal(
                self.orders[k]
            )
            log_a = self.phi_log_accept(k, cand)
            accepted = np.log(self.rng.uniform()) < log_a
            if accepted:
                self.phi[k] = cand
            self.phi_attempted[k] += 1
            self.phi_accepted[k] += int(accepted)
            if adapt_step > 0.0:
                acc = min(1.0, np.exp(log_a)) if np.isfinite(log_a) else 0.0
                self.gamma[k] = float(
                    np.clip(
                        self.gamma[k] * np.exp(adapt_step * (acc - _ADAPT_TARGET)),
                        1e-8,
                        25.0,
                    )
                )

    def _nu_xi_stats(self, k: int) -> tuple:
        """(count, sum xi, sum log xi) over the points allocated to k."""
        mask = self.z == k
        xi_k = self.xi[mask]
        return len(xi_k), float(xi_k.sum()), float(np.log(xi_k).sum())

    @staticmethod
    def _nu_loglik_from_stats(nu: float, nk: int, s_xi: float, s_log: float) -> float:
        return (
            nk * (nu / 2.0 * np.log((nu - 2.0) / 2.0) - special.gammaln(nu / 2.0))
            + (nu / 2.0 - 1.0) * s_log
            - (nu - 2.0) / 2.0 * s_xi
        )

    def nu_loglik(self, k: int, nu: float) -> float:
        """Augmented log-likelihood of nu_k given the allocated xi values."""
        nk, s_xi, s_log = self._nu_xi_stats(k)
        return self._nu_loglik_from_stats(nu, nk, s_xi, s_log)

    def update_nu(self):
        """Independence MH with the truncated-gamma prior as proposal.

        Prior terms cancel, so the acceptance probability is the
        likelihood ratio between candidate and current value.
        """
        for k in range(self.g):
            if f"nu:{k}" in self.frozen:
                continue
            cand = sample_truncated_gamma(self.priors.nu_prior(k), self.rng)
            nk, s_xi, s_log = self._nu_xi_stats(k)
            log_a = self._nu_loglik_from_stats(
                cand, nk, s_xi, s_log
            ) - self._nu_loglik_from_stats(self.nu[k], nk, s_xi, s_log)
            accepted = np.log(self.rng.uniform()) < log_a
            if accepted:
                self.nu[k] = cand
            self.nu_attempted[k] += 1
            self.nu_accepted[k] += int(accepted)

    def sweep(self, adapt_step: float = 0.0):
        # residuals depend only on (phi, mu), unchanged between the z and xi
        # updates, so one evaluation serves both
        E = self.resid_matrix()
        if "z" not in self.frozen:
            self.update_z(E)
        if "xi" not in self.frozen:
            self.update_xi(E)
        if "pi" not in self.frozen:
            self.update_pi()
        if "mu" not in self.frozen:
            self.update_mu()
        if "tau" not in self.frozen:
            self.update_tau_lambda()
        self.update_phi(adapt_step=adapt_step)
        if "nu" not in self.frozen:
            self.update_nu()

    def reset_counters(self):
        self.phi_attempted[:] = 0
        self.phi_accepted[:] = 0
        self.nu_attempted[:] = 0
        self.nu_accepted[:] = 0

    def loglik(self) -> float:
        """Latent-marginalized log-likelihood at the current parameters."""
        from .model import mixture_loglik

        return mixture_loglik(self.spec(), self.y, cond=self.cond)


def run_gibbs(y, g, orders, priors: PriorConfig, settings: GibbsSettings, rng,
              record_loglik: bool = True) -> ChainTrace:
    """Run one chain and return the post-burnin trace.

    The random-walk steps gamma_k are Robbins-Monro adapted toward 25%
    acceptance during burn-in and frozen afterwards; acceptance rates are
    reported over the retained draws only.
    """
    sampler = GibbsSampler(y, g, orders, priors, rng)
    return _drive(sampler, settings, record_loglik)


def _drive(sampler: GibbsSampler, settings: GibbsSettings,
           record_loglik: bool = True) -> ChainTrace:
    g = sampler.g
    orders = tuple(sampler.orders)
    keep = settings.iterations - settings.burnin
    sampler.gamma[:] = settings.gamma0
    pi = np.empty((keep, g))
    mu = np.empty((keep, g))
    tau = np.empty((keep, g))
    nu = np.empty((keep, g))
    lam = np.empty(keep)
    phi = [np.empty((keep, pk)) for pk in orders]
    ll = np.full(keep, np.nan)
    for it in range(settings.iterations):
        in_burnin = it < settings.burnin
        adapt = 2.0 / (1.0 + it) ** 0.6 if in_burnin else 0.0
        try:
            sampler.sweep(adapt_step=adapt)
        except (FloatingPointError, ValueError) as exc:
            raise NumericalError(f"sampler failed at iteration {it}: {exc}") from exc
        if it == settings.burnin - 1:
            sampler.reset_counters()
        if not in_burnin:
            j = it - settings.burnin
            pi[j] = sampler.pi
            mu[j] = sampler.mu
            tau[j] = sampler.tau
            nu[j] = sampler.nu
            lam[j] = sampler.lam
            for k in range(g):
                phi[k][j] = sampler.phi[k]
            if record_loglik:
                ll[j] = sampler.loglik()
    return ChainTrace(
        g=g,
        orders=orders,
        pi=pi,
        mu=mu,
        tau=tau,
        nu=nu,
        lam=lam,
        phi=phi,
        loglik=ll,
        phi_attempted=sampler.phi_attempted.copy(),
        phi_accepted=sampler.phi_accepted.copy(),
        nu_attempted=sampler.nu_attempted.copy(),
        nu_accepted=sampler.nu_accepted.copy(),
        gamma=sampler.gamma.copy(),
        fix_means_to_zero=sampler.priors.fix_means_to_zero,
    )


def draw_from_prior(priors: PriorConfig, orders, rng, max_tries: int = 10000):
    """Joint prior draw of (pi, mu, tau, nu, lambda, phi).

    (pi, phi) are drawn by rejection from Dirichlet x Uniform(box) until the
    mixture is stable, matching the indicator prior the sampler targets.
    """
    g = len(orders)
    lam = rng.gamma(priors.a, 1.0 / priors.b)
    tau = rng.gamma(priors.c, 1.0 / lam, size=g)
    if priors.fix_means_to_zero:
        mu = np.zeros(g)
    else:
        mu = rng.normal(priors.zeta, 1.0 / np.sqrt(priors.kappa), size=g)
    nu = np.array(
        [sample_truncated_gamma(priors.nu_prior(k), rng) for k in range(g)]
    )
    p = max(orders) if orders else 0
    for _ in range(max_tries):
        pi = rng.dirichlet(priors.dirichlet_weights)
        phi = [rng.uniform(-PHI_BOUND, PHI_BOUND, size=pk) for pk in orders]
        rows = np.zeros((g, p)) if p else np.zeros((g, 0))
        for k, c in enumerate(phi):
            rows[k, : len(c)] = c
        if p == 0 or is_stable_raw(pi, rows, p):
            return pi, mu, tau, nu, lam, phi
    raise NumericalError("prior rejection sampling for (pi, phi) did not terminate")


def simulate_conditional(y_init, pi, mu, tau, nu, phi, n_new, rng):
    """Generate n_new observations conditionally on fixed initial values.

    Returns (y_full, z, xi) with z, xi covering the generated points only.
    Used by the Geweke successive-conditional simulator and tests.
    """
    y_init = np.asarray(y_init, dtype=float)
    cond = len(y_init)
    g = len(pi)
    sigma = 1.0 / np.sqrt(np.asarray(tau, dtype=float))
    b = np.array([1.0 - np.sum(c) for c in phi])
    phi0 = np.asarray(mu, dtype=float) * b
    ks = rng.choice(g, size=n_new, p=pi)
    nu_k = np.asarray(nu, dtype=float)[ks]
    xis = rng.gamma(nu_k / 2.0, 2.0 / (nu_k - 2.0))
    eps = rng.normal(0.0, sigma[ks] / np.sqrt(xis))
    # the mean recursion is sequential; plain-float arithmetic avoids
    # per-step numpy overhead on these tiny histories
    coeffs = [[float(c) for c in row] for row in phi]
    phi0_l = phi0.tolist()
    eps_l = eps.tolist()
    buf = [float(v) for v in y_init] + [0.0] * n_new
    for t, k in enumerate(ks.tolist()):
        i = cond + t
        acc = phi0_l[k]
        for j, cj in enumerate(coeffs[k]):
            acc += cj * buf[i - 1 - j]
        buf[i] = acc + eps_l[t]
    y = np.asarray(buf)
    if not np.all(np.isfinite(y)):
        raise NumericalError("non-finite value during conditional simulation")
    return y, ks, xis
