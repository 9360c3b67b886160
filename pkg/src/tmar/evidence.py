"""Marginal likelihood for a fixed number of components via the Chib
decomposition: likelihood and priors at an anchor point, block posterior
densities from reduced chains, and the RJMCMC visit share for the order
posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .distributions import (
    TruncatedGamma,
    sample_truncated_gamma,
    truncated_gamma_logpdf,
)
from .errors import NumericalError
from .gibbs import ChainTrace, GibbsSampler, GibbsSettings, run_gibbs
from .model import PHI_BOUND, TMarSpec, is_stable_raw, mixture_loglik
from .order_selection import OrderSelectionSettings, run_order_selection
from .priors import PriorConfig

_LOG_BOX_DENSITY = -np.log(2.0 * PHI_BOUND)


@dataclass
class EvidenceSettings:
    main_iterations: int = 6000
    main_burnin: int = 1000
    reduced_iterations: int = 10000
    reduced_burnin: int = 500
    rj_iterations: int = 5000
    p_max: int = 4
    sweeps_per_move: int = 5
    gamma0: float = 0.1
    stable_prior_mc: int = 20000
    fixed_orders: tuple | None = None


@dataclass
class Anchor:
    spec: TMarSpec
    lam: float
    gamma: np.ndarray
    index: int


@dataclass
class EvidenceReport:
    g: int
    selected_orders: tuple
    anchor: Anchor
    log_likelihood_at_anchor: float
    log_prior_at_anchor: float
    log_order_prior: float
    log_order_posterior: float
    block_log_densities: dict
    marginal_log_likelihood: float
    log_g_factorial: float
    order_visit_share: float

    def as_dict(self) -> dict:
        out = {
            "g": self.g,
            "selected_orders": ",".join(str(p) for p in self.selected_orders),
            "log_likelihood_at_anchor": self.log_likelihood_at_anchor,
            "log_prior_at_anchor": self.log_prior_at_anchor,
            "log_order_prior": self.log_order_prior,
            "log_order_posterior": self.log_order_posterior,
            "marginal_log_likelihood": self.marginal_log_likelihood,
            "log_g_factorial": self.log_g_factorial,
            "order_visit_share": self.order_visit_share,
        }
        for name, value in self.block_log_densities.items():
            out[f"block_log_density_{name}"] = value
        return out


def _dirichlet_logpdf(x, alpha) -> float:
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if len(alpha) == 1:
        return 0.0
    return float(
        special.gammaln(alpha.sum())
        - special.gammaln(alpha).sum()
        + ((alpha - 1.0) * np.log(x)).sum()
    )


def _tau_joint_log_prior(tau, priors: PriorConfig) -> float:
    """Joint prior of (tau_1..tau_g) with the gamma rate lambda integrated out."""
    tau = np.asarray(tau, dtype=float)
    g = len(tau)
    a, b, c = priors.a, priors.b, priors.c
    return float(
        special.gammaln(a + c * g)
        - special.gammaln(a)
        - g * special.gammaln(c)
        + a * np.log(b)
        + (c - 1.0) * np.log(tau).sum()
        - (a + c * g) * np.log(b + tau.sum())
    )


def _log_prior_unnorm_rows(trace: ChainTrace, priors: PriorConfig) -> np.ndarray:
    """Per-iteration unnormalized log prior; the phi terms are constant
    across a fixed-order trace and omitted."""
    n = len(trace)
    out = np.zeros(n)
    w = priors.dirichlet_weights
    if trace.g > 1:
        out += (
            special.gammaln(w.sum())
            - special.gammaln(w).sum()
            + ((w - 1.0)[None, :] * np.log(trace.pi)).sum(axis=1)
        )
    if not priors.fix_means_to_zero:
        out += (
            -0.5 * np.log(2.0 * np.pi / priors.kappa)
            - 0.5 * priors.kappa * (trace.mu - priors.zeta) ** 2
        ).sum(axis=1)
    a, b, c = priors.a, priors.b, priors.c
    g = trace.g
    out += (
        special.gammaln(a + c * g)
        - special.gammaln(a)
        - g * special.gammaln(c)
        + a * np.log(b)
        + (c - 1.0) * np.log(trace.tau).sum(axis=1)
        - (a + c * g) * np.log(b + trace.tau.sum(axis=1))
    )
    for k in range(g):
        out += truncated_gamma_logpdf(trace.nu[:, k], priors.nu_prior(k))
    return out


def select_anchor(trace: ChainTrace, priors: PriorConfig) -> Anchor:
    """Highest-posterior-density draw of the trace (joint across blocks).

    Requires the trace's per-iteration marginal log-likelihood; the anchor
    is the draw maximizing log-likelihood plus log prior, deterministic
    given the trace.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    if np.any(np.isnan(trace.loglik)):
        raise ValueError("trace lacks per-iteration log-likelihoods")
    logpost = trace.loglik + _log_prior_unnorm_rows(trace, priors)
    idx = int(np.argmax(logpost))
    return Anchor(
        spec=trace.spec_at(idx),
        lam=float(trace.lam[idx]),
        gamma=trace.gamma.copy(),
        index=idx,
    )


def log_stable_fraction(orders, weights, n_mc: int, seed: int = 977) -> float:
    """log of the probability that coefficients drawn uniformly from the box
    yield a stable mixture at the given weights (Monte Carlo, fixed seed)."""
    orders = tuple(orders)
    p = max(orders) if orders else 0
    if p == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    g = len(orders)
    hits = 0
    for _ in range(n_mc):
        rows = np.zeros((g, p))
        for k, pk in enumerate(orders):
            rows[k, :pk] = rng.uniform(-PHI_BOUND, PHI_BOUND, size=pk)
        if is_stable_raw(weights, rows, p):
            hits += 1
    if hits == 0:
        raise NumericalError("no stable draw in the prior normalization sample")
    return float(np.log(hits / n_mc))


def log_prior_at(spec: TMarSpec, priors: PriorConfig,
                 stable_mc: int = 20000) -> float:
    """Normalized log prior density of the anchor point.

    The AR-coefficient prior is uniform over the stability region inside
    [-1.5, 1.5]^d; its normalizer is estimated by Monte Carlo at the anchor
    weights. The tau prior marginalizes the hierarchical rate lambda in
    closed form.
    """
    logp = _dirichlet_logpdf(spec.weights, priors.dirichlet_weights)
    if not priors.fix_means_to_zero:
        logp += float(
            np.sum(
                -0.5 * np.log(2.0 * np.pi / priors.kappa)
                - 0.5 * priors.kappa * (spec.means - priors.zeta) ** 2
            )
        )
    logp += _tau_joint_log_prior(spec.taus, priors)
    for k in range(spec.g):
        logp += float(truncated_gamma_logpdf(spec.dofs[k], priors.nu_prior(k)))
    d = sum(spec.orders)
    if d:
        logp += d * _LOG_BOX_DENSITY
        logp -= log_stable_fraction(spec.orders, spec.weights, stable_mc)
    return float(logp)


def _reduced_sampler(y, anchor: Anchor, priors, rng, frozen) -> GibbsSampler:
    spec = anchor.spec
    sampler = GibbsSampler(y, spec.g, list(spec.orders), priors, rng)
    sampler.set_state(
        pi=spec.weights,
        mu=spec.means,
        tau=spec.taus,
        nu=spec.dofs,
        lam=anchor.lam,
        phi=spec.ar_coeffs,
    )
    sampler.gamma = anchor.gamma.copy()
    sampler.frozen = set(frozen)
    return sampler


def _collect(sampler: GibbsSampler, iterations, burnin, fn, check=None):
    """Run a reduced chain, averaging fn(sampler) over retained sweeps."""
    for _ in range(burnin):
        sampler.sweep()
    total = 0.0
    for _ in range(iterations):
        sampler.sweep()
        if check is not None:
            check(sampler)
        total += fn(sampler)
    return total / iterations


def _freeze_check(anchor: Anchor, frozen):
    """Assert that anchored blocks stay exactly at their anchor values."""
    spec = anchor.spec

    def check(sampler):
        for tag in frozen:
            if tag.startswith("phi:"):
                k = int(tag.split(":")[1])
                assert np.array_equal(sampler.phi[k], spec.ar_coeffs[k])
            elif tag.startswith("nu:"):
                k = int(tag.split(":")[1])
                assert sampler.nu[k] == spec.dofs[k]
            elif tag == "mu":
                assert np.array_equal(sampler.mu, spec.means)
            elif tag == "tau":
                assert np.array_equal(sampler.tau, spec.taus)

    return check


def _mvn_logpdf_iso(x, center, var) -> float:
    x = np.asarray(x, dtype=float)
    d = len(x)
    return float(
        -0.5 * d * np.log(2.0 * np.pi * var) - 0.5 * ((x - center) ** 2).sum() / var
    )


def estimate_phi_block(y, anchor: Anchor, priors: PriorConfig,
                       settings: EvidenceSettings, rng) -> dict:
    """Chib-Jeliazkov conditional density of the anchored AR coefficients.

    Per component k: numerator chain has phi_1..phi_{k-1} anchored and
    averages alpha(phi_k^(j) -> phi*_k) q(phi_k^(j); phi*_k); denominator
    chain additionally anchors phi_k and averages alpha(phi*_k -> phi~) for
    proposal draws phi~.
    """
    spec = anchor.spec
    g = spec.g
    per_component = np.zeros(g)
    for k in range(g):
        pk = spec.orders[k]
        if pk == 0:
            continue
        target = spec.ar_coeffs[k]
        gam = float(anchor.gamma[k])
        frozen_num = {f"phi:{i}" for i in range(k)}
        num_sampler = _reduced_sampler(y, anchor, priors, rng, frozen_num)

        def num_fn(s, k=k, target=target, gam=gam):
            log_a = s.phi_log_accept(k, target)
            alpha = min(1.0, math.exp(min(log_a, 0.0))) if np.isfinite(log_a) else 0.0
            return alpha * math.exp(_mvn_logpdf_iso(s.phi[k], target, gam))

        num = _collect(
            num_sampler,
            settings.reduced_iterations,
            settings.reduced_burnin,
            num_fn,
            check=_freeze_check(anchor, frozen_num),
        )

        frozen_den = frozen_num | {f"phi:{k}"}
        den_sampler = _reduced_sampler(y, anchor, priors, rng, frozen_den)

        def den_fn(s, k=k, target=target, gam=gam):
            cand = target + np.sqrt(gam) * s.rng.standard_normal(len(target))
            log_a = s.phi_log_accept(k, cand)
            return min(1.0, math.exp(min(log_a, 0.0))) if np.isfinite(log_a) else 0.0

        den = _collect(
            den_sampler,
            settings.reduced_iterations,
            settings.reduced_burnin,
            den_fn,
            check=_freeze_check(anchor, frozen_den),
        )
        if den <= 0.0 or num <= 0.0:
            raise NumericalError(
                f"degenerate phi-block estimate for component {k}: "
                f"numerator {num:.3g}, denominator {den:.3g}"
            )
        per_component[k] = np.log(num) - np.log(den)
    return {"log_density": float(per_component.sum()), "per_component": per_component}


def estimate_nu_block(y, anchor: Anchor, priors: PriorConfig,
                      settings: EvidenceSettings, rng) -> dict:
    """Chib-Jeliazkov density for the degrees of freedom (independence MH).

    The proposal equals the prior, so the numerator's proposal density is
    the truncated-gamma prior density at nu*_k, constant across draws.
    """
    spec = anchor.spec
    g = spec.g
    all_phi = {f"phi:{i}" for i in range(g)}
    per_component = np.zeros(g)
    for k in range(g):
        target = float(spec.dofs[k])
        prior_k = priors.nu_prior(k)
        log_q = float(truncated_gamma_logpdf(target, prior_k))
        frozen_num = all_phi | {f"nu:{i}" for i in range(k)}
        num_sampler = _reduced_sampler(y, anchor, priors, rng, frozen_num)

        def num_fn(s, k=k, target=target):
            log_a = s.nu_loglik(k, target) - s.nu_loglik(k, s.nu[k])
            return min(1.0, math.exp(min(log_a, 0.0)))

        mean_alpha = _collect(
            num_sampler,
            settings.reduced_iterations,
            settings.reduced_burnin,
            num_fn,
            check=_freeze_check(anchor, frozen_num),
        )

        frozen_den = frozen_num | {f"nu:{k}"}
        den_sampler = _reduced_sampler(y, anchor, priors, rng, frozen_den)

        def den_fn(s, k=k, target=target, prior_k=prior_k):
            cand = sample_truncated_gamma(prior_k, s.rng)
            log_a = s.nu_loglik(k, cand) - s.nu_loglik(k, target)
            return min(1.0, math.exp(min(log_a, 0.0)))

        den = _collect(
            den_sampler,
            settings.reduced_iterations,
            settings.reduced_burnin,
            den_fn,
            check=_freeze_check(anchor, frozen_den),
        )
        if mean_alpha <= 0.0 or den <= 0.0:
            raise NumericalError(
                f"degenerate nu-block estimate for component {k}"
            )
        per_component[k] = log_q + np.log(mean_alpha) - np.log(den)
    return {"log_density": float(per_component.sum()), "per_component": per_component}


def estimate_conjugate_blocks(y, anchor: Anchor, priors: PriorConfig,
                              settings: EvidenceSettings, rng) -> dict:
    """Rao-Blackwellized densities of mu*, tau*, pi* from nested reduced chains."""
    spec = anchor.spec
    g = spec.g
    all_phi = {f"phi:{i}" for i in range(g)}
    all_nu = {f"nu:{i}" for i in range(g)}
    out = {}

    if priors.fix_means_to_zero:
        out["mu"] = 0.0
    else:
        frozen = all_phi | all_nu
        sampler = _reduced_sampler(y, anchor, priors, rng, frozen)

        def mu_fn(s):
            means, sds = s.mu_conditional_params()
            logp = (
                -0.5 * np.log(2.0 * np.pi * sds**2)
                - 0.5 * ((spec.means - means) / sds) ** 2
            )
            return math.exp(float(logp.sum()))

        avg = _collect(
            sampler,
            settings.reduced_iterations,
            settings.reduced_burnin,
            mu_fn,
            check=_freeze_check(anchor, frozen),
        )
        if avg <= 0.0:
            raise NumericalError("degenerate mu-block estimate")
        out["mu"] = float(np.log(avg))

    frozen = all_phi | all_nu | {"mu"}
    sampler = _reduced_sampler(y, anchor, priors, rng, frozen)
    tau_star = spec.taus

    def tau_fn(s):
        shapes, rates = s.tau_conditional_params()
        logp = (
            shapes * np.log(rates)
            - special.gammaln(shapes)
            + (shapes - 1.0) * np.log(tau_star)
            - rates * tau_star
        )
        return math.exp(float(logp.sum()))

    avg = _collect(
        sampler,
        settings.reduced_iterations,
        settings.reduced_burnin,
        tau_fn,
        check=_freeze_check(anchor, frozen),
    )
    if avg <= 0.0:
        raise NumericalError("degenerate tau-block estimate")
    out["tau"] = float(np.log(avg))

    frozen = all_phi | all_nu | {"mu", "tau"}
    sampler = _reduced_sampler(y, anchor, priors, rng, frozen)
    w = priors.dirichlet_weights

    def pi_fn(s):
        alpha = w + s.counts()
        return math.exp(_dirichlet_logpdf(spec.weights, alpha))

    avg = _collect(
        sampler,
        settings.reduced_iterations,
        settings.reduced_burnin,
        pi_fn,
        check=_freeze_check(anchor, frozen),
    )
    if avg <= 0.0:
        raise NumericalError("degenerate pi-block estimate")
    out["pi"] = float(np.log(avg))
    return out


def assemble_marginal_log_likelihood(y, g, priors: PriorConfig,
                                     settings: EvidenceSettings,
                                     rng) -> EvidenceReport:
    """Full evidence pipeline for a fixed number of components.

    Runs order selection (unless `fixed_orders` is set), a main chain at the
    selected orders to locate the anchor, the five reduced-chain block
    estimates, and assembles the marginal log-likelihood identity.
    """
    y = np.asarray(y, dtype=float)
    if settings.fixed_orders is not None:
        selected = tuple(settings.fixed_orders)
        share = 1.0
        log_order_prior = 0.0
        log_order_posterior = 0.0
    else:
        rj = run_order_selection(
            y,
            g,
            priors,
            OrderSelectionSettings(
                iterations=settings.rj_iterations,
                p_max=settings.p_max,
                sweeps_per_move=settings.sweeps_per_move,
                gamma0=settings.gamma0,
            ),
            rng,
        )
        selected = rj.preferred
        share = rj.share
        log_order_prior = -g * np.log(settings.p_max)
        log_order_posterior = float(np.log(share))

    trace = run_gibbs(
        y,
        g,
        list(selected),
        priors,
        GibbsSettings(
            iterations=settings.main_iterations,
            burnin=settings.main_burnin,
            gamma0=settings.gamma0,
        ),
        rng,
        record_loglik=True,
    )
    anchor = select_anchor(trace, priors)

    blocks = {}
    blocks["phi"] = estimate_phi_block(y, anchor, priors, settings, rng)["log_density"]
    blocks["nu"] = estimate_nu_block(y, anchor, priors, settings, rng)["log_density"]
    blocks.update(estimate_conjugate_blocks(y, anchor, priors, settings, rng))

    loglik = mixture_loglik(anchor.spec, y)
    logprior = log_prior_at(anchor.spec, priors, stable_mc=settings.stable_prior_mc)
    mll = (
        loglik
        + logprior
        + log_order_prior
        - sum(blocks.values())
        - log_order_posterior
    )
    return EvidenceReport(
        g=g,
        selected_orders=selected,
        anchor=anchor,
        log_likelihood_at_anchor=loglik,
        log_prior_at_anchor=logprior,
        log_order_prior=log_order_prior,
        log_order_posterior=log_order_posterior,
        block_log_densities=blocks,
        marginal_log_likelihood=float(mll),
        log_g_factorial=float(special.gammaln(g + 1)),
        order_visit_share=share,
    )
