"""Shared oracles for the sampler tests.

Grid-quadrature conditionals for each parameter block, computed from the
model density directly (never through the sampler's own conditional-
parameter code), plus a Geweke joint-distribution harness.
"""

import numpy as np
from scipy import special, stats

from tmar.diagnostics import effective_sample_size
from tmar.distributions import truncated_gamma_logpdf
from tmar.gibbs import GibbsSampler, draw_from_prior, simulate_conditional
from tmar.priors import PriorConfig, solve_nu_hyperparameters


# --------------------------------------------------------------- toy fixture

def toy_sampler(seed=100, n=30, g=2):
    """Small two-component p=1 sampler in a fixed, reproducible state."""
    rng = np.random.default_rng(seed)
    y = np.concatenate([
        rng.normal(-2.0, 1.0, size=n // 2),
        rng.normal(2.0, 1.5, size=n - n // 2),
    ])
    rng.shuffle(y)
    shape, rate = solve_nu_hyperparameters(10.0, 25.0)
    priors = PriorConfig(
        zeta=0.0, kappa=0.5, c=2.0, a=1.0, b=2.0,
        dirichlet_weights=np.ones(g),
        nu_shape=np.full(g, shape), nu_rate=np.full(g, rate),
    )
    s = GibbsSampler(y, g, [1] * g, priors, rng, gamma0=0.2)
    s.set_state(
        pi=np.array([0.45, 0.55]),
        mu=np.array([-1.5, 1.8]),
        tau=np.array([0.9, 0.5]),
        nu=np.array([5.0, 12.0]),
        lam=0.8,
        phi=[np.array([0.3]), np.array([-0.2])],
    )
    s.z = (s.yobs > 0.0).astype(int)
    s.xi = rng.gamma(3.0, 0.4, size=s.m)
    return s


def grid_cdf(grid, log_density):
    """Normalized CDF on a grid from unnormalized log-density values."""
    logd = log_density - log_density.max()
    dens = np.exp(logd)
    probs = 0.5 * (dens[1:] + dens[:-1]) * np.diff(grid)
    cdf = np.concatenate([[0.0], np.cumsum(probs)])
    cdf /= cdf[-1]

    def fn(x):
        return np.interp(x, grid, cdf)

    return fn


# -------------------------------------------- exact conditional log-densities

def mu_conditional_logpdf(s, k, grid):
    """log p(mu_k | rest) on a grid: normal prior times allocated normals."""
    pri = s.priors
    mask = s.z == k
    r0 = s.resid0(k)[mask]
    xi = s.xi[mask]
    b = 1.0 - s.phi[k].sum()
    out = np.empty(len(grid))
    for i, m in enumerate(grid):
        e = r0 - b * m
        out[i] = (
            -0.5 * pri.kappa * (m - pri.zeta) ** 2
            - 0.5 * s.tau[k] * float(xi @ (e * e))
        )
    return out


def tau_conditional_logpdf(s, k, grid):
    """log p(tau_k | rest): Gamma(c, lam) prior times allocated normal kernels."""
    pri = s.priors
    mask = s.z == k
    e = s.resid(k)[mask]
    xi = s.xi[mask]
    nk = int(mask.sum())
    quad = float(xi @ (e * e))
    return (
        (pri.c - 1.0 + nk / 2.0) * np.log(grid)
        - grid * (s.lam + 0.5 * quad)
    )


def phi_conditional_logpdf(s, k, grid):
    """log p(phi_k | rest) for p_k = 1, with the stability/box indicator."""
    from tmar.model import PHI_BOUND, is_stable_raw

    mask = s.z == k
    xi = s.xi[mask]
    ym = s.yobs[mask]
    xm = s.X[mask, 0]
    out = np.full(len(grid), -np.inf)
    for i, c in enumerate(grid):
        if abs(c) > PHI_BOUND:
            continue
        rows = np.array([[c if j == k else s.phi[j][0]] for j in range(s.g)])
        if not is_stable_raw(s.pi, rows, 1):
            continue
        e = ym - c * xm - (1.0 - c) * s.mu[k]
        out[i] = -0.5 * s.tau[k] * float(xi @ (e * e))
    return out


def nu_conditional_logpdf(s, k, grid):
    """log p(nu_k | rest): truncated-gamma prior times the xi likelihood."""
    mask = s.z == k
    nk = int(mask.sum())
    s_xi = float(s.xi[mask].sum())
    s_log = float(np.log(s.xi[mask]).sum())
    prior = truncated_gamma_logpdf(grid, s.priors.nu_prior(k))
    like = (
        nk * (grid / 2.0 * np.log((grid - 2.0) / 2.0) - special.gammaln(grid / 2.0))
        + (grid / 2.0 - 1.0) * s_log
        - (grid - 2.0) / 2.0 * s_xi
    )
    return prior + like


def allocation_oracle(s):
    """Exact p(z_t = k | rest) from scipy densities (independent of the sampler)."""
    probs = np.empty((s.m, s.g))
    E = np.column_stack([s.resid(k) for k in range(s.g)])
    for k in range(s.g):
        sigma = 1.0 / np.sqrt(s.tau[k] * s.xi)
        nu = s.nu[k]
        probs[:, k] = (
            s.pi[k]
            * stats.norm.pdf(E[:, k], scale=sigma)
            * stats.gamma.pdf(s.xi, nu / 2.0, scale=2.0 / (nu - 2.0))
        )
    return probs / probs.sum(axis=1, keepdims=True)


# ----------------------------------------------------------- block samplers

def iid_mu_draws(s, k, ndraws):
    out = np.empty(ndraws)
    for i in range(ndraws):
        mu_full = s.mu.copy()
        s.update_mu()
        out[i] = s.mu[k]
        s.mu = mu_full
    return out


def iid_tau_draws(s, k, ndraws):
    lam0, tau0 = s.lam, s.tau.copy()
    out = np.empty(ndraws)
    for i in range(ndraws):
        s.update_tau_lambda()
        out[i] = s.tau[k]
        s.lam, s.tau = lam0, tau0.copy()
    return out


def thinned_phi_draws(s, k, ndraws, thin):
    out = np.empty(ndraws)
    for i in range(ndraws):
        for _ in range(thin):
            s.update_phi()
        out[i] = s.phi[k][0]
    return out


def thinned_nu_draws(s, k, ndraws, thin):
    out = np.empty(ndraws)
    for i in range(ndraws):
        for _ in range(thin):
            s.update_nu()
        out[i] = s.nu[k]
    return out


# ------------------------------------------------------------ Geweke harness

GEWEKE_STAT_NAMES = [
    "pi1", "mu1", "mu2", "tau1", "tau2", "nu1", "nu2", "lambda",
    "phi1", "phi2", "ybar", "y2bar", "xibar", "logxibar", "xinu", "logxinu",
]


def geweke_priors(g=2):
    shape, rate = solve_nu_hyperparameters(10.0, 25.0)
    return PriorConfig(
        zeta=0.0, kappa=1.0, c=2.0, a=2.0, b=2.0,
        dirichlet_weights=np.ones(g),
        nu_shape=np.full(g, shape), nu_rate=np.full(g, rate),
    )


def _geweke_stats(pi, mu, tau, nu, lam, phi, y, z, xi):
    nu = np.asarray(nu, dtype=float)
    lxi = np.log(xi)
    return np.array([
        pi[0], mu[0], mu[1], tau[0], tau[1], nu[0], nu[1], lam,
        phi[0][0], phi[1][0], y.mean(), (y ** 2).mean(),
        xi.mean(), lxi.mean(), (xi * nu[z]).mean(), (lxi * nu[z]).mean(),
    ])


def geweke_marginal_chain(priors, y_init, n_new, ndraws, rng):
    out = np.empty((ndraws, len(GEWEKE_STAT_NAMES)))
    for i in range(ndraws):
        pi, mu, tau, nu, lam, phi = draw_from_prior(priors, [1, 1], rng)
        y, z, xi = simulate_conditional(y_init, pi, mu, tau, nu, phi, n_new, rng)
        out[i] = _geweke_stats(pi, mu, tau, nu, lam, phi, y[len(y_init):], z, xi)
    return out


def geweke_successive_chain(priors, y_init, n_new, ndraws, rng):
    cond = len(y_init)
    pi, mu, tau, nu, lam, phi = draw_from_prior(priors, [1, 1], rng)
    y, z, xi = simulate_conditional(y_init, pi, mu, tau, nu, phi, n_new, rng)
    out = np.empty((ndraws, len(GEWEKE_STAT_NAMES)))
    s = GibbsSampler(y, 2, [1, 1], priors, rng, cond=cond, gamma0=0.3)
    for i in range(ndraws):
        s.y = np.asarray(y, dtype=float)
        s.yobs = s.y[cond:]
        for j in range(cond):
            s.X[:, j] = s.y[cond - 1 - j : s.n - 1 - j]
        s.set_state(pi=pi, mu=mu, tau=tau, nu=nu, lam=lam, phi=phi)
        s.z, s.xi = z.copy(), xi.copy()
        s.sweep()
        pi, mu, tau, nu, lam, phi = s.pi, s.mu, s.tau, s.nu, s.lam, s.phi
        y, z, xi = simulate_conditional(y_init, pi, mu, tau, nu, phi, n_new, rng)
        out[i] = _geweke_stats(pi, mu, tau, nu, lam, phi, y[cond:], z, xi)
    return out


def geweke_z_scores(marginal, successive):
    """Per-statistic z-scores for first and second moments.

    The successive chain's variance is scaled by its effective sample size;
    the marginal chain is iid by construction.
    """
    zs = {}
    for j, name in enumerate(GEWEKE_STAT_NAMES):
        for deg, label in ((1, "mean"), (2, "second_moment")):
            a = marginal[:, j] ** deg
            b = successive[:, j] ** deg
            nb = max(effective_sample_size(b), 10.0)
            z = (a.mean() - b.mean()) / np.sqrt(a.var() / len(a) + b.var() / nb)
            zs[f"{name}.{label}"] = float(z)
    return zs


# ------------------------------------------------- two-model RJ toy harness

def rj_toy_data(n=20, seed=500):
    rng = np.random.default_rng(seed)
    y = np.empty(n)
    y[0] = 0.0
    eps = rng.normal(size=n)
    for t in range(1, n):
        y[t] = 0.55 * y[t - 1] + eps[t]
    return y


def _toy_spec(phi):
    from tmar.model import TMarSpec

    return TMarSpec(
        weights=[1.0], means=[0.0], ar_coeffs=[np.asarray(phi)],
        scales=[1.0], dofs=[10.0],
    )


def rj_two_model_chain(y, n_moves, rng, mh_step=0.5):
    """RJ chain over a single-component model with order 1 or 2.

    All non-coefficient parameters are pinned, so the chain's stationary
    law is L(phi) restricted to the box/stability region, and the order
    visit ratio has a quadrature oracle. Order moves use the package's
    proposal and acceptance code; the within-model refresh is a plain
    random-walk Metropolis step implemented here.
    """
    from scipy import special

    from tmar.model import PHI_BOUND
    from tmar.order_selection import (
        OrderState,
        acceptance_probability,
        propose_order_move,
    )

    state = OrderState(orders=[1], p_max=2)
    # one reusable spec object per order; coefficients swapped in place
    templates = {1: _toy_spec([0.3]), 2: _toy_spec([0.3, 0.0])}

    def spec_for(coeffs):
        t = templates[len(coeffs)]
        t.ar_coeffs[0] = np.asarray(coeffs, dtype=float)
        return t

    # Closed-form pieces for the pinned toy model (one component, mean 0,
    # scale 1, dof 10): same conditional likelihood mixture_loglik computes,
    # specialized so the million-move refresh loop stays cheap.
    nu = 10.0
    s2 = (nu - 2.0) / nu
    const = float(
        special.gammaln((nu + 1.0) / 2.0)
        - special.gammaln(nu / 2.0)
        - 0.5 * np.log(nu * np.pi)
        - 0.5 * np.log(s2)
    )
    yobs = y[2:]
    lags = np.column_stack([y[1:-1], y[:-2]])
    nobs = len(yobs)

    def toy_loglik(coeffs):
        e = yobs - lags[:, : len(coeffs)] @ coeffs
        return nobs * const - (nu + 1.0) / 2.0 * float(
            np.log1p(e * e / (s2 * nu)).sum()
        )

    stable_margin = np.sqrt(1.0 - 1e-10)

    def toy_stable(coeffs):
        # companion-matrix spectral radius, squared, below 1 - 1e-10
        if len(coeffs) == 1:
            return abs(coeffs[0]) < stable_margin
        c1, c2 = coeffs
        disc = c1 * c1 + 4.0 * c2
        if disc >= 0.0:
            root = np.sqrt(disc)
            rad = max(abs(c1 + root), abs(c1 - root)) / 2.0
        else:
            rad = np.sqrt(-c2)
        return rad < stable_margin

    phi = np.array([0.3])
    ll = toy_loglik(phi)
    for _ in range(n_moves):
        cand = phi + mh_step * rng.standard_normal(len(phi))
        if np.all(np.abs(cand) <= PHI_BOUND) and toy_stable(cand):
            ll_cand = toy_loglik(cand)
            if np.log(rng.uniform()) < ll_cand - ll:
                phi, ll = cand, ll_cand
        move = propose_order_move(state, rng)
        a = acceptance_probability(
            move, spec_for(phi), y, cond=2, p_min=1, p_max=2, current_loglik=ll
        )
        if rng.uniform() < a:
            if move.direction == "up":
                phi = np.append(phi, move.new_coeff)
            else:
                phi = phi[:-1]
            state.orders[0] = len(phi)
            ll = toy_loglik(phi)
        state.record_visit()
    return state


def rj_two_model_quadrature_ratio(y, nodes=300):
    """Oracle visit ratio P(p=2)/P(p=1) = I_2 / I_1 with
    I_p = integral of the likelihood over the order-p stability region
    (the chain's flat reference measure on coefficients)."""
    from tmar.model import mixture_loglik

    x1, w1 = np.polynomial.legendre.leggauss(nodes)

    def ll1(phi):
        return mixture_loglik(_toy_spec([phi]), y, cond=2)

    # p = 1: stability region is |phi| < 1 (inside the wider box)
    a, b = -1.0, 1.0
    t = 0.5 * (b - a) * x1 + 0.5 * (b + a)
    vals = np.array([ll1(v) for v in t])
    ref = vals.max()
    i1 = 0.5 * (b - a) * float(w1 @ np.exp(vals - ref))

    # p = 2: phi2 in (-1, 1), phi1 in (max(phi2-1, -1.5), min(1-phi2, 1.5))
    x2, w2 = np.polynomial.legendre.leggauss(nodes)
    i2 = 0.0
    for u, wu in zip(x2, w2):
        phi2 = u  # (-1, 1) maps to itself
        lo = max(phi2 - 1.0, -1.5)
        hi = min(1.0 - phi2, 1.5)
        tt = 0.5 * (hi - lo) * x1 + 0.5 * (hi + lo)
        vals = np.array(
            [mixture_loglik(_toy_spec([p1, phi2]), y, cond=2) for p1 in tt]
        )
        i2 += wu * 0.5 * (hi - lo) * float(w1 @ np.exp(vals - ref))
    return i2 / i1
