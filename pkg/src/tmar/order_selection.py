"""Reversible-jump MCMC over per-component AR orders for fixed g.

A move picks a component uniformly, proposes raising or lowering its order
by one (birth coefficient from U(-1.5, 1.5)), and accepts based on the
latent-marginalized likelihood ratio times the proposal factors. Orders
range over [1, p_max]; the most-visited order tuple wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .gibbs import GibbsSampler
from .model import PHI_BOUND, TMarSpec, mixture_loglik, is_stable_raw
from .priors import PriorConfig

P_MIN = 1

# birth proposal is uniform on (-PHI_BOUND, PHI_BOUND); its density
_BIRTH_DENSITY = 1.0 / (2.0 * PHI_BOUND)


@dataclass
class OrderMove:
    component: int
    direction: str  # 'up' or 'down'
    new_coeff: float | None = None


@dataclass
class OrderState:
    orders: list
    visit_counts: dict = field(default_factory=dict)
    p_max: int = 4
    p_min: int = P_MIN

    def record_visit(self):
        key = tuple(self.orders)
        self.visit_counts[key] = self.visit_counts.get(key, 0) + 1

    def total_visits(self) -> int:
        return sum(self.visit_counts.values())

    def preferred(self) -> tuple:
        """Most-visited order tuple; ties broken toward smaller total order."""
        if not self.visit_counts:
            raise ValueError("no visits recorded")
        return min(
            self.visit_counts.items(), key=lambda kv: (-kv[1], sum(kv[0]), kv[0])
        )[0]


def birth_probability(p_k: int, p_min: int, p_max: int) -> float:
    """b(p): 1 at p_min, 0 at p_max, 1/2 in the interior."""
    if p_k >= p_max:
        return 0.0
    if p_k <= p_min:
        return 1.0
    return 0.5


def propose_order_move(state: OrderState, rng) -> OrderMove:
    k = int(rng.integers(len(state.orders)))
    b = birth_probability(state.orders[k], state.p_min, state.p_max)
    if rng.uniform() < b:
        return OrderMove(k, "up", float(rng.uniform(-PHI_BOUND, PHI_BOUND)))
    return OrderMove(k, "down")


def _candidate_coeffs(move: OrderMove, spec: TMarSpec) -> list:
    cand = [c.copy() for c in spec.ar_coeffs]
    k = move.component
    if move.direction == "up":
        cand[k] = np.append(cand[k], move.new_coeff)
    else:
        cand[k] = cand[k][:-1]
    return cand


def acceptance_probability(move: OrderMove, spec: TMarSpec, y, cond: int,
                           p_min: int = P_MIN, p_max: int = 4,
                           current_loglik: float | None = None) -> float:
    """RJ acceptance for a birth/death move.

    birth:  min(1, L*/L * d(p+1)/b(p) * 1/q)   with q = 1/3 the uniform density
    death:  min(1, L*/L * b(p-1)/d(p) * q)
    Unstable candidates (or a dropped/added coefficient outside the box) are
    rejected outright. `current_loglik` short-circuits recomputing L when the
    caller tracks it.
    """
    k = move.component
    p_k = spec.orders[k]
    cand_coeffs = _candidate_coeffs(move, spec)
    if move.direction == "down" and p_k <= p_min:
        return 0.0
    if move.direction == "up" and p_k >= p_max:
        return 0.0
    if any(np.any(np.abs(c) > PHI_BOUND) for c in cand_coeffs):
        return 0.0
    p_cand = max(len(c) for c in cand_coeffs)
    rows = np.zeros((spec.g, p_cand))
    for i, c in enumerate(cand_coeffs):
        rows[i, : len(c)] = c
    if not is_stable_raw(spec.weights, rows, p_cand):
        return 0.0
    cand_spec = TMarSpec(
        weights=spec.weights,
        means=spec.means,
        ar_coeffs=cand_coeffs,
        scales=spec.scales,
        dofs=spec.dofs,
    )
    if current_loglik is None:
        current_loglik = mixture_loglik(spec, y, cond=cond)
    dll = mixture_loglik(cand_spec, y, cond=cond) - current_loglik
    if move.direction == "up":
        d_rev = 1.0 - birth_probability(p_k + 1, p_min, p_max)
        ratio = np.exp(dll) * d_rev / birth_probability(p_k, p_min, p_max) / _BIRTH_DENSITY
    else:
        b_rev = birth_probability(p_k - 1, p_min, p_max)
        d_cur = 1.0 - birth_probability(p_k, p_min, p_max)
        ratio = np.exp(dll) * b_rev / d_cur * _BIRTH_DENSITY
    return float(min(1.0, ratio))


@dataclass
class OrderSelectionSettings:
    iterations: int
    p_max: int = 4
    sweeps_per_move: int = 5
    burnin_sweeps: int = 200
    gamma0: float = 0.1


@dataclass
class OrderSelectionResult:
    state: OrderState
    preferred: tuple
    share: float
    sampler: GibbsSampler


def run_order_selection(y, g, priors: PriorConfig, settings: OrderSelectionSettings,
                        rng) -> OrderSelectionResult:
    """Interleave RJ order moves with within-model parameter sweeps.

    All likelihoods condition on the first p_max observations so that models
    of different order are compared on the same data window.
    """
    p_max = settings.p_max
    if p_max < P_MIN:
        raise ValueError("p_max must be at least 1")
    orders0 = [P_MIN] * g
    sampler = GibbsSampler(
        y, g, orders0, priors, rng, cond=p_max, gamma0=settings.gamma0
    )
    state = OrderState(orders=list(orders0), p_max=p_max)
    for s in range(settings.burnin_sweeps):
        sampler.sweep(adapt_step=2.0 / (1.0 + s) ** 0.6)
    for _ in range(settings.iterations):
        for _ in range(settings.sweeps_per_move):
            sampler.sweep()
        if p_max > P_MIN:
            move = propose_order_move(state, rng)
            spec = sampler.spec()
            a = acceptance_probability(
                move, spec, y, cond=p_max, p_min=state.p_min, p_max=p_max
            )
            if rng.uniform() < a:
                k = move.component
                new_coeffs = _candidate_coeffs(move, spec)
                sampler.set_state(phi=new_coeffs)
                state.orders[k] = len(new_coeffs[k])
        state.record_visit()
    preferred = state.preferred()
    share = state.visit_counts[preferred] / state.total_visits()
    return OrderSelectionResult(state, preferred, share, sampler)
