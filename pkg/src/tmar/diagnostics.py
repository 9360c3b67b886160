"""Posterior summarization: HDIs, effective sample size, relabeling."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np


def hdi(draws, mass: float = 0.95) -> tuple:
    """Shortest contiguous interval containing ceil(mass*N) sorted draws."""
    x = np.sort(np.asarray(draws, dtype=float))
    n = len(x)
    if n < 100:
        raise ValueError(f"need at least 100 draws for an HDI (got {n})")
    if not 0.0 < mass < 1.0:
        raise ValueError("mass must lie in (0, 1)")
    k = int(np.ceil(mass * n))
    widths = x[k - 1 :] - x[: n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def effective_sample_size(draws) -> float:
    """ESS from the initial-positive-sequence autocorrelation sum.

    Autocovariances via FFT; lag pairs (rho_{2m}, rho_{2m+1}) are summed
    while their sum stays positive (Geyer's initial positive sequence).
    Constant sequences have ESS 0 by convention.
    """
    x = np.asarray(draws, dtype=float)
    n = len(x)
    if n < 100:
        raise ValueError(f"need at least 100 draws (got {n})")
    x = x - x.mean()
    var = float(x @ x) / n
    if var == 0.0:
        return 0.0
    nfft = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]
    tau = 1.0
    m = 0
    while 2 * m + 2 < n:
        pair = rho[2 * m + 1] + rho[2 * m + 2]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        m += 1
    return float(min(n, n / tau))


@dataclass
class ParameterSummary:
    mean: float
    sd: float
    hdi_lower: float
    hdi_upper: float
    ess: float


def summarize(draws, mass: float = 0.95) -> ParameterSummary:
    x = np.asarray(draws, dtype=float)
    lo, hi = hdi(x, mass)
    return ParameterSummary(
        mean=float(x.mean()),
        sd=float(x.std(ddof=1)),
        hdi_lower=lo,
        hdi_upper=hi,
        ess=effective_sample_size(x),
    )


def _order_groups(orders) -> list:
    """Indices grouped by equal AR order; labels may only swap within a group."""
    groups = {}
    for k, p in enumerate(orders):
        groups.setdefault(p, []).append(k)
    return list(groups.values())


def relabel_for_reporting(trace):
    """Per-iteration component permutation for readable reporting.

    Minimizes squared distance of (mu_k, log sigma_k) to the first retained
    draw; only components of equal AR order may swap (a swap across orders
    would change the model). Returns (relabeled trace, permutations array).
    The input trace is left untouched; evidence estimation must use raw
    traces.
    """
    from copy import deepcopy

    n_iter = len(trace)
    g = trace.g
    groups = _order_groups(trace.orders)
    ref = np.column_stack([trace.mu[0], -0.5 * np.log(trace.tau[0])])
    perms = np.tile(np.arange(g), (n_iter, 1))
    out = deepcopy(trace)
    cand_perms = []
    for combo in _group_permutations(groups, g):
        cand_perms.append(np.asarray(combo))
    for j in range(n_iter):
        feats = np.column_stack([trace.mu[j], -0.5 * np.log(trace.tau[j])])
        best, best_cost = None, np.inf
        for perm in cand_perms:
            cost = float(((feats[perm] - ref) ** 2).sum())
            if cost < best_cost:
                best, best_cost = perm, cost
        perms[j] = best
        out.pi[j] = trace.pi[j][best]
        out.mu[j] = trace.mu[j][best]
        out.tau[j] = trace.tau[j][best]
        out.nu[j] = trace.nu[j][best]
        for k in range(g):
            out.phi[k][j] = trace.phi[best[k]][j]
    return out, perms


def _group_permutations(groups, g):
    """All permutations of 0..g-1 that permute only within equal-order groups."""
    pools = [list(permutations(grp)) for grp in groups]

    def build(i, current):
        if i == len(pools):
            yield tuple(current)
            return
        for perm in pools[i]:
            nxt = list(current)
            for spot, idx in zip(groups[i], perm):
                nxt[spot] = idx
            yield from build(i + 1, nxt)

    yield from build(0, [None] * g)
