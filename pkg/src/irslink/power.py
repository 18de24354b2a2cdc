"""Window-level transmit power allocation.

Within each scheduling window the per-frame effective gains are fixed and the
problem is to split the pooled power budget across frames to maximize the sum
of log rates, subject to the pool total and a per-frame cap. The dual ascent
drives the budget multiplier with an adaptive step until the complementary
water-filling allocation meets the pool constraint; a Euclidean projection and
an equal-split floor guard the result.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .errors import InvalidInputError

LN2 = float(np.log(2.0))


@dataclass
class MultiplierState:
    """Dual variables and their step sizes for one ascent iteration."""

    lam: np.ndarray        # lower-bound duals, one per frame
    beta: np.ndarray       # cap duals, one per frame
    mu: float              # pool (budget) dual
    c_step: float = 1.0
    d_step: float = 1.0
    e_step: float = 10.0


@dataclass
class PowerWindow:
    power: np.ndarray
    objective: float
    raw_power: np.ndarray
    raw_objective: float
    multipliers: Optional[MultiplierState]
    iterations: int
    converged: bool
    equal_split_used: bool = False


def _check_window(gamma: np.ndarray, budget: float, cap: float) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 1 or gamma.size == 0:
        raise InvalidInputError("gamma must be a non-empty 1-D vector")
    if np.any(~np.isfinite(gamma)) or np.any(gamma < 0):
        raise InvalidInputError("gamma entries must be finite and >= 0")
    if not (budget > 0 and np.isfinite(budget)):
        raise InvalidInputError("power budget must be positive")
    if not (cap > 0 and np.isfinite(cap)):
        raise InvalidInputError("per-frame cap must be positive")
    if cap * gamma.size < budget:
        raise InvalidInputError("caps too small to spend the budget")
    return gamma


def kkt_power(mult: MultiplierState, gamma: np.ndarray, cap: float) -> np.ndarray:
    """Stationary power for fixed duals: p = 1/(ln2 (beta - lam - mu)) - 1/gamma.

    Clamped to [0, cap]. A non-positive denominator means the marginal utility
    always wins, so live frames take the cap; zero-gain frames take nothing.
    """
    gamma = np.asarray(gamma, dtype=float)
    denom = np.asarray(mult.beta - mult.lam - mult.mu, dtype=float)
    denom = np.broadcast_to(denom, gamma.shape)
    live = gamma > 0
    p = np.zeros_like(gamma)
    pos = live & (denom > 0)
    with np.errstate(divide="ignore", over="ignore"):
        p[pos] = np.clip(1.0 / (LN2 * denom[pos]) - 1.0 / gamma[pos], 0.0, cap)
    p[live & ~(denom > 0)] = cap
    return p


def update_multipliers(mult: MultiplierState, p: np.ndarray, cap: float,
                       budget: float, project: bool = True) -> MultiplierState:
    """One plain subgradient step on all duals.

    lam' = lam - c p, beta' = beta - d (cap - p), mu' = mu - e (sum p - budget),
    optionally projected to lam, beta >= 0; any step size above 1 is halved for
    the next round.
    """
    p = np.asarray(p, dtype=float)
    lam = mult.lam - mult.c_step * p
    beta = mult.beta - mult.d_step * (cap - p)
    mu = mult.mu - mult.e_step * (float(np.sum(p)) - budget)
    if project:
        lam = np.maximum(lam, 0.0)
        beta = np.maximum(beta, 0.0)
    halve = lambda s: s / 2.0 if s > 1.0 else s
    return MultiplierState(lam=lam, beta=beta, mu=mu,
                           c_step=halve(mult.c_step),
                           d_step=halve(mult.d_step),
                           e_step=halve(mult.e_step))


def window_throughput(p: np.ndarray, gamma: np.ndarray, weight: float = 1.0) -> float:
    """Weighted sum of log2(1 + gamma p) over the window."""
    p = np.asarray(p, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    return float(weight * np.sum(np.log2(1.0 + gamma * p)))


def project_to_pool(p: np.ndarray, budget: float, cap: float) -> np.ndarray:
    """Euclidean projection onto {0 <= p_i <= cap, sum p = budget}.

    Bisection on the common shift in clip(p - shift, 0, cap); the pool sum is
    continuous and non-increasing in the shift.
    """
    p = np.asarray(p, dtype=float)
    lo = float(np.min(p)) - cap
    hi = float(np.max(p))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(np.sum(np.clip(p - mid, 0.0, cap))) > budget:
            lo = mid
        else:
            hi = mid
    return np.clip(p - 0.5 * (lo + hi), 0.0, cap)


def allocate_window(gamma: np.ndarray, budget: float, *, cap: Optional[float] = None,
                    mu_init: float = -50.0, e_init: float = 10.0,
                    c_init: float = 1.0, d_init: float = 1.0,
                    tol: float = 1e-2, feas_tol: float = 1e-12,
                    max_iter: int = 100, project_duals: bool = True) -> PowerWindow:
    """Dual ascent for one window's power split.

    The budget dual moves by mu <- mu - e (sum p - budget). With projected
    duals the frame-wise lam and beta stay at zero (their subgradients are
    non-positive feasibility slacks), so the pool residual is monotone
    non-decreasing in mu and the stationary point is plain water-filling in mu
    alone. The controller exploits that: while the residual keeps one sign the
    step doubles (geometric search for a bracket), and once both signs have
    been seen each move lands on the bracket midpoint, so mu converges
    geometrically regardless of the gain spread. The raw allocation is then
    projected onto the pool simplex box, and an equal split replaces it if
    that scores better.
    """
    if cap is None:
        cap = budget
    gamma = _check_window(gamma, budget, cap)
    n = gamma.size
    equal = np.full(n, budget / n)
    if not np.any(gamma > 0):
        return PowerWindow(power=equal, objective=0.0, raw_power=equal.copy(),
                           raw_objective=0.0, multipliers=None, iterations=0,
                           converged=True, equal_split_used=True)

    mult = MultiplierState(lam=np.zeros(n), beta=np.zeros(n), mu=mu_init,
                           c_step=c_init, d_step=d_init, e_step=e_init)
    p = kkt_power(mult, gamma, cap)
    mu_lo = None        # largest mu seen with a pool deficit
    mu_hi = None        # smallest mu seen with a pool surplus
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        resid = float(np.sum(p)) - budget
        if abs(resid) <= feas_tol * budget:
            converged = True
            break
        if resid > 0:
            mu_hi = mult.mu if mu_hi is None else min(mu_hi, mult.mu)
        else:
            mu_lo = mult.mu if mu_lo is None else max(mu_lo, mult.mu)
        if mu_lo is not None and mu_hi is not None:
            new_mu = 0.5 * (mu_lo + mu_hi)
            e_step = mult.e_step
        else:
            e_step = mult.e_step * 2.0 if iterations > 1 else mult.e_step
            new_mu = mult.mu - e_step * resid
        lam = mult.lam - mult.c_step * p
        beta = mult.beta - mult.d_step * (cap - p)
        if project_duals:
            lam = np.maximum(lam, 0.0)
            beta = np.maximum(beta, 0.0)
        if abs(new_mu - mult.mu) < tol:
            break       # dual motion stalled below tolerance
        mult = replace(mult, lam=lam, beta=beta, mu=new_mu, e_step=e_step)
        p = kkt_power(mult, gamma, cap)

    raw = p.copy()
    raw_obj = window_throughput(raw, gamma)
    final = project_to_pool(raw, budget, cap)
    final_obj = window_throughput(final, gamma)
    eq_obj = window_throughput(equal, gamma)
    used_equal = eq_obj > final_obj
    if used_equal:
        final, final_obj = equal, eq_obj
    return PowerWindow(power=final, objective=final_obj, raw_power=raw,
                       raw_objective=raw_obj, multipliers=mult,
                       iterations=iterations, converged=converged,
                       equal_split_used=used_equal)


def waterfill_oracle(gamma: np.ndarray, budget: float,
                     cap: Optional[float] = None) -> np.ndarray:
    """Reference water-filling by bisection on the water level itself.

    Independent of the dual ascent: p_i = clip(level - 1/gamma_i, 0, cap) on
    live frames, level bisected until the pool sum matches the budget to
    near machine precision.
    """
    if cap is None:
        cap = budget
    gamma = _check_window(gamma, budget, cap)
    live = gamma > 0
    if not np.any(live):
        return np.full(gamma.size, budget / gamma.size)
    inv = 1.0 / gamma[live]

    def pool(level: float) -> float:
        return float(np.sum(np.clip(level - inv, 0.0, cap)))

    lo = float(np.min(inv))
    hi = budget + float(np.max(inv))
    while pool(hi) < budget:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if pool(mid) < budget:
            lo = mid
        else:
            hi = mid
    p = np.zeros(gamma.size)
    p[live] = np.clip(0.5 * (lo + hi) - inv, 0.0, cap)
    return p
