"""Per-frame joint beam and phase optimization.

Alternating structure: for fixed surface phases the best beam is the dominant
eigenvector of the stacked effective channel; for a fixed beam the continuous
phases are driven by a convex minorant whose per-element maximizer is closed
form, and the result is snapped to the discrete codebook by a depth-first
branch-and-bound over the two codebook neighbors of each element.

The codebook with e bits has levels 2*pi*a/(2^e - 1), a = 0..2^e-1 (the last
level wraps onto the first; e = 1 collapses to a single usable phase).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConvergenceError, InvalidInputError
from .numerics import dominant_eigpair
from .rate import aggregate_rate, composite_elements, gains_from_composite

TWO_PI = 2.0 * np.pi


def codebook_delta(bits: int) -> float:
    if bits < 1:
        raise InvalidInputError("quantization needs at least one bit")
    return TWO_PI / (2 ** bits - 1) if bits > 1 else TWO_PI


def codebook_levels(bits: int) -> np.ndarray:
    return np.arange(2 ** bits) * codebook_delta(bits) if bits > 1 else np.array([0.0, TWO_PI])


@dataclass
class PhaseVector:
    """Surface phase profile; bits=None means continuous."""

    phases: np.ndarray
    bits: Optional[int] = None

    def __post_init__(self):
        self.phases = np.asarray(self.phases, dtype=float)
        if self.phases.ndim != 1:
            raise InvalidInputError("phases must be a 1-D vector")
        if self.bits is not None:
            delta = codebook_delta(self.bits)
            steps = self.phases / delta
            if np.max(np.abs(steps - np.round(steps))) > 1e-9:
                raise InvalidInputError("discrete phases must sit on the codebook grid")

    @property
    def values(self) -> np.ndarray:
        return np.exp(1j * self.phases)


@dataclass
class BeamVector:
    values: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)


@dataclass
class BbResult:
    phases: np.ndarray
    gain_total: float
    objective: float
    nodes: int
    budget_exceeded: bool


@dataclass
class AoResult:
    beam: BeamVector
    phases: PhaseVector
    q: float
    rate: float
    iterations: int
    converged: bool
    trace: List[float] = field(default_factory=list)
    bb_budget_hits: int = 0


def best_beam_for_rows(rows: np.ndarray) -> Tuple[BeamVector, float]:
    """Unit beam maximizing sum |rows @ f|^2, with the attained value.

    rows holds the stacked per-user channel rows (N, L). The dominant eigenpair
    is taken on whichever of rows^H rows / rows rows^H is smaller and mapped
    back. An all-zero stack is degenerate: any unit beam attains 0.
    """
    rows = np.asarray(rows, dtype=np.complex128)
    n, l = rows.shape
    if not np.any(rows):
        f = np.zeros(l, dtype=np.complex128)
        f[0] = 1.0
        return BeamVector(f, degenerate=True), 0.0
    if n < l:
        target = rows @ rows.conj().T
    else:
        target = rows.conj().T @ rows
    try:
        u, lam = dominant_eigpair(target)
    except ConvergenceError as exc:
        # near-tied top eigenvalues; the last iterate is within the tie gap
        u, lam = exc.last_iterate
    if n < l:
        f = rows.conj().T @ u
        f = f / np.linalg.norm(f)
    else:
        f = u
    return BeamVector(f), float(lam)


def effective_rows(ch, theta: np.ndarray) -> np.ndarray:
    """Stacked rows v_i^H diag(theta) G, shape (N, L)."""
    return (np.conj(ch.v) * theta[None, :]) @ ch.g


def optimal_beamformer(ch, theta: np.ndarray) -> BeamVector:
    """Best transmit beam for fixed surface phases (dominant eigenvector)."""
    beam, _ = best_beam_for_rows(effective_rows(ch, theta))
    return beam


def sca_surrogate(c: np.ndarray, theta: np.ndarray, theta_s: np.ndarray) -> float:
    """First-order minorant of sum_i |theta^H c_i|^2 anchored at theta_s."""
    anchor = c @ np.conj(theta_s)
    cross = c @ np.conj(theta)
    return float(-np.sum(np.abs(anchor) ** 2)
                 + 2.0 * np.real(np.sum(np.conj(anchor) * cross)))


def continuous_phase_opt(ch, f: np.ndarray, init_phases: np.ndarray,
                         tol: float = 1e-9, max_iter: int = 200):
    """Relaxed phase optimization by iterating the minorant's closed-form argmax.

    Each step sets theta_m = exp(j arg(d_m)) with d = C theta_s, C = sum of
    c_i c_i^H; elements with d_m = 0 keep their phase. The true objective never
    decreases along the iteration (candidates that do not improve are
    discarded and stop it). Returns (phases in [0, 2pi), objective).
    """
    c = composite_elements(ch, f)
    cmat = c.T @ np.conj(c)
    phases = np.mod(np.asarray(init_phases, dtype=float), TWO_PI)
    theta = np.exp(1j * phases)
    obj = float(np.sum(np.abs(c @ np.conj(theta)) ** 2))
    for _ in range(max_iter):
        d = cmat @ theta
        cand = np.mod(np.where(np.abs(d) > 0, np.angle(d), phases), TWO_PI)
        cand_theta = np.exp(1j * cand)
        cand_obj = float(np.sum(np.abs(c @ np.conj(cand_theta)) ** 2))
        if cand_obj <= obj:
            break
        step = cand_obj - obj
        phases, theta, obj = cand, cand_theta, cand_obj
        if step <= tol * max(obj, np.finfo(float).tiny):
            break
    return phases, obj


def quantization_bounds(phases: np.ndarray, bits: int):
    """Codebook neighbors (lower, upper) of each relaxed phase.

    lower = floor(phase/delta) * delta, upper one level up; both are codebook
    members after the 2*pi wrap. Phases are first reduced mod 2*pi.
    """
    delta = codebook_delta(bits)
    ph = np.mod(np.asarray(phases, dtype=float), TWO_PI)
    idx = np.minimum(np.floor(ph / delta).astype(int), 2 ** bits - 2)
    return idx * delta, (idx + 1) * delta


def bb_upper_bound(partial: np.ndarray, remaining_abs: np.ndarray) -> float:
    """Optimistic completion of the gain sum for a partial assignment.

    partial holds sum_{assigned} conj(theta_j) c_{i,j} per user; remaining_abs
    the per-user sum of |c_{i,j}| over unassigned elements. Triangle
    inequality: no completion, discrete or continuous, can exceed this.
    """
    return float(np.sum((np.abs(partial) + np.asarray(remaining_abs)) ** 2))


def bb_discrete_search(ch, f: np.ndarray, target_phases: np.ndarray, bits: int,
                       power_w: float, node_budget: int = 1_000_000,
                       incumbent_phases: Optional[np.ndarray] = None,
                       weight: float = 1.0) -> BbResult:
    """Exact-or-budgeted search over the per-element codebook neighbor pairs.

    Explores the 2^M assignments formed by the two codebook neighbors of each
    relaxed phase, elements ordered by influence, nearer neighbor first.
    Branches are cut when the optimistic completion cannot beat the incumbent
    (a relative 1e-12 margin keeps roundoff from cutting true optima). The
    incumbent starts at the nearest-neighbor rounding of the target, or the
    better of that and incumbent_phases when given; the returned objective is
    the weighted frame rate at the winning assignment. If the node budget runs
    out the best assignment seen so far comes back flagged.
    """
    c = composite_elements(ch, f)
    n, m = c.shape
    lower, upper = quantization_bounds(target_phases, bits)
    target = np.mod(np.asarray(target_phases, dtype=float), TWO_PI)
    near_is_lower = (target - lower) <= (upper - target)
    near = np.where(near_is_lower, lower, upper)
    far = np.where(near_is_lower, upper, lower)

    order = np.argsort(-np.sum(np.abs(c), axis=0), kind="stable")
    cand_phases = np.stack([near, far], axis=1)[order]          # (M, 2)
    contrib = np.exp(-1j * cand_phases)[:, :, None] * c.T[order][:, None, :]
    abs_c = np.abs(c.T[order])                                   # (M, N)
    suffix = np.zeros((m + 1, n))
    suffix[:m] = np.cumsum(abs_c[::-1], axis=0)[::-1]

    def total_gain(ph: np.ndarray) -> float:
        return float(np.sum(gains_from_composite(c, np.exp(1j * ph))))

    best_phases = near.copy()
    best_gain = total_gain(near)
    if incumbent_phases is not None:
        inc = np.mod(np.asarray(incumbent_phases, dtype=float), TWO_PI)
        steps = inc / codebook_delta(bits)
        if np.max(np.abs(steps - np.round(steps))) > 1e-9:
            raise InvalidInputError("incumbent phases must sit on the codebook grid")
        inc_gain = total_gain(inc)
        if inc_gain > best_gain:
            best_gain, best_phases = inc_gain, inc.copy()

    # plain-python mirrors of the per-node data; builtin complex is faster
    # than numpy scalars at this size
    contrib_list = [[tuple(complex(x) for x in contrib[d, j]) for j in (0, 1)]
                    for d in range(m)]
    suffix_list = [tuple(float(x) for x in row) for row in suffix]
    zero = (0.0 + 0.0j,) * n

    nodes = 0
    exceeded = False
    path = [0] * m
    best_path = None
    stack = [(0, 1, zero), (0, 0, zero)]
    while stack:
        if nodes >= node_budget:
            exceeded = True
            break
        depth, choice, partial = stack.pop()
        nodes += 1
        path[depth] = choice
        add = contrib_list[depth][choice]
        new_partial = tuple(p + a for p, a in zip(partial, add))
        if depth + 1 == m:
            gain = 0.0
            for p in new_partial:
                gain += p.real * p.real + p.imag * p.imag
            if gain > best_gain:
                best_gain = gain
                best_path = path.copy()
            continue
        bound = 0.0
        for p, r in zip(new_partial, suffix_list[depth + 1]):
            t = abs(p) + r
            bound += t * t
        if bound <= best_gain * (1.0 - 1e-12):
            continue
        stack.append((depth + 1, 1, new_partial))
        stack.append((depth + 1, 0, new_partial))
    if best_path is not None:
        assigned = np.empty(m)
        for d, j in enumerate(best_path):
            assigned[order[d]] = cand_phases[d, j]
        best_phases = assigned
        best_gain = total_gain(assigned)
    objective = weight * aggregate_rate(best_gain, power_w, ch.noise_w)
    return BbResult(phases=best_phases, gain_total=best_gain, objective=objective,
                    nodes=nodes, budget_exceeded=exceeded)


def alternating_optimize(ch, cfg, power_w: Optional[float] = None) -> AoResult:
    """Joint beam/phase ascent for one frame.

    Starts from the all-zero (grid-feasible) phase profile, alternates the
    eigen-beam step, the relaxed phase ascent, and the codebook snap, and
    stops when the frame rate improves by less than ao_tol. The previous
    profile rides along as a branch-and-bound incumbent so the objective trace
    never decreases.
    """
    weight = 1.0 / cfg.frames_per_cell
    p = cfg.avg_power_w if power_w is None else power_w
    m = ch.v.shape[1]
    bits = cfg.quant_bits
    phases = np.zeros(m)
    beam = optimal_beamformer(ch, np.exp(1j * phases))
    rate_now = aggregate_rate(
        gains_from_composite(composite_elements(ch, beam.values),
                             np.exp(1j * phases)), p, ch.noise_w)
    trace = [weight * rate_now]
    converged = False
    budget_hits = 0
    iterations = 0
    for iterations in range(1, cfg.ao_max_iter + 1):
        beam = optimal_beamformer(ch, np.exp(1j * phases))
        relaxed, _ = continuous_phase_opt(ch, beam.values, phases,
                                          tol=cfg.sca_tol, max_iter=cfg.sca_max_iter)
        snap = bb_discrete_search(ch, beam.values, relaxed, bits, p,
                                  node_budget=cfg.bb_node_budget,
                                  incumbent_phases=phases, weight=weight)
        if snap.budget_exceeded:
            budget_hits += 1
        phases = snap.phases
        new_rate = aggregate_rate(
            gains_from_composite(composite_elements(ch, beam.values),
                                 np.exp(1j * phases)), p, ch.noise_w)
        trace.append(weight * new_rate)
        if abs(new_rate - rate_now) < cfg.ao_tol:
            rate_now = new_rate
            converged = True
            break
        rate_now = new_rate
    snapped = np.mod(phases, TWO_PI)
    delta = codebook_delta(bits)
    snapped = np.round(snapped / delta) * delta
    return AoResult(
        beam=beam,
        phases=PhaseVector(snapped, bits=bits),
        q=weight * rate_now,
        rate=rate_now,
        iterations=iterations,
        converged=converged,
        trace=trace,
        bb_budget_hits=budget_hits,
    )
