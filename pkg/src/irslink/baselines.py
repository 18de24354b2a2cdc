"""Reference schemes the joint optimizer is compared against.

All of them work on the same per-frame channel realization and report the
frame rate attained with the pooled transmit power at its per-frame average.
Phase profiles always live on the quantized codebook; the transmit beam is
whatever each scheme can justify (eigen-beam for the random and cross-entropy
schemes, one-shot zero-forcing plus coordinate sweeps for the successive
refinement scheme, eigen-beam on the direct links when the surface is absent).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .optimizer import best_beam_for_rows, codebook_delta, effective_rows
from .rate import aggregate_rate, composite_elements, gains_from_composite


def _unit_first(length: int) -> np.ndarray:
    f = np.zeros(length, dtype=np.complex128)
    f[0] = 1.0
    return f


@dataclass
class FrameSolution:
    """What one scheme produced for one frame."""

    rate: float
    gain_total: float
    phases: Optional[np.ndarray]
    beam: np.ndarray
    fallback: bool = False


@dataclass
class CeParams:
    population: int = 200
    elite_frac: float = 0.1
    smoothing: float = 0.7
    generations: int = 50
    mutants: Optional[int] = None       # default: one per surface element
    power_iters: int = 60


def _distinct_levels(bits: int) -> np.ndarray:
    # the top codebook level wraps onto zero, so it adds no new phase
    return np.arange(max(2 ** bits - 1, 1)) * codebook_delta(bits)


def _eigen_solution(ch, cfg, phases: np.ndarray) -> FrameSolution:
    theta = np.exp(1j * phases)
    beam, _ = best_beam_for_rows(effective_rows(ch, theta))
    gains = gains_from_composite(composite_elements(ch, beam.values), theta)
    total = float(np.sum(gains))
    rate = aggregate_rate(gains, cfg.avg_power_w, ch.noise_w)
    return FrameSolution(rate=rate, gain_total=total, phases=phases,
                         beam=beam.values)


def random_phase_solution(ch, cfg, rng) -> FrameSolution:
    """Uniform draw over the codebook, then the matching eigen-beam."""
    m = ch.v.shape[1]
    draws = rng.integers(0, 2 ** cfg.quant_bits, shape=m)
    phases = draws * codebook_delta(cfg.quant_bits)
    return _eigen_solution(ch, cfg, phases)


def successive_refinement_solution(ch, cfg, max_passes: int = 8,
                                   rank_rcond: float = 0.1) -> FrameSolution:
    """One-shot beam, then per-element codebook sweeps.

    The beam zero-forces the effective rows at the flat phase profile toward
    equal per-user response (pseudo-inverse applied to the all-ones target).
    Effective rows whose smallest singular value falls below rank_rcond times
    the largest count as rank deficient; inverting them would burn nearly all
    beam power on cancellation, so the beam falls back to maximum-ratio
    transmission toward the strongest user (flagged on the result). The beam
    then stays fixed while each surface element in turn tries every codebook
    level, keeping the best; passes repeat until a full sweep changes nothing.
    """
    m = ch.v.shape[1]
    n = ch.v.shape[0]
    l = ch.g.shape[1]
    if l < n:
        raise InvalidInputError("zero-forcing needs at least as many "
                                "antennas as users")
    phases = np.zeros(m)
    rows = effective_rows(ch, np.exp(1j * phases))
    sv = np.linalg.svd(rows, compute_uv=False)
    fallback = sv[0] == 0 or sv[-1] < rank_rcond * sv[0]
    if fallback:
        strongest = int(np.argmax(np.linalg.norm(rows, axis=1)))
        f = np.conj(rows[strongest])
        norm = np.linalg.norm(f)
        f = f / norm if norm > 0 else _unit_first(l)
    else:
        f = np.linalg.pinv(rows) @ np.ones(n, dtype=np.complex128)
        f = f / np.linalg.norm(f)
    c = composite_elements(ch, f)
    levels = _distinct_levels(cfg.quant_bits)

    def total(ph):
        return float(np.sum(gains_from_composite(c, np.exp(1j * ph))))

    best = total(phases)
    for _ in range(max_passes):
        changed = False
        for em in range(m):
            keep = phases[em]
            for lvl in levels:
                if lvl == keep:
                    continue
                phases[em] = lvl
                val = total(phases)
                if val > best:
                    best = val
                    keep = lvl
                    changed = True
            phases[em] = keep
        if not changed:
            break
    gains = gains_from_composite(c, np.exp(1j * phases))
    rate = aggregate_rate(gains, cfg.avg_power_w, ch.noise_w)
    return FrameSolution(rate=rate, gain_total=float(np.sum(gains)),
                         phases=phases, beam=f, fallback=bool(fallback))


def _batch_top_eigs(grams: np.ndarray, iters: int) -> np.ndarray:
    """Largest eigenvalue of each Hermitian PSD slice by power iteration."""
    p, n, _ = grams.shape
    x = np.ones((p, n), dtype=np.complex128)
    x += 1e-3 * np.arange(n)[None, :]
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    for _ in range(iters):
        y = np.einsum("pij,pj->pi", grams, x)
        norm = np.linalg.norm(y, axis=1, keepdims=True)
        x = np.where(norm > 0, y / np.maximum(norm, 1e-300), x)
    y = np.einsum("pij,pj->pi", grams, x)
    return np.real(np.einsum("pi,pi->p", np.conj(x), y))


def cross_entropy_solution(ch, cfg, rng,
                           params: Optional[CeParams] = None) -> FrameSolution:
    """Per-element categorical cross-entropy search over codebook levels.

    Each generation samples a population from the running per-element level
    distribution, adds single-element mutations of the incumbent, scores every
    candidate by the top effective-channel eigenvalue (batched power
    iteration), refits the distribution on the elite slice with exponential
    smoothing, and keeps the best candidate seen. The winner is re-scored with
    the fully converged eigen-beam.
    """
    if params is None:
        params = CeParams()
    m = ch.v.shape[1]
    levels = _distinct_levels(cfg.quant_bits)
    k = levels.size
    if k == 1:
        return _eigen_solution(ch, cfg, np.zeros(m))
    n_mut = m if params.mutants is None else params.mutants
    probs = np.full((m, k), 1.0 / k)
    best_idx = np.zeros(m, dtype=int)
    best_score = -np.inf
    n_elite = max(1, int(round(params.elite_frac * (params.population + n_mut))))
    for _ in range(params.generations):
        u = rng.uniform(shape=(params.population, m))
        cum = np.cumsum(probs, axis=1)
        cum[:, -1] = 1.0
        pop = np.sum(u[:, :, None] >= cum[None, :, :], axis=2)
        pop = np.minimum(pop, k - 1)
        if n_mut > 0:
            elems = rng.integers(0, m, shape=n_mut)
            offs = rng.integers(1, k, shape=n_mut)
            mut = np.tile(best_idx, (n_mut, 1))
            mut[np.arange(n_mut), elems] = (mut[np.arange(n_mut), elems]
                                            + offs) % k
            pop = np.vstack([pop, mut])
        thetas = np.exp(1j * levels[pop])                       # (P, M)
        rows = np.einsum("pm,nm,ml->pnl", thetas, np.conj(ch.v), ch.g)
        grams = np.einsum("pnl,pql->pnq", rows, np.conj(rows))
        scores = _batch_top_eigs(grams, params.power_iters)
        top = int(np.argmax(scores))
        if scores[top] > best_score:
            best_score = float(scores[top])
            best_idx = pop[top].copy()
        elite = pop[np.argsort(-scores, kind="stable")[:n_elite]]
        freq = np.zeros_like(probs)
        for lvl in range(k):
            freq[:, lvl] = np.mean(elite == lvl, axis=0)
        probs = params.smoothing * freq + (1.0 - params.smoothing) * probs
    return _eigen_solution(ch, cfg, levels[best_idx])


def no_surface_solution(ch, cfg) -> FrameSolution:
    """Eigen-beam over the direct (through-carriage) links only."""
    rows = np.conj(ch.direct)
    beam, _ = best_beam_for_rows(rows)
    gains = np.abs(rows @ beam.values) ** 2
    rate = aggregate_rate(gains, cfg.avg_power_w, ch.noise_w)
    return FrameSolution(rate=rate, gain_total=float(np.sum(gains)),
                         phases=None, beam=beam.values)
