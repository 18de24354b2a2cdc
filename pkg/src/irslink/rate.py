"""Per-frame rates for a superposed cluster with successive decoding.

All users in a frame share one beam and one transmit power. Receivers decode
in descending effective-gain order, stripping stronger users first, so the
cluster sum rate collapses to log2(1 + P * sum(gains) / noise); the per-user
SINR split and the closed form agree exactly (telescoping product).
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError


def effective_gain(v: np.ndarray, theta: np.ndarray, g: np.ndarray, f: np.ndarray) -> float:
    """|v^H diag(theta) G f|^2 for one user."""
    return float(np.abs(np.vdot(v, theta * (g @ f))) ** 2)


def effective_gains(ch, theta: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Vector of per-user effective gains for one realization."""
    w = ch.g @ f
    s = np.conj(ch.v) @ (theta * w)
    return np.abs(s) ** 2


def composite_elements(ch, f: np.ndarray) -> np.ndarray:
    """Per-user element response vectors c_i with |theta^H c_i| = |v_i^H diag(theta) G f|.

    c_i = v_i * conj(G f) elementwise, shape (N, M). The phase optimizers work
    on these; the identity above makes their objective the exact physical gain.
    """
    w = ch.g @ f
    return ch.v * np.conj(w)[None, :]


def gains_from_composite(c: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return np.abs(c @ np.conj(theta)) ** 2


def sic_order(gains: np.ndarray) -> np.ndarray:
    """Decode order: descending gain, ties broken by user index."""
    g = np.asarray(gains, dtype=float)
    return np.argsort(-g, kind="stable")


def sic_sinr(gains: np.ndarray, power_w: float, noise_w: float):
    """(order, sinr) with SINRs in decode order.

    The user at decode position i sees interference only from users decoded
    after it. Power and noise must be nonnegative, noise positive.
    """
    if power_w < 0:
        raise InvalidInputError("power must be nonnegative")
    if noise_w <= 0:
        raise InvalidInputError("noise power must be positive")
    order = sic_order(gains)
    g_sorted = np.asarray(gains, dtype=float)[order]
    tail = np.concatenate([np.cumsum(g_sorted[::-1])[::-1][1:], [0.0]])
    return order, power_w * g_sorted / (noise_w + power_w * tail)


def per_user_rates(gains: np.ndarray, power_w: float, noise_w: float):
    order, sinr = sic_sinr(gains, power_w, noise_w)
    return order, np.log2(1.0 + sinr)


def aggregate_rate(gains: np.ndarray, power_w: float, noise_w: float) -> float:
    """Cluster sum rate log2(1 + P * sum(g) / noise); equals the SIC sum exactly."""
    if noise_w <= 0:
        raise InvalidInputError("noise power must be positive")
    return float(np.log2(1.0 + power_w * float(np.sum(gains)) / noise_w))


def frame_weight(cfg) -> float:
    """Weight tau/t of one frame in the cell-transit average."""
    return 1.0 / cfg.frames_per_cell
