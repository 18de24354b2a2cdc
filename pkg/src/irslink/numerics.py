"""Low-level numerical kernels: keyed random streams and Hermitian eigensolvers.

The simulator never touches global RNG state. Every stochastic quantity is
drawn from a counter-based stream keyed by (seed, stream id), so trials can be
dispatched to workers in any order and still reproduce bit-identical results.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, InvalidInputError

_MASK64 = (1 << 64) - 1

# fixed key for the power-iteration start vector; any value works, it only has
# to be the same on every call
_START_KEY = 0x9E3779B97F4A7C15


class RngStream:
    """Counter-based random stream keyed by (seed, stream id).

    Streams with distinct (seed, stream) keys are statistically independent,
    and a given key reproduces the same draws on every platform and under any
    degree of parallelism.
    """

    def __init__(self, seed: int, stream: int = 0):
        if not isinstance(seed, (int, np.integer)) or seed < 0:
            raise InvalidInputError(f"seed must be a nonnegative integer, got {seed!r}")
        if not isinstance(stream, (int, np.integer)) or stream < 0:
            raise InvalidInputError(f"stream must be a nonnegative integer, got {stream!r}")
        self.seed = int(seed)
        self.stream = int(stream)
        key = (self.seed & _MASK64) | ((self.stream & _MASK64) << 64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def standard_normal(self, shape=None):
        return self.generator.standard_normal(size=shape)

    def uniform(self, low=0.0, high=1.0, shape=None):
        return self.generator.uniform(low, high, size=shape)

    def integers(self, low, high, shape=None):
        return self.generator.integers(low, high, size=shape)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def sample_cn01(rng: RngStream, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian entries with E|z|^2 = 1.

    Real and imaginary parts are drawn in one block (real first) so the
    consumption order is fixed.
    """
    if np.isscalar(shape):
        shape = (shape,)
    blocks = rng.standard_normal((2, *shape))
    return (blocks[0] + 1j * blocks[1]) / np.sqrt(2.0)


def _as_hermitian(matrix) -> np.ndarray:
    h = np.asarray(matrix, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {h.shape}")
    scale = np.max(np.abs(h)) if h.size else 0.0
    if scale > 0 and np.max(np.abs(h - h.conj().T)) > 1e-10 * scale:
        raise InvalidInputError("matrix is not Hermitian within 1e-10 relative tolerance")
    return h


def dominant_eigpair(matrix, tol: float = 1e-10, max_iter: int = 10_000):
    """Dominant eigenpair of a Hermitian PSD matrix by power iteration.

    Parameters
    ----------
    matrix : (n, n) array_like, Hermitian positive semidefinite
    tol : relative residual tolerance; iteration stops when
        ||H x - lam x|| <= tol * lam with lam the Rayleigh quotient
    max_iter : iteration budget

    Returns
    -------
    (vector, value) : unit-norm eigenvector and the dominant eigenvalue.

    Raises
    ------
    ConvergenceError
        if the budget is exhausted; the last iterate rides on the exception.
    """
    h = _as_hermitian(matrix)
    n = h.shape[0]
    start = RngStream(_START_KEY, 0)
    x = sample_cn01(start, n)
    x = x / np.linalg.norm(x)
    if np.max(np.abs(h)) == 0.0:
        return x, 0.0
    lam = 0.0
    for _ in range(max_iter):
        y = h @ x
        lam = float(np.real(np.vdot(x, y)))
        if np.linalg.norm(y - lam * x) <= tol * max(lam, np.finfo(float).tiny):
            return x, lam
        norm_y = np.linalg.norm(y)
        if norm_y == 0.0:
            # start vector fell in the kernel; restart once from a fresh draw
            x = sample_cn01(start, n)
            x = x / np.linalg.norm(x)
            continue
        x = y / norm_y
    raise ConvergenceError(
        f"power iteration did not reach tol={tol} in {max_iter} iterations",
        last_iterate=(x, lam),
    )


def jacobi_eigh(matrix, tol: float = 1e-12, max_sweeps: int = 100):
    """Full eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Independent of the power-iteration path; used as a verification oracle.
    Dimension is capped at 64 (the oracle is O(n^3) per sweep in pure numpy).

    Returns
    -------
    (values, vectors) : eigenvalues sorted descending, eigenvectors in the
        matching columns, H = vectors @ diag(values) @ vectors^H.
    """
    a = _as_hermitian(matrix).copy()
    n = a.shape[0]
    if n > 64:
        raise InvalidInputError(f"jacobi_eigh is capped at dimension 64, got {n}")
    x = np.eye(n, dtype=np.complex128)
    if n == 1:
        return np.array([a[0, 0].real]), x
    fro = np.linalg.norm(a)
    if fro == 0.0:
        return np.zeros(n), x
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.linalg.norm(a) ** 2 - np.sum(np.abs(np.diag(a)) ** 2), 0.0))
        if off <= tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = a[p, q]
                absb = abs(b)
                if absb <= 1e-300:
                    continue
                phase = b / absb
                rho = (a[q, q].real - a[p, p].real) / (2.0 * absb)
                if rho == 0.0:
                    t = 1.0
                else:
                    t = np.sign(rho) / (abs(rho) + np.hypot(1.0, rho))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # A <- U^H A U with U = [[c, s e], [-s conj(e), c]], e = phase
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * np.conj(phase) * col_q
                a[:, q] = s * phase * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * phase * row_q
                a[q, :] = s * np.conj(phase) * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                xp = x[:, p].copy()
                xq = x[:, q].copy()
                x[:, p] = c * xp - s * np.conj(phase) * xq
                x[:, q] = s * phase * xp + c * xq
    else:
        raise ConvergenceError(
            f"jacobi_eigh did not converge in {max_sweeps} sweeps",
            last_iterate=(np.real(np.diag(a)), x),
        )
    values = np.real(np.diag(a))
    order = np.argsort(values)[::-1]
    return values[order], x[:, order]
