"""Shared numerical linear algebra helpers.

Conventions used across the package:

* rank decisions use a scale-invariant cutoff: a singular value (or
  eigenvalue of a PSD matrix) below ``RANK_RTOL`` times the largest one
  counts as zero;
* dense matrices up to ``DENSE_LIMIT`` columns get exact singular values,
  larger problems fall back to power iteration on ``X* X``.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

RANK_RTOL = 1e-10
DENSE_LIMIT = 2000
POWER_ITERATIONS = 300
POWER_RTOL = 1e-12
DEFAULT_SEED = 0xC0FFEE


def as_complex(a) -> np.ndarray:
    return np.asarray(a, dtype=complex)


def is_sparse(x) -> bool:
    return sparse.issparse(x)


def adjoint(x):
    """Conjugate transpose for dense arrays and sparse matrices alike."""
    if sparse.issparse(x):
        return x.conj().T.tocsr()
    return np.conj(x.T)


def to_dense(x) -> np.ndarray:
    return x.toarray() if sparse.issparse(x) else np.asarray(x)


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def rank_from_spectrum(values: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Numerical rank of a nonnegative spectrum under the relative cutoff."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0
    top = values.max(initial=0.0)
    if top <= 0.0:
        return 0
    return int(np.sum(values > rtol * top))


def orthonormal_columns(m: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the column space of ``m`` (deterministic, via SVD)."""
    m = as_complex(m)
    if m.size == 0:
        return np.zeros((m.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    return u[:, : rank_from_spectrum(s, rtol)]


def operator_norm(x) -> float:
    """Largest singular value. Exact for small problems, iterative above the limit."""
    if sparse.issparse(x):
        if min(x.shape) <= DENSE_LIMIT:
            return _sigma_max_gram(x)[0]
        return power_iteration_sigma(x)[0]
    x = as_complex(x)
    if x.size == 0:
        return 0.0
    if min(x.shape) <= DENSE_LIMIT:
        return float(np.linalg.svd(x, compute_uv=False)[0]) if x.size else 0.0
    return power_iteration_sigma(x)[0]


def _sigma_max_gram(x) -> tuple[float, np.ndarray]:
    """Exact largest singular value of ``x`` through the Gram matrix ``x* x``.

    Works for sparse ``x`` with a small number of columns without ever
    densifying ``x`` itself. Returns ``(sigma, right_singular_vector)``.
    """
    xh = adjoint(x)
    g = xh @ x
    g = to_dense(g)
    g = hermitian_part(g)
    if g.shape[0] == 0:
        return 0.0, np.zeros(0, dtype=complex)
    evals, evecs = np.linalg.eigh(g)
    idx = int(np.argmax(evals))
    sigma = float(np.sqrt(max(evals[idx], 0.0)))
    return sigma, evecs[:, idx]


def power_iteration_sigma(
    x,
    iterations: int = POWER_ITERATIONS,
    rtol: float = POWER_RTOL,
    seed: int = DEFAULT_SEED,
) -> tuple[float, np.ndarray]:
    """Largest singular value of ``x`` by power iteration on ``x* x``.

    The returned value is a Rayleigh quotient on an explicit unit vector and
    therefore a rigorous lower bound for the true largest singular value even
    when the iteration has not converged.
    """
    n = x.shape[1]
    if n == 0:
        return 0.0, np.zeros(0, dtype=complex)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    xh = adjoint(x)
    prev = 0.0
    for _ in range(iterations):
        w = xh @ (x @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, v
        v = w / nw
        sig = float(np.sqrt(nw))
        if prev > 0.0 and abs(sig - prev) <= rtol * prev:
            prev = sig
            break
        prev = sig
    xv = x @ v
    return float(np.linalg.norm(xv)), v


def restricted_sigma_max(x, seed: int = DEFAULT_SEED) -> tuple[float, np.ndarray]:
    """Largest singular value of a (possibly tall) restriction matrix.

    Dispatches between the exact Gram eigenproblem (few columns) and power
    iteration (many columns), per the package-wide size policy.
    """
    if x.shape[1] <= DENSE_LIMIT:
        return _sigma_max_gram(x)
    return power_iteration_sigma(x, seed=seed)


def residual_norm(a, b) -> float:
    """Operator-norm distance between two matrices of matching storage."""
    if sparse.issparse(a) or sparse.issparse(b):
        a = a if sparse.issparse(a) else sparse.csr_matrix(a)
        b = b if sparse.issparse(b) else sparse.csr_matrix(b)
        return operator_norm((a - b).tocsr())
    return operator_norm(np.asarray(a) - np.asarray(b))
