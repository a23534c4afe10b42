"""Independent desk-scale references validating the stochastic machinery.

Everything here favors transparency over speed: dense eigendecomposition via
Householder reduction plus the in-repo tridiagonal QL solver, Cholesky-based
log-determinants, exhaustive triangle counting, and Monte-Carlo tail curves.
"""

from __future__ import annotations

import math

import numpy as np

from .bounds import NormData
from .lanczos import tridiag_eigh
from .operators import SparseSymmetricMatrix
from .probes import ProbeKind

__all__ = [
    "DenseSymmetric",
    "as_dense_symmetric",
    "householder_tridiagonalize",
    "eigh_dense",
    "exact_trace_f",
    "exact_quadratic_form",
    "matrix_function",
    "cholesky_logdet",
    "exact_triangle_count",
    "empirical_errors",
    "empirical_tail",
    "norm_data_from_dense",
]

_MAX_DENSE = 5000


class DenseSymmetric:
    """Validated dense symmetric matrix for oracle computations (n <= 5000)."""

    def __init__(self, matrix):
        a = np.asarray(matrix, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("need a square matrix")
        if a.shape[0] > _MAX_DENSE:
            raise ValueError(f"oracle is guarded to n <= {_MAX_DENSE}")
        scale = np.abs(a).max(initial=0.0) or 1.0
        if np.abs(a - a.T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("matrix is not symmetric to 1e-12")
        self.matrix = 0.5 * (a + a.T)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def as_dense_symmetric(matrix) -> np.ndarray:
    if isinstance(matrix, DenseSymmetric):
        return matrix.matrix
    if isinstance(matrix, SparseSymmetricMatrix):
        return DenseSymmetric(matrix.to_dense()).matrix
    return DenseSymmetric(matrix).matrix


def householder_tridiagonalize(a: np.ndarray):
    """Reduce a dense symmetric matrix to tridiagonal form; returns
    (diagonal, offdiagonal, accumulated orthogonal transform)."""
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    q = np.eye(n)
    for k in range(n - 2):
        x = a[k + 1 :, k]
        nrm = float(np.linalg.norm(x))
        if nrm == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(nrm, x[0] if x[0] != 0.0 else 1.0)
        vnrm = float(np.linalg.norm(v))
        if vnrm == 0.0:
            continue
        v /= vnrm
        # Two-sided application of the reflector I - 2 v v^T.
        a[k + 1 :, k:] -= 2.0 * np.outer(v, v @ a[k + 1 :, k:])
        a[:, k + 1 :] -= 2.0 * np.outer(a[:, k + 1 :] @ v, v)
        q[:, k + 1 :] -= 2.0 * np.outer(q[:, k + 1 :] @ v, v)
    return np.diag(a).copy(), np.diag(a, 1).copy(), q


def eigh_dense(matrix):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a dense
    symmetric matrix, via Householder reduction and tridiagonal QL."""
    a = as_dense_symmetric(matrix)
    if a.shape[0] == 1:
        return a[0].copy(), np.ones((1, 1))
    d, e, q = householder_tridiagonalize(a)
    theta, vecs = tridiag_eigh(d, e, z=q)
    return theta, vecs


def exact_trace_f(matrix, f) -> float:
    """Trace of f(A) as the compensated sum of f over the eigenvalues."""
    a = as_dense_symmetric(matrix)
    if a.shape[0] == 1:
        theta = a[0]
    else:
        d, e, _ = householder_tridiagonalize(a)
        theta, _ = tridiag_eigh(d, e)
    values = np.asarray(f(theta), dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("f undefined on part of the spectrum")
    return math.fsum(values)


def exact_quadratic_form(matrix, x, f) -> float:
    """x^T f(A) x by full eigendecomposition."""
    theta, vecs = eigh_dense(matrix)
    y = vecs.T @ np.asarray(x, dtype=np.float64)
    values = np.asarray(f(theta), dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("f undefined on part of the spectrum")
    return math.fsum(values * y * y)


def matrix_function(matrix, f) -> np.ndarray:
    """Dense f(A) by full eigendecomposition."""
    theta, vecs = eigh_dense(matrix)
    return (vecs * np.asarray(f(theta), dtype=np.float64)) @ vecs.T


def cholesky_logdet(matrix) -> float:
    """log det A as twice the compensated log-sum of Cholesky pivots."""
    a = as_dense_symmetric(matrix)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrix is not positive definite") from exc
    return 2.0 * math.fsum(np.log(np.diag(chol)))


def exact_triangle_count(adjacency: SparseSymmetricMatrix) -> int:
    """Triangles of a simple undirected graph by wedge enumeration over
    sorted neighbor lists (each triangle counted once)."""
    csr = adjacency.to_csr() if hasattr(adjacency, "to_csr") else adjacency._csr
    n = adjacency.dimension
    neighbors = [np.sort(csr.indices[csr.indptr[i] : csr.indptr[i + 1]]) for i in range(n)]
    total = 0
    for u in range(n):
        nu = neighbors[u]
        higher = nu[nu > u]
        for v in higher:
            nv = neighbors[v]
            common = np.intersect1d(higher, nv[nv > v], assume_unique=True)
            total += common.size
    return total


def _batch_probes(kind: ProbeKind, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    if kind is ProbeKind.GAUSSIAN:
        return rng.standard_normal((n, count))
    if kind is ProbeKind.RADEMACHER:
        return 2.0 * rng.integers(0, 2, size=(n, count)).astype(np.float64) - 1.0
    block = np.zeros((n, count))
    for j in range(count):
        block[j % n, j] = math.sqrt(n)
    return block


def empirical_errors(
    op, probe_kind: ProbeKind, N: int, trials: int, seed: int, true_trace: float | None = None
) -> np.ndarray:
    """|tr_N - tr| over `trials` independent estimates.

    Trials are keyed individually by (seed, trial), so they are reproducible
    and embarrassingly parallel; within a trial the N probes are drawn as one
    block, which is a distribution-identical batched shortcut private to this
    oracle.
    """
    if true_trace is None:
        norms = getattr(op, "exact_norms", None) or {}
        if "trace" not in norms:
            raise ValueError("operator has no known trace; pass true_trace")
        true_trace = norms["trace"]
    n = op.dimension
    errors = np.empty(trials)
    for t in range(trials):
        key = np.array([seed & 0xFFFFFFFFFFFFFFFF, t], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        block = _batch_probes(probe_kind, n, N, rng)
        forms = np.einsum("ij,ij->j", block, op.apply(block))
        errors[t] = abs(float(np.mean(forms)) - true_trace)
    return errors


def empirical_tail(
    op,
    probe_kind: ProbeKind,
    N: int,
    trials: int,
    epsilon_grid,
    seed: int,
    true_trace: float | None = None,
) -> np.ndarray:
    """Monte-Carlo failure frequencies P(|tr_N - tr| >= eps) on a grid."""
    errors = empirical_errors(op, probe_kind, N, trials, seed, true_trace)
    grid = np.asarray(epsilon_grid, dtype=np.float64)
    return np.array([float(np.mean(errors >= eps)) for eps in grid])


def _dense_spectral_norm(a: np.ndarray) -> float:
    if a.shape[0] == 1:
        return abs(float(a[0, 0]))
    d, e, _ = householder_tridiagonalize(a)
    theta, _ = tridiag_eigh(d, e)
    return float(np.max(np.abs(theta)))


def norm_data_from_dense(matrix, with_offdiag: bool = True, with_trace: bool = True, source: str = "exact") -> NormData:
    """Exact NormData of a dense symmetric matrix (oracle-backed)."""
    a = as_dense_symmetric(matrix)
    fro = float(np.sqrt(np.sum(a * a)))
    spectral = _dense_spectral_norm(a)
    off_f = off_2 = None
    if with_offdiag:
        off = a - np.diag(np.diag(a))
        off_f = float(np.sqrt(np.sum(off * off)))
        off_2 = _dense_spectral_norm(off) if off_f > 0.0 else 0.0
    return NormData(
        frobenius=fro,
        spectral=spectral,
        n=a.shape[0],
        offdiag_frobenius=off_f,
        offdiag_spectral=off_2,
        trace=float(np.trace(a)) if with_trace else None,
        source=source,
    )
