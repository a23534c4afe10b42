"""Matrix-free symmetric operators, Matrix Market ingestion, and generators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

__all__ = [
    "MatrixMarketError",
    "NormConvergenceError",
    "SymmetricOperator",
    "SparseSymmetricMatrix",
    "PolynomialOfOperator",
    "load_matrix_market",
    "gen_tightness_gaussian",
    "gen_tightness_rademacher",
    "gen_lowrank",
    "gen_random_spd",
    "triangle_operator",
    "exact_norms",
    "identity_operator",
    "scaled_identity",
    "from_dense",
    "symmetry_defect",
]


class MatrixMarketError(ValueError):
    """Parse failure in a Matrix Market file, with the offending line."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class NormConvergenceError(RuntimeError):
    """Spectral-norm iteration did not reach the requested residual."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (achieved residual {residual:.3e})")


@dataclass
class SymmetricOperator:
    """Symmetric linear map accessible only through matrix-vector products.

    `matvec` must accept a vector of shape (n,) or a block of shape (n, k)
    and apply the operator columnwise.  Operators are immutable after
    construction and may be applied concurrently.

    spectral_interval, when given, claims enclosing bounds on the eigenvalues.
    exact_norms may carry any of "frobenius", "spectral", "trace" when known.
    """

    dimension: int
    matvec: Callable[[np.ndarray], np.ndarray]
    spectral_interval: tuple[float, float] | None = None
    exact_norms: dict[str, float] | None = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(self.matvec(np.asarray(x, dtype=np.float64)), dtype=np.float64)
        if y.shape != np.shape(x):
            raise ValueError(
                f"matvec changed shape {np.shape(x)} -> {y.shape}"
            )
        return y

    def quadratic_form(self, x: np.ndarray) -> float:
        return float(np.asarray(x, dtype=np.float64) @ self.apply(x))

    def scaled(self, factor: float) -> "SymmetricOperator":
        """The operator factor*A, with metadata rescaled accordingly."""
        interval = None
        if self.spectral_interval is not None:
            lo, hi = (factor * v for v in self.spectral_interval)
            interval = (min(lo, hi), max(lo, hi))
        norms = None
        if self.exact_norms is not None:
            norms = {}
            for key, val in self.exact_norms.items():
                norms[key] = factor * val if key == "trace" else abs(factor) * val
        base = self.matvec
        return SymmetricOperator(self.dimension, lambda x: factor * base(x), interval, norms)


class SparseSymmetricMatrix:
    """Sparse symmetric matrix stored as its lower triangle in coordinate form.

    Entries above the diagonal are normalized below it on input; duplicate
    coordinates are summed (standard coordinate-format assembly).  The full
    symmetric matrix is assembled to compressed-row form for matvec.
    """

    def __init__(self, dimension: int, rows, cols, values):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not (rows.shape == cols.shape == values.shape):
            raise ValueError("rows, cols, values must have equal length")
        if rows.size:
            if rows.min(initial=0) < 0 or cols.min(initial=0) < 0:
                raise ValueError("negative index")
            if rows.max(initial=0) >= dimension or cols.max(initial=0) >= dimension:
                raise ValueError("index out of range")
            if not np.all(np.isfinite(values)):
                raise ValueError("non-finite matrix entry")
        # Normalize to the lower triangle, then sum duplicates via COO round trip.
        swap = cols > rows
        r = np.where(swap, cols, rows)
        c = np.where(swap, rows, cols)
        lower = sp.coo_matrix((values, (r, c)), shape=(dimension, dimension))
        lower.sum_duplicates()
        self.dimension = int(dimension)
        self.rows = lower.row.copy()
        self.cols = lower.col.copy()
        self.values = lower.data.copy()
        strict = self.rows != self.cols
        full = sp.coo_matrix(
            (
                np.concatenate([self.values, self.values[strict]]),
                (
                    np.concatenate([self.rows, self.cols[strict]]),
                    np.concatenate([self.cols, self.rows[strict]]),
                ),
            ),
            shape=(dimension, dimension),
        )
        self._csr = full.tocsr()

    @property
    def nnz_lower(self) -> int:
        return self.values.size

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def trace(self) -> float:
        return float(math.fsum(self.diagonal()))

    def frobenius_norm(self) -> float:
        diag = self.rows == self.cols
        return math.sqrt(
            math.fsum(self.values[diag] ** 2) + 2.0 * math.fsum(self.values[~diag] ** 2)
        )

    def offdiag_frobenius_norm(self) -> float:
        strict = self.rows != self.cols
        return math.sqrt(2.0 * math.fsum(self.values[strict] ** 2))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self._csr @ np.asarray(x, dtype=np.float64)

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def to_operator(self, spectral_interval=None) -> SymmetricOperator:
        norms = {"frobenius": self.frobenius_norm(), "trace": self.trace()}
        return SymmetricOperator(self.dimension, self.apply, spectral_interval, norms)


@dataclass
class PolynomialOfOperator:
    """A^k realized by k successive applications of A."""

    base: SymmetricOperator
    exponent: int

    def __post_init__(self):
        if self.exponent < 1:
            raise ValueError("exponent must be >= 1")

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def spectral_interval(self):
        return None

    @property
    def exact_norms(self):
        return None

    def apply(self, x: np.ndarray) -> np.ndarray:
        y = np.asarray(x, dtype=np.float64)
        for _ in range(self.exponent):
            y = self.base.apply(y)
        return y

    def quadratic_form(self, x: np.ndarray) -> float:
        return float(np.asarray(x, dtype=np.float64) @ self.apply(x))


# ---------------------------------------------------------------------------
# Matrix Market ingestion


def load_matrix_market(path) -> SparseSymmetricMatrix:
    """Parse a Matrix Market coordinate symmetric file (1-based indices).

    Accepts real, integer, or pattern fields; pattern entries get value 1.0.
    Non-symmetric headers are rejected.
    """
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.readlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)

    header = lines[0].split()
    if len(header) != 5 or not header[0].startswith("%%MatrixMarket"):
        raise MatrixMarketError("missing %%MatrixMarket header", 1)
    _, obj, fmt, fld, symmetry = (tok.lower() for tok in header)
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format '{obj} {fmt}', need 'matrix coordinate'", 1)
    if fld not in ("real", "integer", "pattern"):
        raise MatrixMarketError(f"unsupported field '{fld}'", 1)
    if symmetry != "symmetric":
        raise MatrixMarketError(f"symmetry '{symmetry}' rejected, need 'symmetric'", 1)
    pattern = fld == "pattern"

    lineno = 1
    body = []
    for offset, raw in enumerate(lines[1:], start=2):
        stripped = raw.strip()
        if not stripped or stripped.startswith("%"):
            continue
        body.append((offset, stripped))
    if not body:
        raise MatrixMarketError("missing size line")
    lineno, size_line = body[0]
    toks = size_line.split()
    if len(toks) != 3:
        raise MatrixMarketError("size line must be 'rows cols nnz'", lineno)
    try:
        n_rows, n_cols, nnz = (int(t) for t in toks)
    except ValueError as exc:
        raise MatrixMarketError(f"bad size line: {exc}", lineno) from None
    if n_rows != n_cols:
        raise MatrixMarketError(f"matrix is {n_rows}x{n_cols}, need square", lineno)
    if n_rows < 1 or nnz < 0:
        raise MatrixMarketError("invalid dimensions", lineno)
    entries = body[1:]
    if len(entries) != nnz:
        raise MatrixMarketError(
            f"expected {nnz} entries, found {len(entries)}", entries[-1][0] if entries else lineno
        )

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    want = 2 if pattern else 3
    for k, (lineno, text) in enumerate(entries):
        toks = text.split()
        if len(toks) != want:
            raise MatrixMarketError(f"expected {want} fields, found {len(toks)}", lineno)
        try:
            i = int(toks[0])
            j = int(toks[1])
            v = 1.0 if pattern else float(toks[2])
        except ValueError as exc:
            raise MatrixMarketError(f"bad entry: {exc}", lineno) from None
        if i < 1 or j < 1:
            raise MatrixMarketError("indices are 1-based, got index < 1", lineno)
        if i > n_rows or j > n_rows:
            raise MatrixMarketError(f"index ({i},{j}) exceeds dimension {n_rows}", lineno)
        if not math.isfinite(v):
            raise MatrixMarketError("non-finite value", lineno)
        rows[k], cols[k], vals[k] = i - 1, j - 1, v
    return SparseSymmetricMatrix(n_rows, rows, cols, vals)


# ---------------------------------------------------------------------------
# Synthetic generators


def gen_tightness_gaussian(n: int) -> SymmetricOperator:
    """diag(I, -I): traceless with eigenvalues +-1, the Gaussian worst case."""
    if n < 2 or n % 2:
        raise ValueError(f"n must be even and >= 2, got {n}")
    signs = np.ones(n)
    signs[n // 2 :] = -1.0

    def matvec(x):
        return (x.T * signs).T if x.ndim > 1 else signs * x

    return SymmetricOperator(
        n,
        matvec,
        spectral_interval=(-1.0, 1.0),
        exact_norms={"frobenius": math.sqrt(n), "spectral": 1.0, "trace": 0.0},
    )


def gen_tightness_rademacher(n: int) -> SymmetricOperator:
    """Anti-diagonal ones matrix: traceless, the Rademacher worst case."""
    if n < 2 or n % 2:
        raise ValueError(f"n must be even and >= 2, got {n}")

    def matvec(x):
        return np.flip(x, axis=0)

    return SymmetricOperator(
        n,
        matvec,
        spectral_interval=(-1.0, 1.0),
        exact_norms={"frobenius": math.sqrt(n), "spectral": 1.0, "trace": 0.0},
    )


def gen_lowrank(n: int, seed: int, shift: float = 0.0) -> SparseSymmetricMatrix:
    """Low-rank SPSD sum of 300 sparse rank-one terms with decaying weights.

    Each factor has independently Bernoulli(0.025) placed uniform entries.
    The optional `shift` adds shift*I, which regularizes the (singular)
    construction; the reference condition numbers quoted elsewhere depend on
    the random draw and are not bit-reproducible.
    """
    if n < 300:
        raise ValueError(f"n must be >= 300, got {n}")
    rng = np.random.default_rng(seed)
    weights = np.concatenate(
        [10.0 / np.arange(1, 41) ** 2, 1.0 / np.arange(41, 301) ** 2]
    )
    cols = []
    for _ in range(300):
        mask = rng.random(n) < 0.025
        col = np.zeros(n)
        col[mask] = rng.random(int(mask.sum()))
        cols.append(col)
    factors = sp.csc_matrix(np.column_stack(cols))
    a = (factors.multiply(weights[np.newaxis, :])) @ factors.T
    a = ((a + a.T) * 0.5).tocoo()
    keep = a.row >= a.col
    rows = a.row[keep]
    colinds = a.col[keep]
    vals = a.data[keep].astype(np.float64).copy()
    if shift:
        rows = np.concatenate([rows, np.arange(n)])
        colinds = np.concatenate([colinds, np.arange(n)])
        vals = np.concatenate([vals, np.full(n, float(shift))])
    return SparseSymmetricMatrix(n, rows, colinds, vals)


def gen_random_spd(n: int, kappa: float, seed: int) -> np.ndarray:
    """Dense random SPD matrix with condition number exactly `kappa`.

    Eigenvalues are log-uniform on [1/sqrt(kappa), sqrt(kappa)] with the
    endpoints pinned, conjugated by a random orthogonal matrix.
    """
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    rng = np.random.default_rng(seed)
    half = 0.5 * math.log(kappa)
    lam = np.exp(rng.uniform(-half, half, size=n))
    if n >= 2 and kappa > 1.0:
        lam[0] = math.exp(-half)
        lam[-1] = math.exp(half)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * lam) @ q.T


def triangle_operator(adjacency: SparseSymmetricMatrix) -> PolynomialOfOperator:
    """A^3 of a simple-graph adjacency matrix; trace/6 counts triangles."""
    diag = adjacency.diagonal()
    if np.any(diag != 0.0):
        raise ValueError("adjacency matrix must have zero diagonal")
    vals = adjacency.values
    if not np.all((vals == 0.0) | (vals == 1.0)):
        raise ValueError("adjacency matrix entries must be 0 or 1")
    return PolynomialOfOperator(adjacency.to_operator(), 3)


def identity_operator(n: int) -> SymmetricOperator:
    return scaled_identity(n, 1.0)


def scaled_identity(n: int, c: float) -> SymmetricOperator:
    if n < 1:
        raise ValueError("n must be >= 1")
    return SymmetricOperator(
        n,
        lambda x: c * np.asarray(x, dtype=np.float64),
        spectral_interval=(min(c, c), max(c, c)),
        exact_norms={"frobenius": abs(c) * math.sqrt(n), "spectral": abs(c), "trace": c * n},
    )


def from_dense(a: np.ndarray, spectral_interval=None, exact_norms=None, check=True) -> SymmetricOperator:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("need a square matrix")
    if check:
        scale = np.abs(a).max(initial=0.0) or 1.0
        if np.abs(a - a.T).max(initial=0.0) > 1e-10 * scale:
            raise ValueError("matrix is not symmetric")
    return SymmetricOperator(a.shape[0], lambda x: a @ x, spectral_interval, exact_norms)


# ---------------------------------------------------------------------------
# Norms and checks


def symmetry_defect(op, seed: int = 0, samples: int = 3) -> float:
    """Max normalized |<Ax,y> - <x,Ay>| over sampled vector pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x = rng.standard_normal(op.dimension)
        y = rng.standard_normal(op.dimension)
        ax = op.apply(x)
        ay = op.apply(y)
        scale = max(
            float(np.linalg.norm(ax)) * float(np.linalg.norm(y)),
            float(np.linalg.norm(ay)) * float(np.linalg.norm(x)),
            1e-300,
        )
        worst = max(worst, abs(float(ax @ y) - float(x @ ay)) / scale)
    return worst


def exact_norms(matrix: SparseSymmetricMatrix, rtol: float = 1e-8, max_steps: int = 300) -> dict:
    """Frobenius, spectral, trace, and stable rank of a sparse symmetric matrix.

    Frobenius and trace are exact sums over stored entries.  The spectral norm
    comes from a converged extremal eigenvalue iteration; non-convergence
    raises NormConvergenceError with the achieved residual.
    """
    if matrix.dimension > 5000:
        raise ValueError("exact_norms is guarded to n <= 5000")
    fro = matrix.frobenius_norm()
    tr = matrix.trace()
    if fro == 0.0:
        raise ValueError("zero matrix has no stable rank")
    spectral = _spectral_norm(matrix.to_operator(), rtol, max_steps)
    return {
        "frobenius": fro,
        "spectral": spectral,
        "trace": tr,
        "stable_rank": fro * fro / (spectral * spectral),
    }


def _spectral_norm(op, rtol: float, max_steps: int) -> float:
    # Extremal Ritz values with a residual certificate; the import is local
    # because lanczos has no dependency back on this module.
    from .lanczos import extremal_ritz_values

    lo, hi, residual, converged = extremal_ritz_values(
        op, steps=min(max_steps, op.dimension), seed=0
    )
    spectral = max(abs(lo), abs(hi))
    if not converged and residual > rtol * max(spectral, 1e-300):
        raise NormConvergenceError("spectral norm iteration did not converge", residual)
    return spectral
