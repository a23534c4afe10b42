"""Lanczos quadrature for quadratic forms x^T f(A) x, with error machinery.

The m-step Lanczos tridiagonalization of A started at x/||x|| yields T_m with
||x||^2 * e1^T f(T_m) e1 equal to the m-point Gauss rule for the spectral
integral of f.  For f = log on SPD matrices the Gauss value is an upper bound
and the Gauss-Lobatto extension (both interval endpoints prescribed as nodes)
is a lower bound, which gives a computable bracket.  A-priori geometric error
bounds follow from analyticity of f on a Bernstein ellipse around the
spectral interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QuadratureDomainError",
    "LanczosBreakdownError",
    "TridiagonalMatrix",
    "LanczosResult",
    "EllipseBound",
    "tridiag_eigh",
    "lanczos_tridiagonalize",
    "evaluate_quadrature",
    "lobatto_extension",
    "lobatto_lower_bound",
    "approx_quadratic_form_log",
    "estimate_spectral_interval",
    "extremal_ritz_values",
    "ellipse_error_bound",
    "log_lanczos_bound",
    "max_log_on_ellipse",
]

_EPS = np.finfo(np.float64).eps


class QuadratureDomainError(ValueError):
    """f is undefined at a Ritz value (for log: the matrix is not SPD, or the
    declared spectral interval is wrong)."""

    def __init__(self, ritz_value: float):
        self.ritz_value = ritz_value
        super().__init__(f"f undefined at Ritz value {ritz_value!r}")


class LanczosBreakdownError(RuntimeError):
    """Unexpected non-finite data inside the Lanczos recurrence."""


@dataclass
class TridiagonalMatrix:
    """Symmetric tridiagonal matrix (diagonal alpha, off-diagonal beta).

    `exact` marks a happy breakdown: the Krylov subspace became invariant, so
    quadrature with this matrix is exact rather than approximate.
    """

    alpha: np.ndarray
    beta: np.ndarray
    exact: bool = False

    def __post_init__(self):
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=np.float64))
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64)) if np.size(self.beta) else np.zeros(0)
        if self.beta.size != self.alpha.size - 1:
            raise ValueError("beta must have one entry fewer than alpha")

    @property
    def size(self) -> int:
        return self.alpha.size

    def to_dense(self) -> np.ndarray:
        t = np.diag(self.alpha)
        if self.beta.size:
            t += np.diag(self.beta, 1) + np.diag(self.beta, -1)
        return t

    def eigenvalues(self) -> np.ndarray:
        theta, _ = tridiag_eigh(self.alpha, self.beta)
        return theta

    def scaled(self, factor: float) -> "TridiagonalMatrix":
        return TridiagonalMatrix(factor * self.alpha, abs(factor) * self.beta, self.exact)


@dataclass
class LanczosResult:
    """Outcome of a quadratic-form approximation for one start vector."""

    tridiagonal: TridiagonalMatrix
    x_norm_sq: float
    value: float
    iterations: int
    breakdown: bool
    converged: bool | None = None
    gauss_upper: float | None = None
    lobatto_lower: float | None = None
    bracket_width: float | None = None


# ---------------------------------------------------------------------------
# Symmetric tridiagonal eigensolver (QL with implicit shifts)


def tridiag_eigh(alpha, beta, z: np.ndarray | None = None, max_sweeps: int = 60):
    """Eigenvalues (ascending) of a symmetric tridiagonal matrix.

    If `z` is given as a (k, m) array, its columns are rotated along with the
    similarity transforms; pass a single row [1, 0, ..., 0] to obtain the
    first components of the orthonormal eigenvectors (Gauss weights), or an
    accumulated transformation matrix to obtain full eigenvectors.

    Classic QL iteration with implicit Wilkinson shifts; kept in-repo so the
    quadrature path is dependency-free and bit-stable across platforms.
    """
    d = np.array(alpha, dtype=np.float64, copy=True).ravel()
    m = d.size
    e = np.zeros(m)
    if m > 1:
        b = np.asarray(beta, dtype=np.float64).ravel()
        if b.size != m - 1:
            raise ValueError("beta must have length len(alpha) - 1")
        e[: m - 1] = b
    zmat = None if z is None else np.array(z, dtype=np.float64, copy=True)
    if zmat is not None and (zmat.ndim != 2 or zmat.shape[1] != m):
        raise ValueError("z must have shape (k, m)")

    for l in range(m):
        sweeps = 0
        while True:
            mm = l
            while mm < m - 1:
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= _EPS * dd:
                    break
                mm += 1
            if mm == l:
                break
            sweeps += 1
            if sweeps > max_sweeps:
                raise RuntimeError("tridiagonal QL iteration failed to converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[mm] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(mm - 1, l - 1, -1):
                f = s * e[i]
                bb = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[mm] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * bb
                p = s * r
                d[i + 1] = g + p
                g = c * r - bb
                if zmat is not None:
                    col = zmat[:, i + 1].copy()
                    zmat[:, i + 1] = s * zmat[:, i] + c * col
                    zmat[:, i] = c * zmat[:, i] - s * col
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[mm] = 0.0

    order = np.argsort(d, kind="stable")
    d = d[order]
    if zmat is not None:
        zmat = zmat[:, order]
    return d, zmat


def _gauss_rule(t: TridiagonalMatrix):
    """Nodes and weights of the Gauss rule encoded by T (weights sum to 1)."""
    e1 = np.zeros((1, t.size))
    e1[0, 0] = 1.0
    theta, z = tridiag_eigh(t.alpha, t.beta, z=e1)
    return theta, z[0] ** 2


# ---------------------------------------------------------------------------
# Lanczos iteration


class _LanczosState:
    """Incremental Lanczos factorization with full reorthogonalization.

    Reorthogonalization (two classical Gram-Schmidt passes per step) keeps
    desk-scale behaviour aligned with exact-arithmetic theory; it can be
    disabled for large problems.
    """

    def __init__(self, op, x, max_steps: int, reorthogonalize: bool = True):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.size != op.dimension:
            raise ValueError("start vector has wrong shape")
        nrm = float(np.linalg.norm(x))
        if nrm == 0.0:
            raise ValueError("zero starting vector")
        if not math.isfinite(nrm):
            raise LanczosBreakdownError("non-finite starting vector")
        self.op = op
        self.x_norm_sq = nrm * nrm
        self.reorth = reorthogonalize
        self.max_steps = min(max_steps, op.dimension)
        self.basis = np.empty((op.dimension, self.max_steps + 1))
        self.basis[:, 0] = x / nrm
        self.alpha: list[float] = []
        self.beta: list[float] = []
        self.exact = False
        self._scale = 0.0

    @property
    def steps(self) -> int:
        return len(self.alpha)

    def step(self) -> bool:
        """Run one recurrence step; False once the factorization terminated."""
        if self.exact or self.steps >= self.max_steps:
            return False
        k = self.steps
        u = self.basis[:, k]
        w = self.op.apply(u)
        if not np.all(np.isfinite(w)):
            raise LanczosBreakdownError("matvec returned non-finite values")
        a = float(u @ w)
        w = w - a * u
        if k > 0:
            w -= self.beta[k - 1] * self.basis[:, k - 1]
        if self.reorth:
            active = self.basis[:, : k + 1]
            for _ in range(2):
                w -= active @ (active.T @ w)
        b = float(np.linalg.norm(w))
        self.alpha.append(a)
        self._scale = max(self._scale, abs(a), b)
        # beta below 1e-12 of the observed norm scale is a happy breakdown:
        # the Krylov subspace is invariant and the quadrature is exact.
        if b <= 1e-12 * self._scale:
            self.exact = True
            return False
        self.beta.append(b)
        self.basis[:, k + 1] = w / b
        return True

    def tridiagonal(self) -> TridiagonalMatrix:
        k = self.steps
        return TridiagonalMatrix(
            np.array(self.alpha), np.array(self.beta[: k - 1]), exact=self.exact
        )


def lanczos_tridiagonalize(op, x, m: int, reorthogonalize: bool = True):
    """Run m Lanczos steps from x; returns (TridiagonalMatrix, ||x||^2).

    On happy breakdown the returned matrix is smaller than m and flagged
    exact.  Requires 1 <= m <= n.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > op.dimension:
        raise ValueError(f"m = {m} exceeds dimension {op.dimension}")
    state = _LanczosState(op, x, m, reorthogonalize)
    for _ in range(m):
        if not state.step():
            break
    return state.tridiagonal(), state.x_norm_sq


def evaluate_quadrature(t: TridiagonalMatrix, x_norm_sq: float, f) -> float:
    """||x||^2 * e1^T f(T) e1 via the eigendecomposition of T."""
    theta, weights = _gauss_rule(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        fvals = np.asarray(f(theta), dtype=np.float64)
    bad = ~np.isfinite(fvals)
    if bad.any():
        raise QuadratureDomainError(float(theta[bad][0]))
    return float(x_norm_sq) * float(np.dot(weights, fvals))


# ---------------------------------------------------------------------------
# Gauss-Lobatto lower bound for the logarithm


def _last_pivot(t: TridiagonalMatrix, shift: float) -> float:
    # Last pivot of the LDL^T factorization of T - shift*I, computed by the
    # standard continued-fraction recurrence.  Equals 1/(e_m^T (T-sI)^{-1} e_m).
    d = t.alpha[0] - shift
    for i in range(1, t.size):
        if d == 0.0:
            return 0.0
        d = t.alpha[i] - shift - t.beta[i - 1] ** 2 / d
    return float(d)


def lobatto_extension(t: TridiagonalMatrix, interval) -> TridiagonalMatrix | None:
    """Extend T by one row/column so that both interval endpoints become nodes.

    Returns None when the extension degenerates (an endpoint collides with a
    Ritz value), in which case the Gauss rule is already exact there.
    Raises if the interval fails to enclose the Ritz values.
    """
    a, b = (float(v) for v in interval)
    if not a < b:
        raise ValueError(f"need a < b, got ({a}, {b})")
    pivot_a = _last_pivot(t, a)
    pivot_b = _last_pivot(t, b)
    scale = max(np.abs(t.alpha).max(initial=0.0), np.abs(t.beta).max(initial=0.0), abs(a), abs(b))
    tol = 1e-13 * max(scale, 1e-300)
    if abs(pivot_a) <= tol or abs(pivot_b) <= tol:
        return None
    if pivot_a < 0.0 or pivot_b > 0.0:
        raise ValueError(
            f"interval ({a}, {b}) does not enclose the Ritz values of T"
        )
    delta_last = 1.0 / pivot_a
    mu_last = 1.0 / pivot_b
    beta_sq = (b - a) / (delta_last - mu_last)
    if not beta_sq > 0.0:
        return None
    alpha_new = a + beta_sq * delta_last
    return TridiagonalMatrix(
        np.append(t.alpha, alpha_new), np.append(t.beta, math.sqrt(beta_sq))
    )


def lobatto_lower_bound(t: TridiagonalMatrix, x_norm_sq: float, spectral_interval) -> float:
    """Gauss-Lobatto value for f = log; a lower bound on x^T log(A) x whenever
    the interval truly encloses the spectrum of A."""
    a, b = (float(v) for v in spectral_interval)
    if not 0.0 < a:
        raise ValueError(f"interval must be positive for log, got lower end {a}")
    if not a <= b:
        raise ValueError("empty interval")
    if t.exact or a == b:
        return evaluate_quadrature(t, x_norm_sq, np.log)
    ext = lobatto_extension(t, (a, b))
    if ext is None:
        return evaluate_quadrature(t, x_norm_sq, np.log)
    return evaluate_quadrature(ext, x_norm_sq, np.log)


def approx_quadratic_form_log(
    op,
    x,
    tol: float,
    max_m: int,
    spectral_interval=None,
    reorthogonalize: bool = True,
) -> LanczosResult:
    """Approximate x^T log(A) x to within tol, iterating until the
    Gauss/Lobatto bracket is narrower than tol.

    Returns the bracket midpoint, with converged=False (and the achieved
    bracket width) when max_m is exhausted first.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    interval = spectral_interval or getattr(op, "spectral_interval", None)
    if interval is None:
        interval = estimate_spectral_interval(op)
    a, b = (float(v) for v in interval)
    if not 0.0 < a <= b:
        raise ValueError(f"operator must be SPD with a positive interval, got ({a}, {b})")

    state = _LanczosState(op, x, max_m, reorthogonalize)
    gauss = lobatto = math.nan
    while True:
        progressed = state.step()
        t = state.tridiagonal()
        gauss = evaluate_quadrature(t, state.x_norm_sq, np.log)
        lobatto = gauss if t.exact else lobatto_lower_bound(t, state.x_norm_sq, (a, b))
        width = gauss - lobatto
        converged = width < tol
        if converged or not progressed:
            break
    return LanczosResult(
        tridiagonal=t,
        x_norm_sq=state.x_norm_sq,
        value=0.5 * (gauss + lobatto),
        iterations=t.size,
        breakdown=t.exact,
        converged=converged or t.exact,
        gauss_upper=gauss,
        lobatto_lower=lobatto,
        bracket_width=width,
    )


# ---------------------------------------------------------------------------
# Spectral interval estimation


def extremal_ritz_values(op, steps: int = 30, seed: int = 0, rtol: float = 1e-8):
    """Smallest/largest Ritz values from a seeded Lanczos run, with a residual
    certificate.  Returns (theta_min, theta_max, residual, converged)."""
    from .probes import ProbeKind, ProbeStream

    steps = max(1, min(steps, op.dimension))
    x = ProbeStream(ProbeKind.GAUSSIAN, op.dimension, seed).probe(0)
    state = _LanczosState(op, x, steps)
    for _ in range(steps):
        if not state.step():
            break
    t = state.tridiagonal()
    ends = np.zeros((2, t.size))
    ends[0, 0] = 1.0
    ends[1, -1] = 1.0
    theta, z = tridiag_eigh(t.alpha, t.beta, z=ends)
    if state.exact or len(state.beta) < len(state.alpha):
        return float(theta[0]), float(theta[-1]), 0.0, True
    # Residual of a Ritz pair is beta_next * |last eigenvector component|.
    beta_next = state.beta[t.size - 1] if len(state.beta) >= t.size else 0.0
    residual = beta_next * max(abs(z[1, 0]), abs(z[1, -1]))
    scale = max(abs(theta[0]), abs(theta[-1]), 1e-300)
    return float(theta[0]), float(theta[-1]), float(residual), residual <= rtol * scale


def estimate_spectral_interval(op, steps: int = 30, seed: int = 0):
    """Enclosing eigenvalue interval estimated from extremal Ritz values,
    widened outward by 1% on each side."""
    lo, hi, _, _ = extremal_ritz_values(op, steps=steps, seed=seed)
    lo_pad = 0.99 * lo if lo > 0 else 1.01 * lo
    hi_pad = 1.01 * hi if hi > 0 else 0.99 * hi
    return (lo_pad, hi_pad)


# ---------------------------------------------------------------------------
# A-priori error bounds


@dataclass(frozen=True)
class EllipseBound:
    """Geometric a-priori bound 4*f_max/(1 - 1/rho) * rho^(-2m) * ||x||^2."""

    rho: float
    f_max: float
    x_norm_sq: float

    def bound(self, m: int) -> float:
        return self.x_norm_sq * 4.0 * self.f_max * self.rho ** (-2.0 * m) / (1.0 - 1.0 / self.rho)


def ellipse_error_bound(spectral_interval, x_norm_sq: float, rho: float, f_max: float | None = None) -> EllipseBound:
    """A-priori Lanczos error bound for f analytic on the Bernstein ellipse of
    elliptical radius rho around the spectral interval.

    f_max is the maximum of |f| on the transformed ellipse; when omitted, f is
    taken to be the logarithm and the maximum is computed from the real-axis
    intercepts (which requires the ellipse to stay right of zero).
    """
    if rho <= 1.0:
        raise ValueError("rho must exceed 1")
    if f_max is None:
        lo, hi = (float(v) for v in spectral_interval)
        center = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        stretch = 0.5 * (rho + 1.0 / rho)
        left = center - half * stretch
        right = center + half * stretch
        if left <= 0.0:
            raise ValueError(
                f"log is not analytic on this ellipse (left intercept {left:.3e} <= 0)"
            )
        f_max = max_log_on_ellipse(left, right) if left < right else abs(math.log(left))
    return EllipseBound(rho=float(rho), f_max=float(f_max), x_norm_sq=float(x_norm_sq))


def log_lanczos_bound(kappa: float, x_norm_sq: float, m: int) -> float:
    """A-priori error of m-step Lanczos for x^T log(A) x on SPD A with
    condition number kappa."""
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    root = math.sqrt(kappa + 1.0)
    prefactor = 2.0 * (root + 1.0) * math.log(2.0 * kappa)
    ratio = (root - 1.0) / (root + 1.0)
    return prefactor * float(x_norm_sq) * ratio ** (2.0 * m)


def max_log_on_ellipse(alpha: float, beta: float) -> float:
    """Maximum of |log| over any ellipse in the open right half-plane with
    foci on the real axis and real-axis intercepts alpha < beta.

    The maximum is attained at a real-axis intercept, so it equals
    max(|log alpha|, |log beta|).
    """
    if alpha <= 0.0:
        raise ValueError("left intercept must be positive")
    if not alpha < beta:
        raise ValueError("need alpha < beta")
    return max(abs(math.log(alpha)), abs(math.log(beta)))
