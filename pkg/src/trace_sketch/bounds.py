"""Tail bounds, error envelopes, and sample-size/iteration planners.

All functions are pure.  Tail functions return the bound value itself (which
may exceed 1 where the bound is vacuous); planners return ceilinged integer
sample counts clamped to at least 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "NormData",
    "PlanResult",
    "Envelope",
    "ComparisonBounds",
    "gaussian_tail",
    "gaussian_sample_plan",
    "gaussian_envelope",
    "gaussian_tightness_bound",
    "rademacher_tail",
    "rademacher_sample_plan",
    "rademacher_envelope",
    "spsd_relative_plans",
    "comparison_bounds",
    "logdet_plan_gaussian",
    "logdet_plan_rademacher",
    "logdet_plan_simplified",
]


def _iceil(x: float) -> int:
    # Plans are real-valued thresholds; ceil with a one-ulp guard so that
    # values that are mathematically integral do not round up spuriously.
    return max(1, math.ceil(x * (1.0 - 1e-12)))


def _check_eps_delta(epsilon: float, delta: float | None = None) -> None:
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if delta is not None and not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class NormData:
    """Norm information about a symmetric matrix, feeding the planners.

    offdiag_* refer to the matrix with its diagonal removed; when absent, the
    Rademacher engine substitutes the worst-case surrogates offdiag_F <= F and
    offdiag_2 <= 2*spectral and marks the result as surrogate.  `source`
    records where the numbers came from ("exact", "declared", "estimated");
    estimated norms taint every certificate derived from them.
    """

    frobenius: float
    spectral: float
    n: int
    offdiag_frobenius: float | None = None
    offdiag_spectral: float | None = None
    trace: float | None = None
    source: str = "exact"

    def __post_init__(self):
        if self.spectral <= 0.0:
            raise ValueError("spectral norm must be positive (zero matrix not supported)")
        if self.frobenius < self.spectral * (1.0 - 1e-12):
            raise ValueError("frobenius norm cannot be below the spectral norm")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.offdiag_frobenius is not None:
            if self.offdiag_frobenius < 0 or self.offdiag_frobenius > self.frobenius * (1 + 1e-12):
                raise ValueError("offdiag frobenius norm out of range")
        if self.offdiag_spectral is not None:
            if self.offdiag_spectral < 0 or self.offdiag_spectral > 2.0 * self.spectral * (1 + 1e-12):
                raise ValueError("offdiag spectral norm exceeds twice the spectral norm")

    @property
    def stable_rank(self) -> float:
        return self.frobenius**2 / self.spectral**2

    def offdiag_or_surrogate(self):
        """(offdiag_F, offdiag_2, surrogate_flag), substituting worst cases."""
        if self.offdiag_frobenius is not None and self.offdiag_spectral is not None:
            return self.offdiag_frobenius, self.offdiag_spectral, False
        return self.frobenius, 2.0 * self.spectral, True


@dataclass(frozen=True)
class PlanResult:
    """Planned sample count (and Lanczos steps, when applicable)."""

    N: int
    epsilon: float
    delta: float
    formula_id: str
    m: int | None = None
    valid: bool = True
    notes: str = ""


@dataclass(frozen=True)
class Envelope:
    """(epsilon, delta) certificate: the estimate is within epsilon of the
    truth with probability at least 1 - delta."""

    epsilon: float
    delta: float
    formula_id: str


@dataclass(frozen=True)
class ComparisonBounds:
    """Prior-work sample counts and the Bernstein tail, for side-by-side
    reporting only."""

    avron_gaussian_N: int
    avron_rademacher_N: int
    bernstein_tail: float | None


def _tag(formula_id: str, norms: NormData, surrogate: bool = False) -> str:
    parts = [formula_id]
    if surrogate:
        parts.append("offdiag=surrogate")
    if norms.source != "exact":
        parts.append(f"norms={norms.source}")
    return ";".join(parts)


# ---------------------------------------------------------------------------
# Gaussian probes


def gaussian_tail(norms: NormData, N: int, epsilon: float) -> float:
    """Failure probability bound for the N-sample Gaussian trace estimate."""
    _check_eps_delta(epsilon)
    f2 = norms.frobenius**2
    return 2.0 * math.exp(-N * epsilon**2 / (4.0 * f2 + 4.0 * epsilon * norms.spectral))


def gaussian_sample_plan(norms: NormData, epsilon: float, delta: float) -> PlanResult:
    """Samples sufficient for an absolute error epsilon with probability 1 - delta."""
    _check_eps_delta(epsilon, delta)
    raw = 4.0 / epsilon**2 * (norms.frobenius**2 + epsilon * norms.spectral) * math.log(2.0 / delta)
    return PlanResult(_iceil(raw), epsilon, delta, _tag("gaussian-absolute", norms))


def gaussian_envelope(norms: NormData, delta: float, N: int) -> float:
    """Error radius epsilon(B, delta, N) holding with probability 1 - delta."""
    _check_eps_delta(1.0, delta)
    if N < 1:
        raise ValueError("N must be >= 1")
    lg = math.log(2.0 / delta)
    return 2.0 / math.sqrt(N) * norms.frobenius * math.sqrt(lg) + 2.0 / N * norms.spectral * lg


def gaussian_tightness_bound(n: int, N: int, epsilon: float) -> float:
    """Upper bound on P(|estimate| <= epsilon) for the traceless diag(I, -I)
    matrix: small-ball probability showing the sqrt(n) error growth is real."""
    if n < 2 or n % 2:
        raise ValueError("n must be even and >= 2")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    return epsilon * math.sqrt(N / (math.pi * n))


# ---------------------------------------------------------------------------
# Rademacher probes


def rademacher_tail(norms: NormData, N: int, epsilon: float) -> float:
    """Failure probability bound for the N-sample Rademacher trace estimate.

    Depends only on the off-diagonal part: diagonal matrices are estimated
    exactly, so the bound is 0 for them.
    """
    _check_eps_delta(epsilon)
    off_f, off_2, _ = norms.offdiag_or_surrogate()
    denom = 8.0 * off_f**2 + 8.0 * epsilon * off_2
    if denom == 0.0:
        return 0.0
    return 2.0 * math.exp(-N * epsilon**2 / denom)


def rademacher_sample_plan(norms: NormData, epsilon: float, delta: float) -> PlanResult:
    _check_eps_delta(epsilon, delta)
    off_f, off_2, surrogate = norms.offdiag_or_surrogate()
    raw = 8.0 / epsilon**2 * (off_f**2 + epsilon * off_2) * math.log(2.0 / delta)
    return PlanResult(
        _iceil(raw), epsilon, delta, _tag("rademacher-absolute", norms, surrogate)
    )


def rademacher_envelope(norms: NormData, delta: float, N: int) -> float:
    """Rademacher analogue of gaussian_envelope, from the same tail chain."""
    _check_eps_delta(1.0, delta)
    if N < 1:
        raise ValueError("N must be >= 1")
    off_f, off_2, _ = norms.offdiag_or_surrogate()
    lg = math.log(2.0 / delta)
    return math.sqrt(8.0 * off_f**2 * lg / N) + 4.0 / N * off_2 * lg


# ---------------------------------------------------------------------------
# SPSD relative plans and prior-work comparisons


def spsd_relative_plans(norms: NormData, epsilon: float, delta: float) -> dict:
    """Relative-error plans for nonzero SPSD matrices, driven by
    mu = spectral / trace (the reciprocal stable rank of the square root)."""
    _check_eps_delta(epsilon, delta)
    if norms.trace is None or norms.trace <= 0.0:
        raise ValueError("SPSD relative plans require a positive trace")
    mu = norms.spectral / norms.trace
    lg = math.log(2.0 / delta)
    gauss = 4.0 / epsilon**2 * (1.0 + epsilon) * mu * lg
    rade = 8.0 / epsilon**2 * (1.0 + epsilon) * mu * lg
    return {
        "gaussian": PlanResult(_iceil(gauss), epsilon, delta, _tag("gaussian-spsd-relative", norms)),
        "rademacher": PlanResult(_iceil(rade), epsilon, delta, _tag("rademacher-spsd-relative", norms)),
    }


def comparison_bounds(
    norms: NormData,
    nuclear_norm: float,
    rank: int,
    epsilon: float,
    delta: float,
    N: int | None = None,
) -> ComparisonBounds:
    """Prior-work plans (nuclear-norm based) and the Bernstein tail at N,
    for side-by-side reporting."""
    _check_eps_delta(epsilon, delta)
    if nuclear_norm < norms.frobenius * (1.0 - 1e-12):
        raise ValueError("nuclear norm cannot be below the frobenius norm")
    if rank < 1:
        raise ValueError("rank must be >= 1")
    avron_g = _iceil(20.0 / epsilon**2 * nuclear_norm**2 * math.log(4.0 / delta))
    avron_r = _iceil(6.0 / epsilon**2 * nuclear_norm**2 * math.log(2.0 * rank / delta))
    bernstein = None
    if N is not None:
        off_f, off_2, _ = norms.offdiag_or_surrogate()
        denom = 4.0 * off_f**2 + 4.0 / 3.0 * norms.n * epsilon * off_2
        bernstein = 0.0 if denom == 0.0 else 2.0 * math.exp(-N * epsilon**2 / denom)
    return ComparisonBounds(avron_g, avron_r, bernstein)


# ---------------------------------------------------------------------------
# Log-determinant planners (probing + Lanczos combined)


def _logdet_m(kappa: float, epsilon: float, size_factor: float) -> int:
    root = math.sqrt(kappa + 1.0)
    arg = 4.0 / epsilon * size_factor * (root + 1.0) * math.log(2.0 * kappa)
    if arg <= 1.0:
        return 1
    return _iceil(root / 4.0 * math.log(arg))


def logdet_plan_gaussian(
    kappa: float,
    lognorm_spectral: float,
    lognorm_frobenius: float,
    n: int,
    epsilon: float,
    delta: float,
    source: str = "exact",
) -> PlanResult:
    """Probe count and Lanczos steps certifying |estimate - logdet| <= epsilon
    with probability 1 - delta, for Gaussian probes.

    `valid` is False when N is too large relative to exp(n^2/16), in which
    case the Gaussian norm-control argument behind the certificate fails.
    """
    _check_eps_delta(epsilon, delta)
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    if n < 2:
        raise ValueError("n must be >= 2")
    if lognorm_frobenius < lognorm_spectral * (1.0 - 1e-12) or lognorm_spectral < 0:
        raise ValueError("need lognorm_frobenius >= lognorm_spectral >= 0")
    if lognorm_spectral == 0.0:
        n_probes = 1
    else:
        raw = (
            16.0
            / epsilon**2
            * (lognorm_frobenius**2 + epsilon * lognorm_spectral)
            * math.log(4.0 / delta)
        )
        n_probes = _iceil(raw)
    m = _logdet_m(kappa, epsilon, float(n) ** 2)
    valid = math.log(n_probes) <= math.log(delta / 2.0) + n * n / 16.0
    notes = "" if source == "exact" else f"norms={source}"
    return PlanResult(n_probes, epsilon, delta, "logdet-gaussian", m=m, valid=valid, notes=notes)


def logdet_plan_rademacher(
    kappa: float,
    offdiag_lognorm_spectral: float,
    offdiag_lognorm_frobenius: float,
    n: int,
    epsilon: float,
    delta: float,
    source: str = "exact",
) -> PlanResult:
    """Rademacher counterpart of logdet_plan_gaussian, driven by the
    off-diagonal norms of log(A)."""
    _check_eps_delta(epsilon, delta)
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    if n < 2:
        raise ValueError("n must be >= 2")
    if offdiag_lognorm_frobenius < offdiag_lognorm_spectral * (1.0 - 1e-12) or offdiag_lognorm_spectral < 0:
        raise ValueError("need offdiag_lognorm_frobenius >= offdiag_lognorm_spectral >= 0")
    if offdiag_lognorm_spectral == 0.0 and offdiag_lognorm_frobenius == 0.0:
        n_probes = 1
    else:
        raw = (
            32.0
            / epsilon**2
            * (offdiag_lognorm_frobenius**2 + 0.5 * epsilon * offdiag_lognorm_spectral)
            * math.log(2.0 / delta)
        )
        n_probes = _iceil(raw)
    m = _logdet_m(kappa, epsilon, float(n))
    notes = "" if source == "exact" else f"norms={source}"
    return PlanResult(n_probes, epsilon, delta, "logdet-rademacher", m=m, notes=notes)


def logdet_plan_simplified(kappa: float, n: int, epsilon: float, delta: float) -> PlanResult:
    """Norm-free fallback plan using only the condition number (Rademacher
    probes); usually much larger than the norm-aware plans."""
    _check_eps_delta(epsilon, delta)
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    if n < 2:
        raise ValueError("n must be >= 2")
    lk = math.log(kappa)
    if lk == 0.0:
        n_probes = 1
    else:
        raw = 8.0 / epsilon**2 * (n * lk**2 + 2.0 * epsilon * lk) * math.log(2.0 / delta)
        n_probes = _iceil(raw)
    m = _logdet_m(kappa, epsilon, float(n))
    return PlanResult(n_probes, epsilon, delta, "logdet-simplified", m=m)
