"""Stochastic trace estimation over matrix-free symmetric operators."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import Envelope, NormData, gaussian_envelope, rademacher_envelope
from .lanczos import approx_quadratic_form_log, evaluate_quadrature, lanczos_tridiagonalize
from .probes import ProbeKind, ProbeStream

__all__ = [
    "EstimationError",
    "QuadraticFormEvaluator",
    "exact_evaluator",
    "lanczos_evaluator",
    "adaptive_log_evaluator",
    "EstimateReport",
    "estimate_trace",
    "estimate_diag_trace",
]


class EstimationError(RuntimeError):
    """Evaluator failure, carrying the index of the offending probe."""

    def __init__(self, probe_index: int, message: str):
        self.probe_index = probe_index
        super().__init__(f"probe {probe_index}: {message}")


@dataclass(frozen=True)
class QuadraticFormEvaluator:
    """How x^T f(A) x is computed for each probe.

    The default (f is None) is the exact matvec path, x^T (A x); polynomial
    functions of A are handled upstream by composing operators.  With f and m
    set, each form is approximated by m-step Lanczos quadrature.  With tol
    set, f is the logarithm and the Gauss/Lobatto bracket is iterated until
    it is narrower than tol.
    """

    f: object = None
    m: int | None = None
    tol: float | None = None
    max_m: int = 200

    def __post_init__(self):
        if self.f is None and (self.m is not None or self.tol is not None):
            raise ValueError("m/tol require a function f")
        if self.m is not None and self.tol is not None:
            raise ValueError("choose either fixed m or an adaptive tol, not both")
        if self.f is not None and self.m is None and self.tol is None:
            raise ValueError("a function f needs either m or tol")

    @property
    def mode(self) -> str:
        if self.f is None:
            return "exact"
        return "lanczos-adaptive" if self.tol is not None else "lanczos-fixed"

    def evaluate(self, op, x: np.ndarray) -> float:
        if self.f is None:
            y = op.apply(x)
            return float(np.asarray(x) @ y)
        if self.tol is not None:
            return approx_quadratic_form_log(op, x, self.tol, self.max_m).value
        t, x_norm_sq = lanczos_tridiagonalize(op, x, min(self.m, op.dimension))
        return evaluate_quadrature(t, x_norm_sq, self.f)


def exact_evaluator() -> QuadraticFormEvaluator:
    return QuadraticFormEvaluator()


def lanczos_evaluator(f, m: int) -> QuadraticFormEvaluator:
    return QuadraticFormEvaluator(f=f, m=m)


def adaptive_log_evaluator(tol: float, max_m: int = 200) -> QuadraticFormEvaluator:
    return QuadraticFormEvaluator(f=np.log, tol=tol, max_m=max_m)


@dataclass
class EstimateReport:
    """Trace estimate with its per-probe breakdown and optional certificate."""

    estimate: float
    per_probe_values: np.ndarray
    probe_kind: ProbeKind
    master_seed: int
    first_probe_index: int
    envelope: Envelope | None
    wall_time: float


def _mean(values: np.ndarray) -> float:
    # Compensated accumulation in probe-index order: the reported estimate is
    # bit-identical no matter in which order the probes were evaluated.
    return math.fsum(values) / values.size


def estimate_trace(
    op,
    probes: ProbeStream,
    N: int,
    evaluator: QuadraticFormEvaluator | None = None,
    norms: NormData | None = None,
    delta: float | None = None,
    threads: int = 1,
) -> EstimateReport:
    """Hutchinson estimate: the mean of N quadratic forms X^T f(A) X.

    N is always explicit; use the bounds module to plan it.  When `norms` and
    `delta` are supplied and the probe kind admits one, the report carries an
    (epsilon, delta) error envelope.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if op.dimension != probes.dimension:
        raise ValueError(
            f"operator dimension {op.dimension} != probe dimension {probes.dimension}"
        )
    evaluator = evaluator or QuadraticFormEvaluator()
    start = probes.index
    values = np.empty(N)

    def work(i: int) -> None:
        x = probes.probe(start + i)
        try:
            values[i] = evaluator.evaluate(op, x)
        except Exception as exc:
            raise EstimationError(start + i, str(exc)) from exc

    began = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for _ in pool.map(work, range(N)):
                pass
    else:
        for i in range(N):
            work(i)
    probes.index = start + N
    elapsed = time.perf_counter() - began

    envelope = None
    if norms is not None and delta is not None:
        if probes.kind is ProbeKind.GAUSSIAN:
            envelope = Envelope(gaussian_envelope(norms, delta, N), delta, "gaussian-envelope")
        elif probes.kind is ProbeKind.RADEMACHER:
            envelope = Envelope(rademacher_envelope(norms, delta, N), delta, "rademacher-envelope")
    return EstimateReport(
        estimate=_mean(values),
        per_probe_values=values,
        probe_kind=probes.kind,
        master_seed=probes.master_seed,
        first_probe_index=start,
        envelope=envelope,
        wall_time=elapsed,
    )


def estimate_diag_trace(op, f=None, evaluator: QuadraticFormEvaluator | None = None) -> float:
    """Trace of f(A) from all n diagonal quadratic forms e_i^T f(A) e_i.

    The n-unit-vector baseline: exact for f = identity, and exact up to the
    quadrature error otherwise.  With f given and no explicit evaluator,
    full-length Lanczos (m = n) is used so the quadrature itself is exact.
    """
    matvec = getattr(op, "to_operator", None)
    if matvec is not None:
        op = op.to_operator()
    n = op.dimension
    if evaluator is None:
        evaluator = QuadraticFormEvaluator() if f is None else lanczos_evaluator(f, n)
    total = []
    basis = np.zeros(n)
    for i in range(n):
        basis[:] = 0.0
        basis[i] = 1.0
        total.append(evaluator.evaluate(op, basis))
    return math.fsum(total)
