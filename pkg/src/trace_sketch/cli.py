"""Command-line interface: estimation, planning, and experiment sweeps.

Reports are machine-readable (JSON for single runs, CSV for sweeps) and
self-contained: seeds, package/numpy versions, and formula ids are embedded
so every run can be replayed.  Exit code 0 means the report was written and
all preconditions held; any failure emits a structured error JSON instead.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from importlib import metadata

import numpy as np

from . import bounds as bd
from . import logdet as ld
from . import operators as ops
from . import oracle
from .estimator import (
    EstimateReport,
    adaptive_log_evaluator,
    estimate_trace,
    exact_evaluator,
    lanczos_evaluator,
)
from .probes import ProbeKind, ProbeStream

DEFAULT_SEED = 1729  # fixed documented default; override with TRACE_SKETCH_SEED

__all__ = ["main", "DEFAULT_SEED"]


class CliError(ValueError):
    pass


def _default_seed() -> int:
    env = os.environ.get("TRACE_SKETCH_SEED")
    return int(env) if env else DEFAULT_SEED


def _versions() -> dict:
    try:
        own = metadata.version("trace-sketch")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"trace_sketch": own, "numpy": np.__version__}


def _fmt(value: float) -> str:
    return f"{value:.17g}"


# ---------------------------------------------------------------------------
# Matrix argument: a Matrix Market path, or a generator spec of the form
#   name:key=value:key=value
# with generators identity, scaled-identity, tightness-gaussian,
# tightness-rademacher, lowrank, randspd.


def _parse_spec(text: str) -> tuple[str, dict]:
    parts = text.split(":")
    params = {}
    for item in parts[1:]:
        if "=" not in item:
            raise CliError(f"generator parameter {item!r} must look like key=value")
        key, _, val = item.partition("=")
        params[key.strip()] = val.strip()
    return parts[0].strip().lower(), params


def _load_matrix(text: str):
    """Returns (operator, sparse_matrix_or_None, description)."""
    if os.path.exists(text) or text.endswith((".mtx", ".mm")):
        matrix = ops.load_matrix_market(text)
        return matrix.to_operator(), matrix, {"source": "matrix-market", "path": text}
    name, params = _parse_spec(text)
    geti = lambda key, default=None: int(params[key]) if key in params else default
    getf = lambda key, default=None: float(params[key]) if key in params else default
    if name == "identity":
        n = geti("n")
        if n is None:
            raise CliError("identity needs n=<dim>")
        return ops.identity_operator(n), None, {"source": name, "n": n}
    if name == "scaled-identity":
        n, c = geti("n"), getf("c", math.e)
        if n is None:
            raise CliError("scaled-identity needs n=<dim>")
        return ops.scaled_identity(n, c), None, {"source": name, "n": n, "c": c}
    if name == "tightness-gaussian":
        n = geti("n")
        if n is None:
            raise CliError("tightness-gaussian needs n=<dim>")
        return ops.gen_tightness_gaussian(n), None, {"source": name, "n": n}
    if name == "tightness-rademacher":
        n = geti("n")
        if n is None:
            raise CliError("tightness-rademacher needs n=<dim>")
        return ops.gen_tightness_rademacher(n), None, {"source": name, "n": n}
    if name == "lowrank":
        n, seed, shift = geti("n"), geti("seed", 0), getf("shift", 0.0)
        if n is None:
            raise CliError("lowrank needs n=<dim>")
        matrix = ops.gen_lowrank(n, seed, shift)
        return matrix.to_operator(), matrix, {"source": name, "n": n, "seed": seed, "shift": shift}
    if name == "randspd":
        n, kappa, seed = geti("n"), getf("kappa", 10.0), geti("seed", 0)
        if n is None:
            raise CliError("randspd needs n=<dim>")
        dense = ops.gen_random_spd(n, kappa, seed)
        half = 0.5 * math.log(kappa)
        op = ops.from_dense(
            dense, spectral_interval=(math.exp(-half), math.exp(half)), check=False
        )
        op.exact_norms = {"trace": float(np.trace(dense))}
        return op, dense, {"source": name, "n": n, "kappa": kappa, "seed": seed}
    raise CliError(f"unknown matrix spec {text!r}")


def _norm_data(op, matrix) -> bd.NormData | None:
    known = getattr(op, "exact_norms", None) or {}
    if {"frobenius", "spectral"} <= set(known):
        return bd.NormData(
            frobenius=known["frobenius"],
            spectral=known["spectral"],
            n=op.dimension,
            trace=known.get("trace"),
            source="exact",
        )
    if isinstance(matrix, ops.SparseSymmetricMatrix) and matrix.dimension <= 5000:
        full = ops.exact_norms(matrix)
        return bd.NormData(
            frobenius=full["frobenius"],
            spectral=full["spectral"],
            n=matrix.dimension,
            offdiag_frobenius=matrix.offdiag_frobenius_norm(),
            trace=full["trace"],
            source="exact",
        )
    if isinstance(matrix, np.ndarray) and matrix.shape[0] <= 2000:
        return oracle.norm_data_from_dense(matrix)
    return None


def _write_report(report: dict, output: str | None) -> None:
    text = json.dumps(report, indent=2, default=_json_default)
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, ProbeKind):
        return value.value
    raise TypeError(f"not JSON serializable: {type(value)}")


def _write_csv(header: list[str], rows: list[list], output: str | None) -> None:
    sink = open(output, "w", newline="") if output else io.StringIO()
    try:
        writer = csv.writer(sink)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
        if not output:
            print(sink.getvalue(), end="")
    finally:
        if output:
            sink.close()


def _report_base(args, config: dict) -> dict:
    cleaned = {k: v for k, v in config.items() if k not in ("func", "command") and not callable(v)}
    return {
        "command": args.command,
        "config": cleaned,
        "versions": _versions(),
    }


def _estimate_payload(report: EstimateReport) -> dict:
    payload = {
        "estimate": report.estimate,
        "N": int(report.per_probe_values.size),
        "probe_kind": report.probe_kind.value,
        "seed": report.master_seed,
        "first_probe_index": report.first_probe_index,
        "wall_time_s": report.wall_time,
        "per_probe_values": report.per_probe_values,
    }
    if report.envelope is not None:
        payload["certificate"] = {
            "epsilon": report.envelope.epsilon,
            "delta": report.envelope.delta,
            "formula_id": report.envelope.formula_id,
        }
    return payload


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_trace(args) -> None:
    if (args.N is None) == (args.epsilon is None or args.delta is None):
        raise CliError("supply exactly one of --N or (--epsilon and --delta)")
    op, matrix, source = _load_matrix(args.matrix)
    kind = ProbeKind.parse(args.probes)
    norms = _norm_data(op, matrix)

    if args.f == "identity":
        target, evaluator = op, exact_evaluator()
    elif args.f == "cube":
        base = op if matrix is None or not isinstance(matrix, ops.SparseSymmetricMatrix) else matrix.to_operator()
        target, evaluator = ops.PolynomialOfOperator(base, 3), exact_evaluator()
        norms = None
    elif args.f == "log":
        target = op
        evaluator = (
            adaptive_log_evaluator(args.tol) if args.m is None else lanczos_evaluator(np.log, args.m)
        )
        norms = None
    else:
        raise CliError(f"unsupported function {args.f!r}")

    n_probes = args.N
    plan = None
    if n_probes is None:
        if norms is None:
            raise CliError("planning N from (epsilon, delta) needs computable norms; pass --N")
        plan = (
            bd.gaussian_sample_plan(norms, args.epsilon, args.delta)
            if kind is ProbeKind.GAUSSIAN
            else bd.rademacher_sample_plan(norms, args.epsilon, args.delta)
        )
        n_probes = plan.N

    stream = ProbeStream(kind, target.dimension, args.seed)
    report = estimate_trace(
        target, stream, n_probes, evaluator, norms=norms, delta=args.delta, threads=args.threads
    )
    payload = _report_base(args, vars(args) | source)
    payload["result"] = _estimate_payload(report)
    if plan is not None:
        payload["plan"] = vars(plan) | {"formula_id": plan.formula_id}
    _write_report(payload, args.output)


def _cmd_plan(args) -> None:
    if args.matrix is not None:
        op, matrix, source = _load_matrix(args.matrix)
        norms = _norm_data(op, matrix)
        if norms is None:
            raise CliError("norms are not computable for this input; pass them explicitly")
    else:
        needed = (args.frobenius, args.spectral, args.n)
        if any(v is None for v in needed):
            raise CliError("plan needs --matrix or all of --frobenius --spectral --n")
        norms = bd.NormData(
            frobenius=args.frobenius,
            spectral=args.spectral,
            n=args.n,
            offdiag_frobenius=args.offdiag_frobenius,
            offdiag_spectral=args.offdiag_spectral,
            trace=args.trace,
            source="declared",
        )
        source = {"source": "declared-norms"}
    plans = {
        "gaussian": vars(bd.gaussian_sample_plan(norms, args.epsilon, args.delta)),
        "rademacher": vars(bd.rademacher_sample_plan(norms, args.epsilon, args.delta)),
    }
    if norms.trace is not None and norms.trace > 0:
        rel = bd.spsd_relative_plans(norms, args.epsilon, args.delta)
        plans["spsd_relative"] = {k: vars(v) for k, v in rel.items()}
    comparisons = None
    if args.nuclear is not None:
        comparisons = vars(
            bd.comparison_bounds(
                norms,
                args.nuclear,
                args.rank or norms.n,
                args.epsilon,
                args.delta,
                N=plans["gaussian"]["N"],
            )
        )
    if args.kappa is not None:
        plans["logdet_simplified"] = vars(
            bd.logdet_plan_simplified(args.kappa, norms.n, args.epsilon, args.delta)
        )
    payload = _report_base(args, vars(args) | source)
    payload["norms"] = vars(norms)
    payload["plans"] = plans
    if comparisons is not None:
        payload["comparisons"] = comparisons
    _write_report(payload, args.output)


def _cmd_logdet(args) -> None:
    op, matrix, source = _load_matrix(args.matrix)
    kind = ProbeKind.parse(args.probes)
    if args.mode == "adaptive":
        run = ld.estimate_logdet_adaptive(
            op, kind, args.epsilon, args.delta, max_N=args.max_N, seed=args.seed
        )
    else:
        if args.kappa is not None:
            kappa = args.kappa
        elif op.spectral_interval is not None and op.spectral_interval[0] > 0:
            kappa = op.spectral_interval[1] / op.spectral_interval[0]
        else:
            from .lanczos import estimate_spectral_interval

            lo, hi = estimate_spectral_interval(op)
            if lo <= 0:
                raise CliError("operator does not look SPD; cannot plan")
            kappa = hi / lo
        if args.lognorm_frobenius is not None and args.lognorm_spectral is not None:
            plan = bd.logdet_plan_gaussian(
                kappa, args.lognorm_spectral, args.lognorm_frobenius,
                op.dimension, args.epsilon, args.delta, source="declared",
            ) if kind is ProbeKind.GAUSSIAN else bd.logdet_plan_rademacher(
                kappa, args.lognorm_spectral, args.lognorm_frobenius,
                op.dimension, args.epsilon, args.delta, source="declared",
            )
        elif isinstance(matrix, np.ndarray) and matrix.shape[0] <= 2000:
            log_a = oracle.matrix_function(matrix, np.log)
            ln = oracle.norm_data_from_dense(log_a)
            off_f, off_2, _ = ln.offdiag_or_surrogate()
            plan = (
                bd.logdet_plan_gaussian(
                    kappa, ln.spectral, ln.frobenius, op.dimension, args.epsilon, args.delta
                )
                if kind is ProbeKind.GAUSSIAN
                else bd.logdet_plan_rademacher(
                    kappa, off_2, off_f, op.dimension, args.epsilon, args.delta
                )
            )
        else:
            plan = bd.logdet_plan_simplified(kappa, op.dimension, args.epsilon, args.delta)
        stream = ProbeStream(kind, op.dimension, args.seed)
        run = ld.estimate_logdet(op, stream, plan)
    payload = _report_base(args, vars(args) | source)
    payload["result"] = {
        "estimate": run.estimate,
        "raw_sum": run.raw_sum,
        "N": run.N,
        "mode": run.mode,
        "probe_kind": run.probe_kind.value,
        "seed": run.master_seed,
        "converged": run.converged,
        "certificate": run.certificate,
        "diagnostics": {
            k: v for k, v in run.diagnostics.items() if k != "doubling_history"
        },
    }
    _write_report(payload, args.output)


def _cmd_experiment(args) -> None:
    seed = args.seed
    if args.mode == "tightness":
        sizes = [2**k for k in range(2, args.max_log2_n + 1)]
        header = ["n", "trial", "abs_error", "envelope"]
        rows: list[list] = []
        for n in sizes:
            op = ops.gen_tightness_gaussian(n)
            norms = bd.NormData(frobenius=math.sqrt(n), spectral=1.0, n=n)
            env = bd.gaussian_envelope(norms, args.delta, args.N)
            errors = oracle.empirical_errors(
                op, ProbeKind.GAUSSIAN, args.N, args.trials, seed + n
            )
            rows.extend([n, t, float(e), env] for t, e in enumerate(errors))
        _write_csv(header, rows, args.output)
        return
    if args.mode not in ("failure", "error"):
        raise CliError(f"unknown experiment mode {args.mode!r}")
    op, matrix, _ = _load_matrix(args.matrix)
    norms = _norm_data(op, matrix)
    if norms is None:
        raise CliError("experiment needs computable norms for the bound curves")
    trace = norms.trace
    if trace is None:
        raise CliError("experiment needs the true trace")
    epsilon = args.epsilon if args.epsilon is not None else 0.1 * abs(trace)
    ns = [2**k for k in range(1, args.max_log2_N + 1)]
    if args.mode == "failure":
        header = ["probe_kind", "N", "empirical_failure", "bound_failure"]
        rows = []
        for kind, tail in (
            (ProbeKind.GAUSSIAN, bd.gaussian_tail),
            (ProbeKind.RADEMACHER, bd.rademacher_tail),
        ):
            for n_probes in ns:
                freq = oracle.empirical_tail(
                    op, kind, n_probes, args.trials, [epsilon], seed + n_probes
                )[0]
                rows.append([kind.value, n_probes, float(freq), min(1.0, tail(norms, n_probes, epsilon))])
        _write_csv(header, rows, args.output)
        return
    header = ["probe_kind", "N", "p95_abs_error", "envelope"]
    rows = []
    for kind, envelope in (
        (ProbeKind.GAUSSIAN, bd.gaussian_envelope),
        (ProbeKind.RADEMACHER, bd.rademacher_envelope),
    ):
        for n_probes in ns:
            errors = oracle.empirical_errors(op, kind, n_probes, args.trials, seed + n_probes)
            rows.append(
                [kind.value, n_probes, float(np.quantile(errors, 0.95)), envelope(norms, args.delta, n_probes)]
            )
    _write_csv(header, rows, args.output)


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trace-sketch",
        description="Stochastic trace and log-determinant estimation with certified envelopes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=_default_seed())
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--output", default=None, help="report path (default stdout)")

    p_trace = sub.add_parser("trace", help="estimate tr(f(A))")
    p_trace.add_argument("--matrix", required=True, help="Matrix Market path or generator spec name:key=value")
    p_trace.add_argument("--f", default="identity", choices=["identity", "cube", "log"])
    p_trace.add_argument("--probes", default="rademacher")
    p_trace.add_argument("--N", type=int, default=None)
    p_trace.add_argument("--epsilon", type=float, default=None)
    p_trace.add_argument("--delta", type=float, default=None)
    p_trace.add_argument("--m", type=int, default=None, help="fixed Lanczos steps for --f log")
    p_trace.add_argument("--tol", type=float, default=1e-6, help="bracket tolerance for --f log")
    common(p_trace)
    p_trace.set_defaults(func=_cmd_trace)

    p_plan = sub.add_parser("plan", help="sample-size plans for every applicable bound")
    p_plan.add_argument("--matrix", default=None)
    p_plan.add_argument("--epsilon", type=float, required=True)
    p_plan.add_argument("--delta", type=float, required=True)
    p_plan.add_argument("--frobenius", type=float, default=None)
    p_plan.add_argument("--spectral", type=float, default=None)
    p_plan.add_argument("--n", type=int, default=None)
    p_plan.add_argument("--offdiag-frobenius", dest="offdiag_frobenius", type=float, default=None)
    p_plan.add_argument("--offdiag-spectral", dest="offdiag_spectral", type=float, default=None)
    p_plan.add_argument("--trace", type=float, default=None)
    p_plan.add_argument("--nuclear", type=float, default=None)
    p_plan.add_argument("--rank", type=int, default=None)
    p_plan.add_argument("--kappa", type=float, default=None)
    common(p_plan)
    p_plan.set_defaults(func=_cmd_plan)

    p_logdet = sub.add_parser("logdet", help="estimate log det A for SPD A")
    p_logdet.add_argument("--matrix", required=True)
    p_logdet.add_argument("--mode", default="planned", choices=["planned", "adaptive"])
    p_logdet.add_argument("--probes", default="rademacher")
    p_logdet.add_argument("--epsilon", type=float, required=True)
    p_logdet.add_argument("--delta", type=float, required=True)
    p_logdet.add_argument("--max-N", dest="max_N", type=int, default=4096)
    p_logdet.add_argument("--kappa", type=float, default=None)
    p_logdet.add_argument("--lognorm-spectral", dest="lognorm_spectral", type=float, default=None)
    p_logdet.add_argument("--lognorm-frobenius", dest="lognorm_frobenius", type=float, default=None)
    common(p_logdet)
    p_logdet.set_defaults(func=_cmd_logdet)

    p_exp = sub.add_parser("experiment", help="CSV sweeps: tightness, failure, error")
    p_exp.add_argument("--mode", required=True, choices=["tightness", "failure", "error"])
    p_exp.add_argument("--matrix", default=None)
    p_exp.add_argument("--N", type=int, default=10, help="samples per estimate (tightness mode)")
    p_exp.add_argument("--trials", type=int, default=100)
    p_exp.add_argument("--epsilon", type=float, default=None)
    p_exp.add_argument("--delta", type=float, default=0.01)
    p_exp.add_argument("--max-log2-n", dest="max_log2_n", type=int, default=10)
    p_exp.add_argument("--max-log2-N", dest="max_log2_N", type=int, default=8)
    common(p_exp)
    p_exp.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # structured error contract for scripting
        print(
            json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
            file=sys.stdout,
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
