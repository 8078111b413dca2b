"""Command-line front end.

Subcommands::

    l1pca fit      fit a subspace, write a YAML report (and optionally a CSV trace)
    l1pca certify  check first-order optimality of a given basis
    l1pca compare  standard PCA against the robust fit

Exit codes: 0 success, 2 data or usage error, 3 solver degeneracy,
4 rank-deficient basis.
"""

import argparse
import csv
import io
import os
import sys
import tempfile
import time

import numpy as np
import yaml

from . import __version__
from .anchor import certify_anchor
from .data import GENERATORS, center, load_csv
from .exceptions import (
    DataError,
    DegenerateData,
    L1PCAError,
    NegativeRadicand,
    RankDeficient,
    SingularPrecondition,
)
from .manifold import grassmann_distance, polar_project, stiefel_defect
from .objective import anchor_status, eval_E, gradients
from .solver import SolverConfig, distinct_solutions, fit, standard_pca

EXIT_OK = 0
EXIT_DATA = 2
EXIT_SOLVER = 3
EXIT_BASIS = 4

TRACE_HEADER = ("r", "E", "step_norm", "grad_norm", "min_residual", "C1_ratio")


class _BasisError(Exception):
    pass


# -- plumbing ---------------------------------------------------------------------


def _plain(obj):
    """Convert numpy values and containers to YAML-safe builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _dump(report):
    return yaml.safe_dump(_plain(report), sort_keys=False, default_flow_style=None, width=1000)


def _write_atomic(path, text):
    path = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".l1pca-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(outputs):
    """Write every ``(path, text)`` pair; ``path=None`` means stdout."""
    for path, text in outputs:
        if path is None:
            sys.stdout.write(text)
        else:
            _write_atomic(path, text)


def _load_cloud(args):
    if args.input is not None:
        return load_csv(args.input)
    return GENERATORS[args.generate]()


def _centering(args, cloud):
    if args.center == "auto":
        return cloud.default_centering
    return args.center


def _dataset(args):
    cloud = _load_cloud(args)
    data = center(cloud, _centering(args, cloud))
    return cloud, data


def _dataset_summary(cloud, data):
    return {
        "source": cloud.source,
        "N": data.N,
        "d": data.d,
        "centering": data.centering,
        "offset": data.offset,
        "zero_points": int(data.zero_mask.sum()),
    }


def _config(args):
    return SolverConfig(
        max_iter=args.max_iter,
        tol_step=args.tol_step,
        tol_grad=args.tol_grad,
        anchor_tol=args.anchor_tol,
        scheme=args.scheme,
        restarts=args.restarts,
        seed=args.seed,
        eps_smoothing=args.eps,
        n_jobs=args.jobs,
    )


def _config_echo(args, cfg):
    return {
        "k": args.k,
        "center": args.center,
        "scheme": cfg.scheme,
        "init": cfg.init,
        "restarts": cfg.restarts,
        "seed": cfg.seed,
        "max_iter": cfg.max_iter,
        "tol_grad": cfg.tol_grad,
        "tol_step": cfg.tol_step,
        "anchor_tol": cfg.anchor_tol,
        "cert_tol": cfg.cert_tol,
        "eps": cfg.eps_smoothing,
    }


def _anchor_dict(report):
    if report is None:
        return None
    out = {
        "anchor_set": list(report.anchor_set),
        "kappa": report.kappa,
        "rank_m": report.rank_m,
        "structure": report.structure,
        "verdict": report.verdict,
        "condition_values": report.condition_values,
    }
    if report.descent is not None:
        out["descent_direction"] = report.descent
        out["descent_derivative"] = report.descent_derivative
        out["descent_source"] = report.descent_source
    return out


def _angle_deg(A, B):
    """Largest principal angle between two subspaces, in degrees."""
    return float(np.degrees(np.arcsin(min(1.0, grassmann_distance(A, B)))))


def _trace_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for rec in result.trace:
        writer.writerow([rec.r, repr(rec.E_value), repr(rec.step_norm), repr(rec.grad_norm),
                         repr(rec.min_residual), repr(rec.C1_ratio)])
    return buf.getvalue()


# -- subcommands ------------------------------------------------------------------


def cmd_fit(args):
    t0 = time.perf_counter()
    cloud, data = _dataset(args)
    cfg = _config(args)
    result = fit(data, args.k, cfg)
    elapsed = time.perf_counter() - t0

    A = result.A_hat
    report = {
        "command": "fit",
        "version": __version__,
        "config": _config_echo(args, cfg),
        "dataset": _dataset_summary(cloud, data),
        "best": {
            "E": result.E_hat,
            "run": result.run_index,
            "termination": result.termination,
            "iterations": result.n_iter,
            "basis": A,
            "orthonormality_defect": stiefel_defect(A),
            "estimated_K1": result.diagnostics.get("estimated_K1"),
            "anchor_escapes": result.diagnostics.get("anchor_escapes", 0),
            "anchor_report": _anchor_dict(result.anchor_report),
        },
        "restarts": [
            {
                "run": res.run_index,
                "E": res.E_hat,
                "termination": res.termination,
                "iterations": res.n_iter,
                "anchor_verdict": res.anchor_report.verdict if res.anchor_report else None,
            }
            for res in result.runs
        ],
        "distinct_solutions": [
            {"E": rep.E_hat, "count": count, "first_run": rep.run_index, "basis": rep.A_hat}
            for rep, count in distinct_solutions(result)
        ],
    }
    if cloud.truth.get(args.k) is not None:
        report["best"]["angle_to_truth_deg"] = _angle_deg(A, cloud.truth[args.k])
    if args.timing:
        report["timing_seconds"] = elapsed

    outputs = [(args.out, _dump(report))]
    if args.trace:
        outputs.append((args.trace, _trace_csv(result)))
    _emit(outputs)
    return EXIT_OK


def _load_basis(path, d):
    cloud = load_csv(path)
    M = cloud.points
    if M.shape[0] != d:
        raise DataError(f"{path}: basis has {M.shape[0]} rows, data live in R^{d}")
    try:
        return polar_project(M)
    except RankDeficient as exc:
        raise _BasisError(f"{path}: {exc}") from exc


def cmd_certify(args):
    cloud, data = _dataset(args)
    A = _load_basis(args.subspace, data.d)
    st = anchor_status(A, data, args.anchor_tol)
    report = {
        "command": "certify",
        "version": __version__,
        "config": {"center": args.center, "anchor_tol": args.anchor_tol, "tol_grad": args.tol_grad},
        "dataset": _dataset_summary(cloud, data),
        "basis": A,
        "E": eval_E(A, data),
        "anchor_set": list(st.active_indices),
        "min_relative_residual": st.min_relative_residual,
    }
    if st.is_anchor:
        rep = certify_anchor(A, data, args.anchor_tol)
        report["anchor_report"] = _anchor_dict(rep)
        report["verdict"] = rep.verdict
    else:
        g = gradients(A, data, args.anchor_tol)
        ca = float(np.linalg.norm(g.CA))
        rel = g.grad_norm / ca if ca > 0 else 0.0
        report["verdict"] = "critical_point" if rel <= args.tol_grad else "not_critical"
        report["critical_point_test"] = {
            "grad_norm": g.grad_norm,
            "relative_grad_norm": rel,
            "tol_grad": args.tol_grad,
            "passed": rel <= args.tol_grad,
        }
    _emit([(args.out, _dump(report))])
    return EXIT_OK


def cmd_compare(args):
    cloud, data = _dataset(args)
    cfg = _config(args)
    pca = standard_pca(data, args.k)
    robust = fit(data, args.k, cfg)
    A = robust.A_hat
    report = {
        "command": "compare",
        "version": __version__,
        "config": _config_echo(args, cfg),
        "dataset": _dataset_summary(cloud, data),
        "standard_pca": {"basis": pca, "E": eval_E(pca, data)},
        "robust": {"basis": A, "E": robust.E_hat, "termination": robust.termination},
        "grassmann_distance": grassmann_distance(pca, A),
    }
    truth = cloud.truth.get(args.k)
    if truth is not None:
        report["standard_pca"]["angle_to_truth_deg"] = _angle_deg(pca, truth)
        report["robust"]["angle_to_truth_deg"] = _angle_deg(A, truth)
    if args.nested_k is not None:
        k2 = args.nested_k
        other = fit(data, k2, cfg).A_hat
        small, big = (A, other) if args.k < k2 else (other, A)
        resid = float(np.linalg.norm(small - big @ (big.T @ small), 2))
        report["nestedness"] = {
            "k_small": min(args.k, k2),
            "k_large": max(args.k, k2),
            "basis_k2": other,
            "residual": resid,
            "violated": resid > 1e-6,
        }
    _emit([(args.out, _dump(report))])
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _add_data_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="CSV", help="points, one per row")
    src.add_argument("--generate", choices=sorted(GENERATORS), help="built-in dataset")
    p.add_argument("--center", choices=("auto", "mean", "median", "none"), default="auto",
                   help="offset choice; auto uses the dataset's own default (mean for CSV input)")
    p.add_argument("--anchor-tol", type=_positive_float, default=1e-9)
    p.add_argument("--tol-grad", type=_positive_float, default=1e-8)
    p.add_argument("--out", metavar="PATH", help="report file (default: stdout)")


def _add_solver_args(p):
    p.add_argument("--k", type=_positive_int, required=True, help="subspace dimension")
    p.add_argument("--scheme", choices=("ding", "precond"), default="ding")
    p.add_argument("--restarts", type=_nonneg_int, default=0)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--tol-step", type=_positive_float, default=1e-10)
    p.add_argument("--max-iter", type=_positive_int, default=1000)
    p.add_argument("--eps", type=_positive_float, default=None, help="smoothing parameter")
    p.add_argument("--jobs", type=_positive_int, default=1, help="threads for restarts")


def build_parser():
    parser = argparse.ArgumentParser(prog="l1pca", description="Robust PCA by sum of distances.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a subspace")
    _add_data_args(p)
    _add_solver_args(p)
    p.add_argument("--trace", metavar="PATH", help="per-iteration CSV of the best run")
    p.add_argument("--timing", action="store_true", help="include wall-clock time in the report")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("certify", help="check optimality of a given basis")
    _add_data_args(p)
    p.add_argument("--subspace", metavar="CSV", required=True, help="d x K basis, one row per coordinate")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("compare", help="standard PCA against the robust fit")
    _add_data_args(p)
    _add_solver_args(p)
    p.add_argument("--nested-k", type=_positive_int, default=None,
                   help="also fit this dimension and report nestedness")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _BasisError as exc:
        print(f"l1pca: rank-deficient basis: {exc}", file=sys.stderr)
        return EXIT_BASIS
    except (DegenerateData, SingularPrecondition, RankDeficient, NegativeRadicand) as exc:
        print(f"l1pca: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (L1PCAError, ValueError) as exc:
        print(f"l1pca: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"l1pca: cannot write output: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
