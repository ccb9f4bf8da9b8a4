"""Command line front end: ``tensorank <command> [flags]``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import io
from .cp import reconstruct
from .params import estimate_lambda
from .solver import SolverConfig, SolverError, lrat_solve

log = logging.getLogger("tensorank")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _solver_flags(p, R_default=None):
    p.add_argument("--R", type=_positive_int, required=R_default is None, default=R_default,
                   help="upper bound on the number of components")
    p.add_argument("--s", type=float, default=1.5, help="step rescaling, must exceed 1")
    p.add_argument("--iter-max", type=_positive_int, default=10000)
    p.add_argument("--conv-tol", type=float, default=1e-10)


def _lambda_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lam", type=_nonneg_float, default=None, help="l1 weight")
    g.add_argument("--auto-lambda", action="store_true", help="choose the l1 weight from a modALS pilot")


def _common(p, out_help):
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", type=Path, required=True, help=out_help)


def _jobs(p):
    p.add_argument("--jobs", type=_positive_int, default=int(os.environ.get("TENSORANK_JOBS", "1")),
                   help="parallel worker processes (default $TENSORANK_JOBS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tensorank", description="Sparse CP rank estimation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="random low-rank tensor")
    p.add_argument("--dims", type=_positive_int, nargs=3, required=True, metavar=("I", "J", "K"))
    p.add_argument("--cn", type=_positive_int, required=True, help="number of rank-one terms")
    p.add_argument("--noise", type=_nonneg_float, default=0.0)
    p.add_argument("--factors-out", type=Path, help="also write the generating factors as JSON")
    _common(p, "tensor file (.json for JSON, anything else for TNS3)")

    p = sub.add_parser("decompose", help="LRAT decomposition of a tensor file")
    p.add_argument("tensor", type=Path)
    _solver_flags(p)
    _lambda_flags(p)
    p.add_argument("--trace", type=Path, help="per-iteration CSV trace")
    p.add_argument("--reconstruct", type=Path, help="write the fitted tensor as TNS3")
    _common(p, "result JSON")

    p = sub.add_parser("estimate-rank", help="pick lambda from the data, then report the estimated rank")
    p.add_argument("tensor", type=Path)
    _solver_flags(p)
    _common(p, "JSON with sigma2_hat, gamma_hat, lambda_hat and R_hat")

    p = sub.add_parser("sweep-lambda", help="estimated rank against lambda")
    p.add_argument("--dims", type=_positive_int, nargs=3, default=[10, 10, 10])
    p.add_argument("--cn", type=_positive_int, default=5)
    p.add_argument("--lam-max", type=_nonneg_float, default=0.1)
    p.add_argument("--lam-step", type=float, default=0.001)
    _solver_flags(p, R_default=10)
    _common(p, "CSV lambda,R_hat")

    p = sub.add_parser("table1", help="mean/std of the estimated rank over random tensors")
    p.add_argument("--cells", default="all",
                   help="comma list of SIZE:CN (e.g. 5:3,10:5) or 'all' for every filled cell")
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--noise", type=_nonneg_float, default=0.0)
    p.add_argument("--s", type=float, default=1.5)
    p.add_argument("--iter-max", type=_positive_int, default=10000)
    p.add_argument("--conv-tol", type=float, default=1e-10)
    _jobs(p)
    _common(p, "CSV I,J,K,cn,trial,R_hat,residual,iters,ms")

    p = sub.add_parser("compare", help="LRAT vs modALS traces")
    p.add_argument("--dims", type=_positive_int, nargs=3, default=[5, 5, 5])
    p.add_argument("--cn", type=_positive_int, default=3)
    _solver_flags(p, R_default=5)
    _common(p, "CSV iter,residual_lrat,residual_modals,objective_lrat")

    p = sub.add_parser("consistency", help="lasso support recovery vs the probability bound")
    p.add_argument("--n", type=_positive_int, default=200)
    p.add_argument("--R", type=_positive_int, default=10)
    p.add_argument("--k", type=_positive_int, default=3)
    p.add_argument("--sigma2", type=_nonneg_float, default=1e-3)
    p.add_argument("--gamma-target", type=float, default=0.5)
    p.add_argument("--trials", type=_positive_int, default=500)
    p.add_argument("--lam", type=_nonneg_float, default=None,
                   help="l1 weight (default: the value giving bound 0.99)")
    _common(p, "CSV trial,recovered,bound")

    p = sub.add_parser("video", help="low-rank approximation of a PGM frame stack")
    p.add_argument("frames", type=Path, help="directory of binary PGM frames")
    p.add_argument("--region", type=int, nargs=4, metavar=("X", "Y", "W", "H"))
    p.add_argument("--list", type=Path, dest="manifest", help="file listing frame names in order")
    _solver_flags(p)
    _lambda_flags(p)
    _common(p, "result JSON")
    return parser


def _cfg(args, lam=0.0, record_trace=False):
    return SolverConfig(R=args.R, lam=lam, s=args.s, iter_max=args.iter_max,
                        conv_tol=args.conv_tol, seed=args.seed, record_trace=record_trace)


def _solve(A, args, record_trace=False):
    """LRAT with a fixed or data-driven lambda; returns (result, estimate or None)."""
    est = None
    if args.auto_lambda:
        est = estimate_lambda(A, args.R, _cfg(args))
        lam = est.lambda_hat
    else:
        lam = args.lam if args.lam is not None else 0.0
    res = lrat_solve(A, _cfg(args, lam, record_trace))
    return res, est, lam


def cmd_gen(args):
    A, f = ex.gen_random_lowrank(tuple(args.dims), args.cn, args.seed, args.noise)
    io.write_tensor(args.out, A)
    if args.factors_out:
        io.write_json(args.factors_out, io.factors_to_dict(f))
    print(f"wrote {args.out} ({'x'.join(map(str, A.shape))}, cn={args.cn})")


def cmd_decompose(args):
    A = io.read_tensor(args.tensor)
    res, est, lam = _solve(A, args, record_trace=args.trace is not None)
    out = io.result_to_dict(res)
    out["lambda"] = lam
    out["relative_residual"] = ex.relative_residual(A, res.factors)
    if est is not None:
        out["lambda_estimate"] = est.as_dict()
    io.write_json(args.out, out)
    if args.trace is not None:
        io.write_trace(args.trace, res.trace)
    if args.reconstruct is not None:
        io.write_tensor(args.reconstruct, reconstruct(res.factors))
    print(f"R_hat={res.estimated_rank} lambda={lam:.6g} iterations={res.iterations} "
          f"converged={res.converged} relative_residual={out['relative_residual']:.3e}")


def cmd_estimate_rank(args):
    A = io.read_tensor(args.tensor)
    est = estimate_lambda(A, args.R, _cfg(args))
    res = lrat_solve(A, _cfg(args, est.lambda_hat))
    out = est.as_dict()
    out["R_hat"] = res.estimated_rank
    io.write_json(args.out, out)
    print(f"lambda_hat={est.lambda_hat:.6g} R_hat={res.estimated_rank}")


def cmd_sweep_lambda(args):
    n = int(round(args.lam_max / args.lam_step))
    lambdas = np.round(np.arange(n + 1) * args.lam_step, 12)
    rows = ex.sweep_lambda(tuple(args.dims), args.cn, args.R, lambdas, seed=args.seed, s=args.s,
                           iter_max=args.iter_max, conv_tol=args.conv_tol)
    io.write_csv(args.out, ("lambda", "R_hat"), rows)
    print(f"spearman(lambda, R_hat) = {ex.rank_trend(rows):.3f}")


def _parse_cells(text, trials, seed, **kw):
    if text == "all":
        return ex.table1_grid(trials=trials, seed=seed, **kw)
    specs = []
    for item in text.split(","):
        size, cn = (int(v) for v in item.split(":"))
        specs.append(ex.TrialSpec((size,) * 3, cn, size, trials=trials, seed=seed, **kw))
    return specs


def cmd_table1(args):
    specs = _parse_cells(args.cells, args.trials, args.seed, s=args.s, iter_max=args.iter_max,
                         conv_tol=args.conv_tol, noise=args.noise)
    report = ex.table1_experiment(specs, jobs=args.jobs)
    io.write_csv(args.out, ex.TABLE1_FIELDS, report.as_tuples())
    for (I, J, K, cn), (mean, std, n) in report.summary().items():
        pub = ex.TABLE1_PUBLISHED.get((I, cn))
        ref = f"  published {pub[0]} ({pub[1]})" if pub and I == J == K else ""
        print(f"{I}x{J}x{K} cn={cn}: R_hat {mean:.2f} ({std:.2f}) over {n}{ref}")


def cmd_compare(args):
    c = ex.compare_solvers(tuple(args.dims), args.cn, args.R, seed=args.seed, s=args.s,
                           iter_max=args.iter_max, conv_tol=args.conv_tol)
    io.write_csv(args.out, ("iter", "residual_lrat", "residual_modals", "objective_lrat"), c.rows())
    print(f"lambda_hat={c.lam:.6g} final residual: LRAT {c.residual_lrat[-1]:.3e} (R_hat={c.rank_lrat}), "
          f"modALS {c.residual_modals[-1]:.3e}")


def cmd_consistency(args):
    rep = ex.consistency_experiment(args.n, args.R, args.k, args.sigma2, args.gamma_target,
                                    args.trials, seed=args.seed, lam=args.lam)
    io.write_csv(args.out, ("trial", "recovered", "bound"), rep.rows)
    bound = "bound vacuous" if rep.vacuous else f"bound {rep.bound:.4f}"
    print(f"lambda={rep.lam:.6g} gamma={rep.gamma:.3f} mu={rep.mu:.3f} "
          f"recovery rate {rep.rate:.4f}, {bound}")


def video_summary(A, res, R):
    w, h, T = A.shape
    return {
        "R_hat": res.estimated_rank,
        "R": R,
        "storage": (w + h + T) * res.estimated_rank,
        "storage_full": (w + h + T) * R,
        "relative_residual": ex.relative_residual(A, res.factors),
    }


def cmd_video(args):
    A = io.ingest_frames(args.frames, args.region, args.manifest)
    res, est, lam = _solve(A, args)
    summary = video_summary(A, res, args.R)
    out = io.result_to_dict(res)
    out.update(summary, **{"lambda": lam})
    if est is not None:
        out["lambda_estimate"] = est.as_dict()
    io.write_json(args.out, out)
    w, h, T = A.shape
    print(f"R_hat={res.estimated_rank} of R={args.R}")
    print(f"storage: ({w}+{h}+{T})x{res.estimated_rank} = {summary['storage']} "
          f"vs ({w}+{h}+{T})x{args.R} = {summary['storage_full']}")
    print(f"relative residual {summary['relative_residual']:.4e}")


COMMANDS = {
    "gen": cmd_gen,
    "decompose": cmd_decompose,
    "estimate-rank": cmd_estimate_rank,
    "sweep-lambda": cmd_sweep_lambda,
    "table1": cmd_table1,
    "compare": cmd_compare,
    "consistency": cmd_consistency,
    "video": cmd_video,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "s", 2.0) <= 1:
        print("tensorank: error: --s must exceed 1", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args)
    except (OSError, ValueError, SolverError, json.JSONDecodeError) as e:
        # FormatError and ParamSelectError are ValueErrors
        print(f"tensorank {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
