"""Command-line surface.

Subcommands: gen, mask, corrupt, solve, eval, bound, phase, rank.
Every subcommand validates its inputs and exits nonzero with a single-line
machine-parsable JSON error on stderr; exit code 0 means success.  All
randomness is seed-driven, so scripted pipelines are byte-reproducible.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import TuckerError
from .metrics import metric_report
from .phantoms import gen_phantom
from .phase import PhaseGrid, run_phase, write_phase_csv
from .sampling import (CorruptionSpec, corrupt, load_mask, save_mask,
                       uniform_mask, z_slice_mask)
from .solver import SolverConfig, export_trajectory, solve
from .theory import (BoundInput, IncoherenceProfile, bound_theorem1,
                     bound_theorem2, estimate_rank)
from .volio import atomic_write_text, read_volume, write_volume

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(json.dumps({"error": message}), file=sys.stderr)
        raise SystemExit(2)


def _dims(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated ints")
    return tuple(parts)


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def _emit(obj) -> None:
    print(json.dumps(obj))


def cmd_gen(args) -> int:
    vol = gen_phantom(args.dims, args.ranks, args.kind, args.seed)
    write_volume(vol, args.out, dtype=args.dtype)
    _emit({"out": str(args.out), "dims": list(vol.dims), "kind": args.kind,
           "seed": args.seed})
    return 0


def cmd_mask(args) -> int:
    if args.law == "uniform":
        if args.n is None:
            raise ValueError("uniform law requires --n")
        mask = uniform_mask(args.dims, args.n, args.seed)
    else:
        if args.stride is None:
            raise ValueError("zslice law requires --stride")
        mask = z_slice_mask(args.dims, args.stride, args.offset)
    save_mask(mask, args.out)
    _emit({"out": str(args.out), "dims": list(mask.dims), "law": mask.law,
           "count": mask.count})
    return 0


def cmd_corrupt(args) -> int:
    vol, _ = read_volume(args.infile)
    mask = load_mask(args.mask)
    spec = CorruptionSpec(sparse_fraction=args.sparse_frac,
                          sparse_amplitude=args.amp,
                          gaussian_sigma=args.sigma, seed=args.seed)
    y, e_true = corrupt(vol, spec, mask)
    write_volume(y, args.out_y)
    write_volume(e_true, args.out_e)
    _emit({"out_y": str(args.out_y), "out_e": str(args.out_e),
           "observed": mask.count,
           "sparse_count": int(np.count_nonzero(e_true.data))})
    return 0


def cmd_solve(args) -> int:
    y, _ = read_volume(args.y)
    mask = load_mask(args.mask)
    config = SolverConfig(ranks=args.ranks, lambda1=args.lambda1,
                          rho=args.rho, max_iters=args.max_iters,
                          rel_tol=args.tol, nonneg=args.nonneg,
                          record_trajectory=args.trace is not None)
    report = solve(y, mask, config)
    write_volume(report.x_hat, args.out_x)
    write_volume(report.e_hat, args.out_e)
    if args.trace is not None:
        export = export_trajectory(report)
        lines = ["iter,fro_x,l1_e,primal_residual,rel_change,objective"]
        for rec in export.records:
            lines.append(f"{rec.iter},{rec.fro_x!r},{rec.l1_e!r},"
                         f"{rec.primal_residual!r},{rec.rel_change!r},"
                         f"{rec.objective!r}")
        atomic_write_text(args.trace, "\n".join(lines) + "\n")
    _emit({
        "converged": report.converged,
        "iterations": report.iterations,
        "ranks": list(config.ranks),
        "lambda1": report.lambda1,
        "rho": config.rho,
        "rel_tol": config.rel_tol,
        "nonneg": config.nonneg,
        "nonneg_clamped": report.nonneg_clamped,
        "final_primal_residual": report.residual_history[-1].primal_residual,
        "final_rel_change": _finite_or_none(
            report.residual_history[-1].rel_change),
        "residual_history": [
            [h.iter, h.primal_residual, _finite_or_none(h.rel_change),
             h.objective] for h in report.residual_history],
        "out_x": str(args.out_x),
        "out_e": str(args.out_e),
    })
    return 0


def cmd_eval(args) -> int:
    x, _ = read_volume(args.x)
    ref, _ = read_volume(args.ref)
    rep = metric_report(x, ref, peak=args.peak)
    print("volume_id,psnr_db,ssim,nrmse")
    print(rep.csv_row(Path(args.x).stem))
    return 0


def cmd_bound(args) -> int:
    inp = BoundInput(dims=args.dims, r=args.rank, s=args.sparsity,
                     beta=args.beta, c=args.c)
    if args.theorem == 2:
        res = bound_theorem2(inp)
        bound = res.bound
        inputs = {"dims": list(args.dims), "r": args.rank, "s": args.sparsity,
                  "c": args.c}
    else:
        prof = IncoherenceProfile(mu_star=args.mu_star,
                                  alpha_star=args.alpha_star,
                                  lambda_star=args.lambda_star,
                                  r_star=(args.r_star if args.r_star is not None
                                          else float(max(args.rank, 1))),
                                  d=sum(args.dims) / 3.0,
                                  d_star=min(math.prod(args.dims) ** (1 / 3),
                                             sum(args.dims) / 3.0))
        res = bound_theorem1(inp, prof)
        bound = res.bound
        inputs = {"dims": list(args.dims), "r": args.rank, "beta": args.beta,
                  "c": args.c, "mu_star": prof.mu_star,
                  "alpha_star": prof.alpha_star,
                  "lambda_star": prof.lambda_star, "r_star": prof.r_star}
    margin = (args.observed - bound) if args.observed is not None else None
    _emit({"theorem": args.theorem, "inputs": inputs, "bound": bound,
           "margin": margin})
    return 0


def cmd_phase(args) -> int:
    grid = PhaseGrid.from_json(Path(args.grid).read_text())
    config = SolverConfig(ranks=args.ranks, max_iters=args.max_iters)
    result = run_phase(grid, args.dims, args.ranks, config=config,
                       workers=args.workers)
    write_phase_csv(result.rows, args.out)
    _emit({"out": str(args.out), "rows": len(result.rows),
           "cells": len(grid.cells), "c_emp": result.c_emp})
    return 0


def cmd_rank(args) -> int:
    vol, _ = read_volume(args.infile)
    ranks = estimate_rank(vol, energy=args.energy)
    _emit({"ranks": list(ranks), "energy": args.energy})
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tucker3",
                     description="Robust Tucker completion toolkit for dense "
                                 "order-3 volumes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic phantom volume")
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--ranks", type=_dims, required=True)
    p.add_argument("--kind", choices=["lowrank", "membrane"], default="lowrank")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=["f32", "f64"], default="f64")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("mask", help="generate an observation mask")
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--law", choices=["uniform", "zslice"], required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("corrupt", help="inject sparse outliers and noise")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--sparse-frac", type=float, default=0.0)
    p.add_argument("--amp", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-y", required=True)
    p.add_argument("--out-e", required=True)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("solve", help="run the ADMM completion solver")
    p.add_argument("--y", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--ranks", type=_dims, required=True)
    p.add_argument("--lambda1", type=float, default=None)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--nonneg", action="store_true")
    p.add_argument("--trace", default=None,
                   help="write the iterate trajectory CSV here")
    p.add_argument("--out-x", required=True)
    p.add_argument("--out-e", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="PSNR/SSIM/NRMSE of a volume vs reference")
    p.add_argument("--x", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--peak", type=float, default=1.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bound", help="evaluate a recovery sample-count bound")
    p.add_argument("--theorem", type=int, choices=[1, 2], required=True)
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--sparsity", type=int, default=0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--observed", type=int, default=None)
    p.add_argument("--mu-star", type=float, default=1.0)
    p.add_argument("--alpha-star", type=float, default=1.0)
    p.add_argument("--lambda-star", type=float, default=1.0)
    p.add_argument("--r-star", type=float, default=None)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("phase", help="run the phase-transition sweep")
    p.add_argument("--grid", required=True)
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--ranks", type=_dims, required=True)
    p.add_argument("--max-iters", type=int, default=300)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("rank", help="spectral-energy rank profile of a volume")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--energy", type=float, default=0.99)
    p.set_defaults(func=cmd_rank)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TuckerError, ValueError, OSError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
