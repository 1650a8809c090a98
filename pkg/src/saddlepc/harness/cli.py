"""Command-line front end: ``saddlepc {gen,eig-verify,solve,sweep,ipm}``.

Exit status is 0 on success, 1 when any emitted row failed and 2 on a
usage error.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from ..analysis import verify_all
from ..augmentation import build_augmented, ensure_numerical_rank, select_weight_rows
from ..errors import IterationLimit, SaddleError
from ..ipm import mehrotra_solve
from ..sparse import SparseMatrix
from .experiment import (CsvSink, ExperimentConfig, _coerce, build_system, expand_sweep,
                         load_config, row_failed, run_experiment, run_sweep)
from .generators import RNG_NAME, GeneratorSpec, generate, generate_lp, generate_qp
from .mmio import write_matrix_market

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _base_config(args) -> dict:
    settings = load_config(args.config) if getattr(args, "config", None) else {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        settings[key] = value
    for flag in ("seed", "tol", "maxit"):
        if getattr(args, flag, None) is not None:
            settings[flag] = str(getattr(args, flag))
    return settings


def _single_config(settings: dict) -> ExperimentConfig:
    multi = [k for k, v in settings.items() if "," in str(v)]
    if multi:
        raise UsageError(f"'solve' takes one value per key; use 'sweep' for {multi}")
    return replace(ExperimentConfig(), **{k: _coerce(k, v) for k, v in settings.items()})


# ----------------------------------------------------------------- subcommands
def cmd_gen(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    note = f"{args.kind} n={args.n} m={args.m} k={args.k} rng={RNG_NAME} seed={args.seed}"
    if args.kind in ("lp", "degenerate-lp", "qp"):
        if args.kind == "qp":
            prob = generate_qp(args.n, args.m, args.seed)
        else:
            prob = generate_lp(args.n, args.m, args.seed, degenerate=args.kind == "degenerate-lp")
        mats = {"H": prob.H, "J": prob.J, "b": SparseMatrix.from_dense(prob.b[:, None]),
                "c": SparseMatrix.from_dense(prob.c[:, None])}
    else:
        sys_ = generate(GeneratorSpec(args.n, args.m, args.k, args.kind, args.bandwidth), args.seed)
        mats = {"A": sys_.A, "B": sys_.B}
    for name, M in mats.items():
        path = os.path.join(args.out, f"{name}.mtx")
        write_matrix_market(path, M, symmetric=name in ("A", "H"), comment=note)
        print(path)
    return EXIT_OK


def cmd_eig_verify(args) -> int:
    cfg = _single_config(_base_config(args))
    sys_ = build_system(cfg)
    sel = select_weight_rows(sys_.A, sys_.B)
    blk = ensure_numerical_rank(build_augmented(sys_.A, sys_.B, sel, certify=False), sys_.B)
    failed = False
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "applicable", "passed", "max_deviation", "tolerance", "details",
                    "rank_W", "rng", "seed"])
        for v in verify_all(sys_, blk.selection):
            failed |= v.applicable and not v.passed
            w.writerow([v.name, v.applicable, v.passed, f"{v.max_deviation:.3e}",
                        f"{v.tolerance:.1e}", v.details, blk.selection.rank, RNG_NAME, cfg.seed])
    return EXIT_FAILED if failed else EXIT_OK


def cmd_solve(args) -> int:
    cfg = _single_config(_base_config(args))
    row = run_experiment(cfg)
    with _output(args.out) as fh:
        CsvSink(fh).write(row)
    return EXIT_FAILED if row_failed(row) else EXIT_OK


def cmd_sweep(args) -> int:
    if not args.config:
        raise UsageError("sweep needs --config")
    configs = expand_sweep(_base_config(args))
    with _output(args.out) as fh:
        rows = run_sweep(configs, CsvSink(fh), workers=args.workers)
    return EXIT_FAILED if any(row_failed(r) for r in rows) else EXIT_OK


def cmd_ipm(args) -> int:
    if args.kind == "qp":
        prob = generate_qp(args.n, args.m, args.seed)
    else:
        prob = generate_lp(args.n, args.m, args.seed, degenerate=args.kind == "degenerate-lp")
    kwargs = {"inner": args.inner, "gap_tol": args.tol, "inner_tol": args.inner_tol}
    if args.maxit is not None:
        kwargs["maxit"] = args.maxit
    try:
        res = mehrotra_solve(prob, **kwargs)
    except IterationLimit as exc:
        res = exc.result
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["problem", "iteration", "duality_gap", "primal_infeasibility",
                    "dual_infeasibility", "leading_singular", "policy", "rank_W",
                    "inner_predictor", "inner_corrector", "step_primal", "step_dual", "sigma",
                    "converged", "rng", "seed"])
        for r in res.trace.records:
            its = [rep.iterations if rep is not None else "" for rep in (r.predictor, r.corrector)]
            w.writerow([prob.name, r.iteration, f"{r.duality_gap:.6e}",
                        f"{r.primal_infeasibility:.3e}", f"{r.dual_infeasibility:.3e}",
                        r.leading_singular, r.policy, r.rank_W, *its,
                        f"{r.step_lengths[0]:.4f}", f"{r.step_lengths[1]:.4f}", f"{r.sigma:.3e}",
                        res.converged, RNG_NAME, args.seed])
    return EXIT_OK if res.converged else EXIT_FAILED


# ----------------------------------------------------------------- parser
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="saddlepc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--maxit", type=int, default=None)
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        if config:
            sp.add_argument("--config", default=None, help="flat key = value file")
            sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                            help="override one config key")

    g = sub.add_parser("gen", help="write a seeded problem as Matrix Market files")
    g.add_argument("--kind", default="random-saddle",
                   choices=["random-saddle", "aligned-saddle", "banded-geo", "lp", "degenerate-lp", "qp"])
    g.add_argument("--n", type=int, default=40)
    g.add_argument("--m", type=int, default=10)
    g.add_argument("--k", type=int, default=0)
    g.add_argument("--bandwidth", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eig-verify", help="check the spectral theorems on one system")
    common(e)
    e.set_defaults(func=cmd_eig_verify)

    s = sub.add_parser("solve", help="run a single experiment")
    common(s)
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="run every combination listed in a config file")
    common(w)
    w.add_argument("--workers", type=int, default=1)
    w.set_defaults(func=cmd_sweep)

    i = sub.add_parser("ipm", help="interior-point run on a seeded LP or QP")
    common(i, config=False)
    i.add_argument("--kind", default="lp", choices=["lp", "degenerate-lp", "qp"])
    i.add_argument("--n", type=int, default=60)
    i.add_argument("--m", type=int, default=20)
    i.add_argument("--inner", default="direct", choices=["direct", "minres"])
    i.add_argument("--inner-tol", type=float, default=1e-7)
    i.set_defaults(func=cmd_ipm, seed=0, tol=1e-6)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"saddlepc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SaddleError as exc:
        print(f"saddlepc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
