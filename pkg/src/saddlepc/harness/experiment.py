"""Experiment runner: system -> augmentation -> preconditioner -> Krylov solve -> CSV row."""
from __future__ import annotations

import csv
import io
import itertools
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from ..augmentation import WeightSelection, build_augmented, ensure_numerical_rank, select_weight_rows
from ..errors import SaddleError
from ..krylov import DEFAULT_RESTART, DEFAULT_TOL, INNER_CG_TOL, fgmres, minres
from ..precond import IC_DROPTOL, INNER_CG_MAXIT, make_with_schur
from ..saddle import SaddleSystem
from ..schur import bfbt_operator, diagonal_schur, exact_schur, wki_operator
from .generators import RNG_NAME, GeneratorSpec, generate
from .mmio import read_matrix_market

log = logging.getLogger(__name__)

PROBLEMS = ("random-saddle", "aligned-saddle", "banded-geo", "matrix-market")
AUGMENTATIONS = ("partial", "full", "identity")
LEADINGS = ("exact", "diagonal", "ic", "inner_cg")
SCHURS = ("exact", "diag", "wki", "bfbt")
SOLVERS = ("minres", "fgmres")

COLUMNS = ("problem", "augmentation", "leading", "schur", "solver", "rank_W", "nnz_Ak", "nnz_ic",
           "iterations", "seconds_total", "seconds_per_iteration", "converged", "relres", "error",
           "rng", "seed")
TIMING_COLUMNS = ("seconds_total", "seconds_per_iteration")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "random-saddle"
    n: int = 40
    m: int = 10
    k: int = 2
    bandwidth: int = 3
    a_path: str = ""
    b_path: str = ""
    augmentation: str = "partial"
    rho: float = 1.0
    leading: str = "exact"
    droptol: float = IC_DROPTOL
    inner_tol: float = INNER_CG_TOL
    inner_maxit: int = INNER_CG_MAXIT
    split: int = -1
    schur: str = "exact"
    beta: float = 1e-3
    solver: str = "minres"
    restart: int = DEFAULT_RESTART
    tol: float = DEFAULT_TOL
    maxit: int = 1000
    seed: int = 0

    def __post_init__(self):
        for name, allowed in (("problem", PROBLEMS), ("augmentation", AUGMENTATIONS),
                              ("leading", LEADINGS), ("schur", SCHURS), ("solver", SOLVERS)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.leading == "inner_cg" and self.solver != "fgmres":
            raise ValueError("an inner-CG leading solver is flexible and needs solver=fgmres")
        for name in ("tol", "inner_tol", "rho", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.droptol < 0:
            raise ValueError("droptol must be nonnegative")
        if self.maxit < 1 or self.restart < 1 or self.inner_maxit < 1:
            raise ValueError("iteration limits must be positive")
        if self.problem == "matrix-market" and not (self.a_path and self.b_path):
            raise ValueError("matrix-market problems need a_path and b_path")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def label(self) -> str:
        if self.problem == "matrix-market":
            return f"mm:{self.a_path}"
        if self.problem == "banded-geo":
            return f"banded-geo n={self.n} m={self.m} bw={self.bandwidth}"
        return f"{self.problem} n={self.n} m={self.m} k={self.k}"


# ----------------------------------------------------------------- config files
def _coerce(name: str, text: str):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in types:
        raise ValueError(f"unknown configuration key {name!r}")
    kind = types[name]
    if kind in ("int", int):
        return int(text)
    if kind in ("float", float):
        return float(text)
    return text


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment.  Values stay strings."""
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def expand_sweep(settings: dict, base: ExperimentConfig | None = None) -> list:
    """Cartesian product over comma-separated values, in file order."""
    base = base or ExperimentConfig()
    keys = list(settings)
    choices = [[v.strip() for v in str(settings[k]).split(",") if v.strip()] for k in keys]
    configs = []
    for combo in itertools.product(*choices):
        configs.append(replace(base, **{k: _coerce(k, v) for k, v in zip(keys, combo)}))
    return configs


# ----------------------------------------------------------------- pipeline
def build_system(cfg: ExperimentConfig) -> SaddleSystem:
    if cfg.problem == "matrix-market":
        return SaddleSystem(read_matrix_market(cfg.a_path), read_matrix_market(cfg.b_path))
    kind = "banded-geo" if cfg.problem == "banded-geo" else cfg.problem
    k = cfg.m if kind == "aligned-saddle" else (0 if kind == "banded-geo" else cfg.k)
    return generate(GeneratorSpec(cfg.n, cfg.m, k, kind, cfg.bandwidth), cfg.seed)


def build_block(cfg: ExperimentConfig, sys: SaddleSystem):
    if cfg.augmentation == "identity":
        return build_augmented(sys.A, sys.B, WeightSelection.identity(cfg.rho))
    if cfg.augmentation == "full":
        return build_augmented(sys.A, sys.B, WeightSelection.full(sys.m))
    sel = select_weight_rows(sys.A, sys.B)
    return ensure_numerical_rank(build_augmented(sys.A, sys.B, sel, certify=False), sys.B)


def build_schur(cfg: ExperimentConfig, sys: SaddleSystem, blk):
    if cfg.schur == "exact":
        return exact_schur(blk, sys.B)
    if cfg.schur == "diag":
        return diagonal_schur(blk.Ak.diagonal(), sys.B)
    if cfg.schur == "wki":
        return wki_operator(blk.selection, cfg.beta, sys.m)
    return bfbt_operator(sys.A, sys.B, blk.selection)


def _default_split(cfg: ExperimentConfig, sys: SaddleSystem):
    """Banded-geo systems split at the field/model boundary."""
    if cfg.split >= 0:
        return cfg.split
    return sys.m if cfg.problem == "banded-geo" else None


def rhs_for(cfg: ExperimentConfig, sys: SaddleSystem) -> np.ndarray:
    """b = K x* with a seeded x*, so the exact solution is known."""
    rng = np.random.default_rng([cfg.seed, 1])
    return sys.matvec(rng.standard_normal(sys.size))


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run one configuration; failures at any stage produce a row with ``error`` set."""
    row = dict.fromkeys(COLUMNS, "")
    row.update(problem=cfg.label, augmentation=cfg.augmentation, leading=cfg.leading,
               schur=cfg.schur, solver=cfg.solver, rng=RNG_NAME, seed=cfg.seed, converged=False)
    t0 = time.perf_counter()
    stage = "system"
    try:
        sys = build_system(cfg)
        stage = "augmentation"
        blk = build_block(cfg, sys)
        # identity augmentation uses W = rho*I, which has full rank
        row["rank_W"] = sys.m if blk.selection.kind == "identity" else blk.selection.rank
        row["nnz_Ak"] = blk.Ak.nnz
        stage = "preconditioner"
        schur = build_schur(cfg, sys, blk)
        opts = {}
        if cfg.leading == "ic":
            opts["droptol"] = cfg.droptol
        elif cfg.leading == "inner_cg":
            opts.update(inner_tol=cfg.inner_tol, inner_maxit=cfg.inner_maxit,
                        split=_default_split(cfg, sys))
        P = make_with_schur(blk, cfg.leading, schur, **opts)
        if cfg.leading == "ic":
            row["nnz_ic"] = P.leading.factor.nnz
        stage = "solve"
        b = rhs_for(cfg, sys)
        if cfg.solver == "minres":
            rep = minres(sys.matvec, P, b, tol=cfg.tol, maxit=cfg.maxit)
        else:
            rep = fgmres(sys.matvec, P, b, tol=cfg.tol, restart=cfg.restart, maxit=cfg.maxit)
        row.update(iterations=rep.iterations, converged=bool(rep.converged),
                   relres=f"{rep.true_relative_residual:.3e}",
                   seconds_per_iteration=f"{rep.seconds_per_iteration:.6g}")
        if not rep.converged:
            row["error"] = f"solve: {rep.status}"
    except (SaddleError, ValueError, ArithmeticError, OSError) as exc:
        log.warning("%s failed at stage %s: %s", cfg.label, stage, exc)
        row["error"] = f"{stage}: {type(exc).__name__}: {exc}"
    row["seconds_total"] = f"{time.perf_counter() - t0:.6g}"
    return row


def row_failed(row: dict) -> bool:
    return bool(row["error"])


class CsvSink:
    """Serialized CSV writer; the header is written on construction."""

    def __init__(self, fh):
        self._lock = threading.Lock()
        self._writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        self._writer.writeheader()

    def write(self, row: dict):
        with self._lock:
            self._writer.writerow(row)


def run_sweep(configs, sink: CsvSink | None = None, workers: int = 1) -> list:
    """Run configurations, optionally in worker threads; rows keep input order."""
    configs = list(configs)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_experiment, configs))
    else:
        rows = [run_experiment(c) for c in configs]
    if sink is not None:
        for r in rows:
            sink.write(r)
    return rows


def rows_to_csv(rows, drop_timing: bool = False) -> str:
    buf = io.StringIO()
    cols = [c for c in COLUMNS if not (drop_timing and c in TIMING_COLUMNS)]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
