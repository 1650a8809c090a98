"""Generators, Matrix Market I/O, experiment runner and command-line interface."""
from .experiment import COLUMNS, ExperimentConfig, expand_sweep, parse_config, run_experiment, run_sweep
from .generators import (GeneratorSpec, generate, generate_aligned_saddle, generate_banded_geo,
                         generate_lp, generate_qp, generate_random_saddle)
from .mmio import read_matrix_market, write_matrix_market

__all__ = ["COLUMNS", "ExperimentConfig", "GeneratorSpec", "expand_sweep", "generate",
           "generate_aligned_saddle", "generate_banded_geo", "generate_lp", "generate_qp",
           "generate_random_saddle", "parse_config", "read_matrix_market", "run_experiment",
           "run_sweep", "write_matrix_market"]
