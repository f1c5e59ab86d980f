"""Fitness-level runtime analysis of mutation-based evolutionary algorithms.

Bit strings and mutation, benchmark functions, fast EA engines, fitness-level
bound engines, closed-form runtimes, exact Markov oracles and Monte Carlo
experiments.
"""
import warnings

# numba falls back from an outdated TBB library by itself; its notice is noise
warnings.filterwarnings("ignore", message="The TBB threading layer")

from .bitstring import BitString, InvalidRateError, RandomStream, hamming, mutate, sample_uniform
from .closed_forms import (
    build_lo_levels,
    build_longpath_levels,
    build_onemax_levels,
    evaluate,
    lo_expected_time,
    lo_init_distribution,
    lo_one_plus_one_exact,
    lo_optimal_rate,
    longpath_lower,
    longpath_upper,
    onemax_lower,
    onemax_lower_p_1_over_n,
    onemax_optimal_rate,
    onemax_transition_bound,
    onemax_transition_exact,
    onemax_upper,
    trivial_lower,
)
from .engines import (
    EAConfig,
    RunRecord,
    empirical_gamma,
    run_batch,
    run_generic,
    run_one_plus_one,
    run_one_plus_one_mu,
)
from .experiments import Campaign, domination_experiment, estimate, rate_sweep, sandwich_report
from .fitness import (
    FitnessOracle,
    LongKPath,
    build_long_k_path,
    leadingones,
    longpath_fitness,
    make_oracle,
    onemax,
)
from .levels import (
    BoundReport,
    LevelPartition,
    expected_levels_gained,
    lower_bound_capped,
    lower_bound_crude,
    lower_bound_viscosity,
    max_viscosity,
    refined_upper_bound,
    upper_bound_classic,
    upper_bound_with_adaptation,
)
from .markov import (
    LevelChain,
    full_chain,
    hitting_time_full,
    hitting_time_levels,
    longpath_level_chain,
    onemax_level_chain,
)

__version__ = "0.1.0"

__all__ = [
    "BitString",
    "BoundReport",
    "build_lo_levels",
    "build_long_k_path",
    "build_longpath_levels",
    "build_onemax_levels",
    "Campaign",
    "domination_experiment",
    "EAConfig",
    "empirical_gamma",
    "estimate",
    "evaluate",
    "expected_levels_gained",
    "FitnessOracle",
    "full_chain",
    "hamming",
    "hitting_time_full",
    "hitting_time_levels",
    "InvalidRateError",
    "leadingones",
    "LevelChain",
    "LevelPartition",
    "lo_expected_time",
    "lo_init_distribution",
    "lo_one_plus_one_exact",
    "lo_optimal_rate",
    "LongKPath",
    "longpath_fitness",
    "longpath_level_chain",
    "longpath_lower",
    "longpath_upper",
    "lower_bound_capped",
    "lower_bound_crude",
    "lower_bound_viscosity",
    "make_oracle",
    "max_viscosity",
    "mutate",
    "onemax",
    "onemax_level_chain",
    "onemax_lower",
    "onemax_lower_p_1_over_n",
    "onemax_optimal_rate",
    "onemax_transition_bound",
    "onemax_transition_exact",
    "onemax_upper",
    "RandomStream",
    "rate_sweep",
    "refined_upper_bound",
    "run_batch",
    "run_generic",
    "run_one_plus_one",
    "run_one_plus_one_mu",
    "RunRecord",
    "sample_uniform",
    "sandwich_report",
    "trivial_lower",
    "upper_bound_classic",
    "upper_bound_with_adaptation",
]

