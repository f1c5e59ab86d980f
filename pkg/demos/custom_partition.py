"""Bounds for a hand-made fitness-level partition.

A process with four levels whose improvements usually gain one level and
sometimes more. Both bounds certify, and the exact time sits between them.
Run with ``python3 demos/custom_partition.py``.
"""
from fitlevels.levels import (
    DenseGamma,
    LevelPartition,
    expected_levels_gained,
    lower_bound_viscosity,
    max_viscosity,
    min_refined_viscosity,
    refined_upper_bound,
    upper_bound_classic,
)
from fitlevels.markov import hitting_time_levels, level_chain_from_partition

gamma = DenseGamma([[0, 0.6, 0.24, 0.16],
                    [0, 0, 0.7, 0.3],
                    [0, 0, 0, 1.0],
                    [0, 0, 0, 0]])
part = LevelPartition(start=[0.5, 0.3, 0.2, 0.0], rate=[0.05, 0.08, 0.1], gamma=gamma)

chi_low, chi_up = max_viscosity(gamma), min_refined_viscosity(gamma)
print(f"largest chi for the lower bound {chi_low:.3f}, smallest for the upper bound {chi_up:.3f}")
print(f"at most {expected_levels_gained(chi_low):.3f} levels gained per improvement on average")

low = lower_bound_viscosity(part, chi_low)
up = refined_upper_bound(part, chi_up)
exact = hitting_time_levels(level_chain_from_partition(part))
print(f"\n{low.to_table()}\n\n{up.to_table()}")
print(f"\nexact {exact:.4f}; classic upper bound {upper_bound_classic(part).value:.4f}")
assert low.value <= exact <= up.value

# Asking for a stronger chi than the shares allow is reported, not hidden.
print("\nchi = 0.9:", "certified" if lower_bound_viscosity(part, 0.9).certified else "not certified")
