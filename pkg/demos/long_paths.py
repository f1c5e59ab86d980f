"""Long k-paths: structure checks and where the closed-form lower bound breaks.

Run with ``python3 demos/long_paths.py``.
"""
from fitlevels import closed_forms as cf
from fitlevels.fitness import build_long_k_path, path_invariants
from fitlevels.markov import hitting_time_levels, longpath_level_chain

path = build_long_k_path(6, 2)
print("n=6, k=2 path:", " ".join(path.as_strings()))
print("invariants:", path_invariants(path))

# On small instances a mutation can jump far along the path. The closed-form
# lower bound does not account for those jumps and can exceed the exact time.
print("\n(n, k, p)         lower     exact     upper")
for n, k, p in [(4, 2, 0.1), (6, 3, 0.1), (8, 2, 1 / 8), (12, 3, 1 / 12), (16, 4, 1 / 16)]:
    exact = hitting_time_levels(longpath_level_chain(n, k, p))
    lower, upper = cf.longpath_lower(n, k, p), cf.longpath_upper(n, k, p)
    mark = "" if lower <= exact else "  <- lower bound too high"
    print(f"({n:2d},{k},{p:.4f})  {lower:9.2f} {exact:9.2f} {upper:9.2f}{mark}")

print("\nsqrt(n) path factor at p=1/n:",
      ", ".join(f"n={n}: {cf.longpath_corollary_factor(n, 1 / n):.6f}" for n in (100, 400)))
