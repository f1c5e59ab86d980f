"""How close do the OneMax bounds get to the exact expected time?

Run with ``python3 demos/onemax_bounds.py``.
"""
import math

from fitlevels import closed_forms as cf
from fitlevels.experiments import sandwich_report

# The lower bound only becomes positive once ln n - ln ln n exceeds 3.
print(sandwich_report("onemax", 100, 1 / 100).to_text())

print("\n     n   lower/upper")
for n in (10**3, 10**4, 10**5, 10**6):
    print(f"{n:>7d}   {cf.onemax_lower(n, 1 / n) / cf.onemax_upper(n, 1 / n):.4f}")

print("\nsimplified lower bound divided by e n ln n:")
for n in (10**3, 10**6, 10**9):
    print(f"  n=1e{round(math.log10(n))}: {cf.onemax_lower_p_1_over_n(n) / (math.e * n * math.log(n)):.4f}")

# For large n, p = 1/n minimises the upper bound exactly.
print(f"\noptimal rate for n=1000: {cf.onemax_optimal_rate(1000):.6g}")
