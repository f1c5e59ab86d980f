"""LeadingOnes end to end: closed form, exact chain, simulation, best rate.

Run with ``python3 demos/leadingones_walkthrough.py``.
"""
from fitlevels import closed_forms as cf
from fitlevels.engines import EAConfig, run_batch
from fitlevels.experiments import summarize
from fitlevels.fitness import make_oracle
from fitlevels.levels import lower_bound_viscosity, refined_upper_bound
from fitlevels.markov import full_chain, hitting_time_full

# On tiny instances the closed form can be checked against the chain over all 2^n strings.
for n in (4, 8):
    p = 1 / n
    exact = hitting_time_full(full_chain(make_oracle("leadingones", n), p))
    print(f"n={n:2d} p=1/n  closed form {cf.lo_one_plus_one_exact(n, p):10.4f}  full chain {exact:10.4f}")

# The viscosity lower bound and the refined upper bound meet on this partition.
n, p = 50, 1 / 50
part = cf.build_lo_levels(n, p)
low, up = lower_bound_viscosity(part), refined_upper_bound(part)
print(f"\nn={n}: lower {low.value:.4f} (certified {low.certified}), "
      f"upper {up.value:.4f} (certified {up.certified})")

# Monte Carlo agrees within its confidence interval.
res = run_batch(make_oracle("leadingones", n), EAConfig(n, p), 20000, seed=1)
est = summarize(res.evals, res.censored, seed=1)
print(f"simulation: {est.mean:.2f} +/- {est.half_width:.2f} (95%), exact {cf.lo_one_plus_one_exact(n, p):.2f}")

# A slightly larger rate than 1/n is better, and a better start helps a little.
for n in (100, 10**4):
    opt = cf.lo_optimal_rate(n, full=True)
    gain = 1 - opt.value / cf.lo_one_plus_one_exact(n, 1 / n)
    print(f"n={n}: best p = {opt.p * n:.4f}/n, {100 * gain:.2f}% faster than p = 1/n")
print(f"best of 20 initial strings at n=20: {cf.lo_expected_time(20, 0.05, 20):.2f} "
      f"vs {cf.lo_expected_time(20, 0.05, 1):.2f} generations")
