"""Cost of the discrete solve grows linearly with the number of time steps.

Times the backward sweep and forward recursion for m = 50 unknowns and
doubling step counts, then fits the log-log slope.

    python demos/04_timing.py
"""

from dynreg.harness import ExperimentConfig, SyntheticSpec, timing_scaling_suite

cfg = ExperimentConfig(synthetic=SyntheticSpec(family="random", m=50, d=50), alpha=(1e-2,),
                       seed=3, timing_repeats=5)
table = timing_scaling_suite(cfg, (50, 100, 200, 400))
for n, s in zip(table.n_steps, table.seconds):
    print(f"n_steps={n:<5d} {s * 1e3:8.2f} ms")
print("consecutive ratios " + ", ".join(f"{r:.2f}" for r in table.ratios))
print(f"log-log slope {table.slope:.3f} (1 means linear)")
