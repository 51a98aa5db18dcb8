"""Why the explicit continuous scheme needs the step-size condition.

For the scalar problem F = 1, alpha = 1 the condition reads dt <= sqrt(1/2).
A compliant grid keeps dt * Q_k inside [0, 1]; a step four times too large
lets the backward Riccati iteration blow up. The discrete method solves the
coarse grid without complaint.

    python demos/02_cfl_instability.py
"""

import numpy as np

from dynreg.continuous import cfl_check, euler_riccati_backward, sample_problem, solve_continuous
from dynreg.core import RegConfig, TimeGrid
from dynreg.discrete import solve_discrete
from dynreg.errors import CFLViolation

alpha = 1.0
max_dt = np.sqrt(alpha / 2)
cfg = RegConfig(alpha, [0.0])


def scalar(dt, steps):
    return sample_problem(lambda t: np.ones((1, 1)), lambda t: np.ones(1),
                          TimeGrid(steps * dt, steps), cfg)


good = scalar(max_dt / 2, 32)
bad = scalar(4 * max_dt, 4)
for name, p in (("compliant", good), ("4x step", bad)):
    c = cfl_check(p.ops, p.grid, alpha)
    print(f"{name:10s} dt={p.grid.dt:.4f} pass={c.passed} margin={c.margin:+.3f}")

q_good = euler_riccati_backward(good).Q[:, 0, 0]
q_bad = euler_riccati_backward(bad, check_cfl=False).Q[:, 0, 0]
print("\ndt*Q_k, compliant (k = 0..4):", np.round(good.grid.dt * q_good[:5], 4))
print("dt*Q_k, 4x step   (k = 0..4):", bad.grid.dt * q_bad)
print(f"|Q_0| growth vs compliant: {abs(q_bad[0]) / abs(q_good[0]):.3e}")

try:
    solve_continuous(bad)
except CFLViolation as exc:
    print(f"\nsolve_continuous refuses: {exc}")
print("solve_discrete on the same grid:", solve_discrete(bad).trajectory.values[:, 0].round(4))
