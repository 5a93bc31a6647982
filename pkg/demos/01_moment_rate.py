"""How fast does the p-th moment of the SGD error shrink?

Quadratic loss in one dimension with symmetric Pareto(alpha = 1.5) gradient
noise. The step sizes decay like i^-0.7 and the batches grow like sqrt(i).
For p < alpha the moment E|theta_N - theta*|^p is finite even though the noise
has infinite variance. Plotted against gamma_N / b_N it falls with slope
p (1 - 1/alpha), which beats the cruder exponent p - 1.

Run ``python demos/01_moment_rate.py``; about 30 seconds.
"""
from __future__ import annotations

import numpy as np

from heavysgd import analysis as an
from heavysgd import schedules as sch
from heavysgd.engine import RunConfig, monte_carlo
from heavysgd.noise import TailModel
from heavysgd.problems import QuadraticProblem

ALPHA, P = 1.5, 1.2
GRID = [250, 500, 1000, 2000, 4000]

problem = QuadraticProblem([[1.0]], [0.0], TailModel("pareto", ALPHA))
spec = sch.ScheduleSpec(rho=0.7, c_gamma=1.0, r=0.5, c_batch=1.0)
print(sch.validate(spec, ALPHA, 1.0, 1.0, "moment").summary())

ens = monte_carlo(RunConfig(problem, spec, GRID[-1], theta0=[1.0], master_seed=7, record=GRID), 1000)

print(f"\n{'N':>6} {'gamma/b':>10} {'mean':>10} {'MoM':>10} {'MoM/(g/b)^(p-1)':>16}")
pts = []
for N in GRID:
    gb = sch.gamma(spec, N) / sch.batch(spec, N)
    mean, mom, _ = ens.error_p_moment(P, N)
    pts.append((gb, mom))
    print(f"{N:>6} {gb:>10.3e} {mean:>10.4e} {mom:>10.4e} {mom / gb ** (P - 1):>16.4f}")

fit = an.fit_rate(pts)
print(f"\nfitted slope {fit.slope:.3f}; p(1-1/alpha) = {P * (1 - 1 / ALPHA):.3f}, p-1 = {P - 1:.3f}")
# the plain mean is noisy because |error|^p has tail index alpha/p < 2;
# median-of-means over 32 groups is the stable summary
