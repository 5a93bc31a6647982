"""Normalizers, quantiles and the de Bruijn approximation.

For pure Pareto noise every normalizer has a closed form. Adding a slowly
varying factor log(x)^-kappa to the tail removes it, and the quantile has to
be found numerically. The first-order de Bruijn formula then converges very
slowly. The Hill estimator recovers alpha from raw noise draws.

Run ``python demos/04_normalizers.py``; a few seconds.
"""
from __future__ import annotations

import numpy as np

from heavysgd import schedules as sch
from heavysgd.noise import TailModel, debruijn_quantile, hill_estimate, make_stream, quantile_upper, sample_scalar

spec = sch.ScheduleSpec(0.7, 1.0, 0.3)
pure = TailModel("pareto", 1.5)
slow = TailModel("pareto", 1.5, log_kappa=1.0)

print(f"{'i':>8} {'w_i pure':>12} {'(b/g)^(1/3)':>12} {'w_i log-pert.':>14}")
for i in (10, 1000, 10 ** 5):
    b, g = sch.batch(spec, i), sch.gamma(spec, i)
    print(f"{i:>8} {sch.w_norm(spec, pure, i):>12.4f} {(b / g) ** (1 / 3):>12.4f} {sch.w_norm(spec, slow, i):>14.4f}")

print("\nquantile Q(1 - 1/x) for the log-perturbed tail against its de Bruijn approximation")
for x in (1e4, 1e8, 1e16, 1e64):
    exact = quantile_upper(slow, 1 / x)
    approx = debruijn_quantile(slow, x)
    print(f"  x = {x:.0e}: exact {exact:.4e}, first order {approx:.4e}, rel. gap {approx / exact - 1:+.3f}")

z = np.abs(sample_scalar(pure, make_stream(3), 10 ** 6))
for k in (100, 1000, 10000):
    print(f"Hill estimate with k = {k:>5}: {hill_estimate(z, k):.4f} (true 1.5)")
