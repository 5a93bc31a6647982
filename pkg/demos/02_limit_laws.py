"""The rescaled last iterate has a stable limit.

After multiplying by w_N = b_N / (gamma_N Q(1 - gamma_N / b_N)) the error
theta_N - theta* converges to the stationary law of an OU process driven by
alpha-stable noise. Two drivers are shown. A symmetric alpha-stable driver
gives an exact stable law, sampled directly. A Pareto driver gives a law known
only through its Levy measure, sampled with the LePage series. Each SGD
ensemble is compared with its oracle by a two-sample KS test and a few
quantiles.

Run ``python demos/02_limit_laws.py``; about a minute.
"""
from __future__ import annotations

import numpy as np

from heavysgd import analysis as an
from heavysgd import limits as lim
from heavysgd import schedules as sch
from heavysgd.engine import RunConfig, monte_carlo
from heavysgd.noise import TailModel, make_stream
from heavysgd.problems import QuadraticProblem

ALPHA, N, M, SEED = 1.5, 3000, 2000, 11
spec = sch.ScheduleSpec(0.7, 1.0, 0.3)
qs = [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99]


def compare(label, sgd, oracle):
    D, p = an.ks_two_sample(sgd, oracle)
    print(f"\n{label}: KS D = {D:.4f}, p = {p:.3f}")
    print("  quantile   sgd       oracle")
    for q, a, b in zip(qs, np.quantile(sgd, qs), np.quantile(oracle, qs)):
        print(f"  {q:>6.2f} {a:>9.4f} {b:>9.4f}")


for kind in ("stable", "pareto"):
    tail = TailModel(kind, ALPHA)
    prob = QuadraticProblem([[1.0]], [0.0], tail)
    ens = monte_carlo(RunConfig(prob, spec, N, theta0=[1.0], master_seed=SEED), M)
    x = ens.normalized_iterates()[:, 0]
    rng = make_stream(SEED, 0, "oracle")
    if kind == "stable":
        z = lim.z_infinity_stable_exact(ALPHA, 1.0, 1.0)
        compare(f"SaS driver (limit scale {z.scale:.5f})", x, z.sample(rng, M))
    else:
        meas = lim.nu_tilde(lim.pareto_measure(ALPHA), 1.0)
        compare(f"Pareto driver (tail weights {meas.c_plus:.4f} per side)", x,
                lim.lepage_sample(meas, 1000, rng, M))
