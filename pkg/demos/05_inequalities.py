"""Numerical checks of the deterministic inequalities behind the moment bound.

The p-triangle inequality |x+y|^p <= |x|^p + p <y, x^<p-1>> + 4|y|^p
depends on the norm. Componentwise signed powers pair with the l_p norm, and
then it holds on every random draw. Using them with the Euclidean norm breaks
it, and a two-dimensional counterexample is printed below. The contraction
bound is exact at t = 1/lambda_max. The recursion ratio settles as N doubles.

Run ``python demos/05_inequalities.py``; about 20 seconds.
"""
from __future__ import annotations

from heavysgd import experiments as ex
from heavysgd import lemma_oracles as lo
from heavysgd import schedules as sch
from heavysgd.noise import make_stream

x, y = [1.0, 0.01], [0.0, -1e-4]
for norm in lo.NORMS:
    r = lo.check_p_triangle(x, y, 1.5, norm)
    print(f"p-triangle, norm={norm:<15} lhs={r.lhs:.9f} rhs={r.rhs:.9f} holds={r.holds}")

viol, worst = ex.triangle_sweep(10 ** 6, make_stream(1, 0, "check"))
print(f"random sweep (l_p norm): {viol} violations in 1e6 draws, max relative excess {worst:.3e}")

r = lo.check_contraction([[1.0, 0.0], [0.0, 2.0]], 0.5, 1.0)
print(f"contraction at t = 1/lambda_max: lhs {r.lhs}, rhs {r.rhs}")

u, v, z = lo.theorem_moment_instance(sch.ScheduleSpec(0.5, 1.0, 1.0), 1.5, 0.5)
for n in (10 ** 3, 10 ** 4, 10 ** 5):
    print(f"recursion ratio sup up to N = {n:>6}: {lo.toeplitz_bound_ratio(u, v, z, n).ratio_max:.6f}")

for rho in (0.5, 0.7):
    print(f"rho = {rho}: sandwich threshold i0 = {lo.sandwich_i0(sch.ScheduleSpec(rho), 1.0, 0.05)}")
