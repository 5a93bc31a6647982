"""Executable versions of the technical inequalities behind the moment bound
and the limit theorems.

Checkers return both sides of each inequality so that tests can assert the
inequality itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import schedules as sch
from .limits import products_1d

NORMS = ("lp", "euclidean", "euclidean_grad")


def signed_power(v, q):
    """Componentwise ``sign(v) |v|**q`` (``0`` maps to ``0``, also for ``q = 0``)."""
    if q < 0:
        raise ValueError("q must be >= 0")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.abs(v) ** q


@dataclass(frozen=True)
class Inequality:
    lhs: object
    rhs: object

    @property
    def holds(self):
        return bool(np.all(self.lhs <= self.rhs))

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.holds))


def check_p_triangle(x, y, p, norm: str = "lp", rtol: float = 0.0) -> Inequality:
    """Both sides of ``|x + y|**p <= |x|**p + 4 |y|**p + p y.x^<p-1>``.

    ``x`` and ``y`` may be batches of shape ``(..., d)``; ``p`` broadcasts
    over the batch. ``norm`` selects the norm and cross term:

    * ``"lp"`` (default): the l_p norm with index ``p`` and the componentwise
      signed power. This is the pairing under which the inequality holds in
      every dimension; at ``p = 2`` it is the Euclidean norm.
    * ``"euclidean"``: Euclidean norm with the componentwise signed power.
      This pairing fails for some inputs when ``d >= 2`` (see the tests).
    * ``"euclidean_grad"``: Euclidean norm with cross term
      ``|x|**(p-2) y.x``, the gradient of ``|x|**p``.

    ``rtol`` inflates the right side by ``1 + rtol`` for floating-point slack.
    """
    if norm not in NORMS:
        raise ValueError(f"norm must be one of {NORMS}")
    p = np.asarray(p, dtype=float)
    if np.any((p < 1) | (p > 2)):
        raise ValueError("p must lie in [1, 2]")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pe = p[..., None] if p.ndim else p

    if norm == "lp":
        def nrm(v):
            return np.sum(np.abs(v) ** pe, axis=-1) ** (1.0 / p)
    else:
        def nrm(v):
            return np.sqrt(np.sum(v * v, axis=-1))

    if norm == "euclidean_grad":
        nx = nrm(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(nx > 0, nx ** (p - 2), 0.0)
        cross = scale * np.sum(y * x, axis=-1)
    else:
        cross = np.sum(y * np.sign(x) * np.abs(x) ** (pe - 1), axis=-1)
    lhs = nrm(x + y) ** p
    rhs = nrm(x) ** p + 4 * nrm(y) ** p + p * cross
    return Inequality(lhs, rhs * (1 + rtol) if rtol else rhs)


def check_contraction(A, t, p) -> Inequality:
    """Both sides of ``|||I - tA|||**p <= 1 - t lambda_min(A)`` for SPD ``A``
    and ``t`` in ``[0, 1/lambda_max]`` (spectral norm)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
        raise ValueError("A must be symmetric")
    ev = np.linalg.eigvalsh(A)
    if ev[0] <= 0:
        raise ValueError("A must be positive definite")
    if p < 1:
        raise ValueError("p must be >= 1")
    if not 0 <= t <= 1.0 / ev[-1] * (1 + 1e-12):
        raise ValueError("t must lie in [0, 1/lambda_max]")
    lhs = float(np.max(np.abs(1.0 - t * ev))) ** p
    rhs = 1.0 - t * ev[0]
    return Inequality(lhs, rhs)


# ---------------------------------------------------------------------------
# Toeplitz-type recursion bound
# ---------------------------------------------------------------------------

def _seq(s, n):
    """Evaluate a sequence given as a callable of 1-based indices or an array."""
    idx = np.arange(1, n + 1)
    if callable(s):
        return np.broadcast_to(np.asarray(s(idx), dtype=float), (n,)).astype(float)
    arr = np.asarray(s, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.size < n:
        raise ValueError("sequence shorter than N")
    return arr[:n]


@dataclass
class ToeplitzReport:
    ratio_max: float
    ratios: np.ndarray
    w_nondecreasing: bool
    deltaw_max: float

    @property
    def hypotheses_ok(self):
        return self.w_nondecreasing and np.isfinite(self.deltaw_max)


def _hypotheses(u, v, tail_fraction=0.5):
    n = u.size
    start = int(n * (1 - tail_fraction))
    logw = np.log(u) - np.cumsum(np.log(v))
    nondec = bool(np.all(np.diff(logw[start:]) >= -1e-12 * np.maximum(1.0, np.abs(logw[start + 1:]))))
    return nondec, start


def toeplitz_bound_ratio(u, v, z, N: int) -> ToeplitzReport:
    """``max_{n<=N} S_n / u_n`` with ``S_n = sum_{i<=n} z_i u_i prod_{j=i+1}^n v_j``.

    ``S_n = v_n S_{n-1} + z_n u_n`` is iterated directly. The report also
    carries the lemma's two hypotheses evaluated on the second half of
    ``1..N``: ``w_n = u_n / prod_{i<=n} v_i`` non-decreasing, and
    ``max z_n u_n / (u_n - u_{n-1} v_n)`` (``inf`` if a denominator is not
    positive).
    """
    uu, vv, zz = _seq(u, N), _seq(v, N), _seq(z, N)
    if np.any(uu <= 0) or np.any(vv <= 0) or np.any(vv > 1) or np.any(zz < 0):
        raise ValueError("need u > 0, v in (0, 1], z >= 0")
    S = np.empty(N)
    acc = 0.0
    for n, (un, vn, zn) in enumerate(zip(uu.tolist(), vv.tolist(), zz.tolist())):
        acc = vn * acc + zn * un
        S[n] = acc
    ratios = S / uu
    nondec, start = _hypotheses(uu, vv)
    s = max(start, 1)
    den = uu[s:] - uu[s - 1:-1] * vv[s:]
    num = zz[s:] * uu[s:]
    if np.any(den <= 0) and np.any(num[den <= 0] > 0):
        dmax = float("inf")
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        dmax = float(r.max()) if r.size else 0.0
    return ToeplitzReport(float(ratios.max()), ratios, nondec, dmax)


@dataclass
class RecursionReport:
    hypotheses_ok: bool
    bounded: bool | None
    sup_N: float
    sup_2N: float
    growth: float


def recursion_bound_check(delta0, v, z, u, N: int, growth_tol: float = 0.02) -> RecursionReport:
    """Iterate ``delta_{i+1} = v_{i+1} delta_i + z_{i+1} u_{i+1}`` (the extremal
    case of the recursive inequality) to ``N`` and ``2N``.

    ``bounded`` compares ``sup_{n<=2N} delta_n/u_n`` with
    ``sup_{n<=N} delta_n/u_n`` (relative growth below ``growth_tol``). When the
    hypotheses fail the verdict is ``None``.
    """
    M = 2 * N
    uu, vv, zz = _seq(u, M), _seq(v, M), _seq(z, M)
    nondec, _ = _hypotheses(uu[:N], vv[:N])
    rep = toeplitz_bound_ratio(uu, vv, zz, M)
    hyp = nondec and np.isfinite(rep.deltaw_max)
    d = float(delta0)
    ratios = np.empty(M)
    for n, (un, vn, zn) in enumerate(zip(uu.tolist(), vv.tolist(), zz.tolist())):
        d = vn * d + zn * un
        ratios[n] = d / un
    sN, s2N = float(ratios[:N].max()), float(ratios.max())
    growth = s2N / sN - 1.0 if sN > 0 else (0.0 if s2N == 0 else float("inf"))
    if not hyp:
        return RecursionReport(False, None, sN, s2N, growth)
    return RecursionReport(True, growth < growth_tol, sN, s2N, growth)


def theorem_moment_instance(spec: sch.ScheduleSpec, p: float, L: float):
    """``(u, v, z)`` of the moment recursion: ``u_i = (gamma_i/b_i)**(p-1)``,
    ``v_i = 1 - L gamma_i``, ``z_i = gamma_i`` (as callables of ``i``)."""
    return (lambda i: (sch.gamma(spec, i) / sch.batch(spec, i)) ** (p - 1),
            lambda i: 1.0 - L * sch.gamma(spec, i),
            lambda i: sch.gamma(spec, i))


# ---------------------------------------------------------------------------
# uniform bounds on G_{N,i}
# ---------------------------------------------------------------------------

def sandwich_i0(spec: sch.ScheduleSpec, sigma: float, eps: float, i_max: int = 10 ** 9) -> int:
    """Smallest ``i`` with ``1/gamma_{i+1} - 1/gamma_i <= sigma eps / (1 + eps)``.

    The increments of ``1/gamma_i`` are non-increasing (concavity), so the
    condition then holds for all later ``i``.
    """
    target = sigma * eps / (1 + eps)

    def inc(i):
        return 1.0 / sch.gamma(spec, i + 1) - 1.0 / sch.gamma(spec, i)

    if inc(1) <= target:
        return 1
    lo, hi = 1, 2
    while inc(hi) > target:
        lo, hi = hi, 2 * hi
        if hi > i_max:
            raise ValueError("i0 exceeds i_max")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if inc(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass
class SandwichReport:
    eps: float
    i0: int
    T: float
    upper_max: float
    lower_min: float
    upper_holds: bool
    lower_holds: bool

    @property
    def holds(self):
        return self.upper_holds and self.lower_holds


def g_sandwich_check(spec: sch.ScheduleSpec, a: float, N_grid, eps: float = 0.05,
                     T_max: float = 1024.0) -> SandwichReport:
    """Check ``(1 - eps)/a <= G_{N,i} <= (1 + eps)/a`` in 1-d on a grid of ``N``.

    The upper bound is checked for ``i0 <= i <= N`` with ``i0`` from
    :func:`sandwich_i0`; the lower bound for ``i <= N - T/gamma_N`` with
    ``T`` the first of ``1, 2, 4, ...`` that works for every ``N`` in the grid.
    ``upper_max`` / ``lower_min`` are ``a G`` extremes over the checked ranges.
    """
    i0 = sandwich_i0(spec, a, eps)
    Gs = {}
    up = -np.inf
    for N in N_grid:
        N = int(N)
        _, G = products_1d(spec, a, N)
        Gs[N] = G
        if N >= i0:
            up = max(up, float((a * G[i0 - 1:]).max()))
    T = 1.0
    while True:
        low = np.inf
        for N, G in Gs.items():
            K = int(np.floor(N - T / sch.gamma(spec, N)))
            if K >= 1:
                low = min(low, float((a * G[:K]).min()))
        if low >= 1 - eps or T >= T_max:
            break
        T *= 2
    return SandwichReport(eps, i0, T, up, low, bool(up <= 1 + eps), bool(low >= 1 - eps))
