"""Learning-rate and batch-size schedules and the normalizing sequences built on them.

Schedules are exact power laws::

    gamma_i = c_gamma * i ** (-rho)
    b_i     = ceil(c_batch * i ** r)

Everything here is a pure function of its arguments. Indices are 1-based
(``i = 1`` is the first SGD step) to match the usual way the recursion is
written; arrays returned by :func:`gammas` / :func:`batches` hold
``gamma_1 .. gamma_N`` at positions ``0 .. N-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .noise import TailModel, quantile_upper

PURPOSES = ("moment", "limit", "averaging")


class AssumptionError(ValueError):
    """A schedule/problem combination violates a required condition."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ScheduleSpec:
    rho: float
    c_gamma: float = 1.0
    r: float = 0.0
    c_batch: float = 1.0

    def __post_init__(self):
        if not self.c_gamma > 0:
            raise ValueError(f"c_gamma must be > 0, got {self.c_gamma}")
        if not self.c_batch >= 1:
            raise ValueError(f"c_batch must be >= 1, got {self.c_batch}")
        if not self.r >= 0:
            raise ValueError(f"r must be >= 0, got {self.r}")
        if not self.rho >= 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")

    def gamma(self, i):
        return gamma(self, i)

    def batch(self, i):
        return batch(self, i)


def _as_index(i):
    arr = np.asarray(i)
    if np.any(arr < 1):
        raise ValueError("iteration index must be >= 1")
    return arr


def gamma(spec: ScheduleSpec, i):
    """Learning rate ``c_gamma * i**(-rho)``; scalar or array ``i >= 1``."""
    arr = _as_index(i)
    out = spec.c_gamma * np.power(arr.astype(float), -spec.rho)
    return float(out) if out.ndim == 0 else out


def batch(spec: ScheduleSpec, i):
    """Batch size ``ceil(c_batch * i**r)`` as integers.

    Values within 1e-9 (relative) of an integer are snapped to it first, so
    that e.g. ``8 ** (1/3)`` gives 2 and not 3.
    """
    arr = _as_index(i)
    x = spec.c_batch * np.power(arr.astype(float), spec.r)
    near = np.rint(x)
    x = np.where(np.abs(x - near) <= 1e-9 * np.maximum(1.0, x), near, x)
    out = np.ceil(x).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def gammas(spec: ScheduleSpec, N: int) -> np.ndarray:
    return gamma(spec, np.arange(1, N + 1))


def batches(spec: ScheduleSpec, N: int) -> np.ndarray:
    return batch(spec, np.arange(1, N + 1))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class Condition:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    purpose: str
    conditions: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failed(self) -> list:
        return [c for c in self.conditions if not c.passed]

    def __getitem__(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = [f"purpose={self.purpose} ok={self.ok}"]
        for c in self.conditions:
            lines.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        lines.extend(f"  note: {n}" for n in self.notes)
        return "\n".join(lines)


def validate(spec: ScheduleSpec, alpha: float, a_min: float, a_max: float,
             purpose: str = "moment") -> ValidationReport:
    """Check a schedule against the step-size/batch conditions for ``purpose``.

    Raises ``ValueError`` for inputs outside the supported range (alpha not in
    (1, 2), rho >= 1, bad spectrum bounds, unknown purpose); returns a
    report with one entry per checked condition otherwise.

    The step-stability conditions are closed (``gamma_1 * a <= 1``): the
    contraction bound ``|||I - tA|||^p <= 1 - t a_min`` holds for every
    ``t`` in ``[0, 1/a_max]``, endpoint included, and any constant
    ``L < a_min`` also satisfies it, so ``gamma_1 L < 1`` is available
    whenever ``gamma_1 a_min <= 1``.
    """
    if purpose not in PURPOSES:
        raise ValueError(f"unknown purpose {purpose!r}; expected one of {PURPOSES}")
    if not 1 < alpha < 2:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")
    if spec.rho >= 1:
        raise ValueError(f"rho out of range: rho={spec.rho} (rho >= 1 is excluded; need 0 <= rho < 1)")
    if not 0 < a_min <= a_max:
        raise ValueError(f"need 0 < a_min <= a_max, got ({a_min}, {a_max})")

    rep = ValidationReport(purpose)
    g1 = spec.c_gamma
    rep.conditions.append(Condition(
        "sum_gamma_diverges", spec.rho <= 1, f"rho={spec.rho} <= 1"))
    rep.conditions.append(Condition(
        "gamma_over_batch_to_zero", spec.rho > 0 or spec.r > 0,
        f"rho + r = {spec.rho + spec.r} > 0"))
    rep.conditions.append(Condition(
        "step_stability", g1 * a_max <= 1.0, f"gamma_1 * a_max = {g1 * a_max:.6g} <= 1"))
    rep.conditions.append(Condition(
        "gamma1_L", g1 * a_min <= 1.0, f"gamma_1 * a_min = {g1 * a_min:.6g} <= 1 (L = a_min)"))

    if purpose == "averaging":
        ra = spec.r * (alpha - 1)
        rep.conditions.append(Condition(
            "r_alpha_condition", ra < 1, f"r(alpha-1) = {ra:.6g} < 1"))
        rep.conditions.append(Condition(
            "rho_alpha_condition", spec.rho * alpha > 1 - ra,
            f"rho*alpha = {spec.rho * alpha:.6g} > 1 - r(alpha-1) = {1 - ra:.6g}"))
        # 1/gamma_i = i**rho / c is concave in i iff rho <= 1
        rep.conditions.append(Condition(
            "inverse_gamma_concave", spec.rho <= 1, f"rho={spec.rho} <= 1"))
    if purpose in ("limit", "averaging"):
        rep.notes.append("normalizers need a tail model with an exact quantile "
                         "(or the canonical power-law normalization)")
    return rep


def require_valid(spec, alpha, a_min, a_max, purpose):
    rep = validate(spec, alpha, a_min, a_max, purpose)
    if not rep.ok:
        names = ", ".join(c.name for c in rep.failed())
        raise AssumptionError(f"schedule fails {purpose} conditions: {names}", rep)
    return rep


def assumption_monotone_tail(spec: ScheduleSpec, p: float, N: int, L: float = 1.0,
                             tail_fraction: float = 0.5, integer_batches: bool = True) -> bool:
    """Numerically check that ``(gamma_i/b_i)**(p-1) * prod_{j<=i} (1 - L gamma_j)**-1``
    is non-decreasing over the last ``tail_fraction`` of ``1..N``.

    Factors with ``L * gamma_j >= 1`` are skipped; they only shift the
    sequence by a constant. With integer batches and fractional ``r`` the
    sequence drops at every increment of ``b_i``, by roughly
    ``(p-1)/b_i`` in log scale, while it gains only ``L gamma_i`` per step,
    so the check can fail; ``integer_batches=False`` uses ``c_batch i**r``.
    """
    i = np.arange(1, N + 1)
    g = gammas(spec, N)
    b = batches(spec, N) if integer_batches else spec.c_batch * i.astype(float) ** spec.r
    lg = L * g
    log_prod = -np.cumsum(np.where(lg < 1, np.log1p(-np.minimum(lg, 0.999999)), 0.0))
    seq = (p - 1) * (np.log(g) - np.log(b)) + log_prod
    start = int(N * (1 - tail_fraction))
    return bool(np.all(np.diff(seq[start:]) >= -1e-12))


# ---------------------------------------------------------------------------
# de-batching
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockIndex:
    """Cumulative batch boundaries ``pi_0 = 0, pi_i = b_1 + ... + b_i``."""
    pi: np.ndarray

    @property
    def n(self) -> int:
        return int(self.pi[-1])

    @property
    def N(self) -> int:
        return len(self.pi) - 1

    def block(self, q: int) -> range:
        """1-based sample indices belonging to iteration ``q``."""
        return range(int(self.pi[q - 1]) + 1, int(self.pi[q]) + 1)


def block_index(spec_or_batches, N: int | None = None) -> BlockIndex:
    """Build the block boundaries from a schedule (and ``N``) or from an explicit batch list."""
    if isinstance(spec_or_batches, ScheduleSpec):
        if N is None:
            raise ValueError("N is required with a ScheduleSpec")
        b = batches(spec_or_batches, N)
    else:
        b = np.asarray(spec_or_batches, dtype=np.int64)
        if N is not None:
            b = b[:N]
    if np.any(b < 1):
        raise ValueError("batch sizes must be positive")
    pi = np.concatenate([[0], np.cumsum(b)]).astype(np.int64)
    return BlockIndex(pi)


def k_of(block: BlockIndex, j):
    """Iteration whose batch contains sample ``j``: the unique ``q`` with
    ``pi_{q-1} < j <= pi_q``."""
    arr = np.asarray(j)
    if np.any(arr < 1) or np.any(arr > block.n):
        raise ValueError(f"sample index out of range [1, {block.n}]")
    out = np.searchsorted(block.pi, arr, side="left")
    return int(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# normalizing sequences
# ---------------------------------------------------------------------------

def w_norm(spec: ScheduleSpec, tail: TailModel, i):
    """``w_i = b_i / (gamma_i * F0^{-1}(1 - gamma_i/b_i))``, with ``w_0 = 1``."""
    arr = np.asarray(i)
    if np.any(arr < 0):
        raise ValueError("index must be >= 0")
    out = np.ones(arr.shape, dtype=float)
    pos = arr >= 1
    if np.any(pos):
        ii = arr[pos]
        g = gamma(spec, ii)
        b = batch(spec, ii)
        ratio = np.asarray(g / b, dtype=float)
        if np.any(ratio > 1):
            raise ValueError("w_norm needs gamma_i / b_i <= 1")
        out[pos] = b / (g * quantile_upper(tail, ratio))
    return float(out) if out.ndim == 0 else out


def canonical_w(spec: ScheduleSpec, alpha: float, i):
    """``(b_i / gamma_i)**(1 - 1/alpha)``: the w sequence of a unit Pareto tail."""
    g = gamma(spec, i)
    b = batch(spec, i)
    return (b / g) ** (1.0 - 1.0 / alpha)


def beta_sum(spec: ScheduleSpec, alpha: float, N: int) -> float:
    b = batches(spec, N).astype(float)
    return float(math.fsum(b ** (1.0 - alpha)))


def _c_from_beta(spec, tail, alpha, N, beta):
    bN = float(batch(spec, N))
    x = beta * bN ** alpha
    return float(quantile_upper(tail, 1.0 / x)) / bN


def c_norm(spec: ScheduleSpec, tail: TailModel, N: int, alpha: float | None = None,
           check: bool = True):
    """Return ``(beta_N, c_N)`` with ``beta_N = sum b_i**(1-alpha)`` and
    ``c_N = F0^{-1}(1 - 1/(beta_N b_N**alpha)) / b_N``.

    ``alpha`` defaults to the tail index of ``tail``. With ``check`` the
    requirement ``r(alpha-1) < 1`` is enforced.
    """
    alpha = tail.alpha if alpha is None else alpha
    if check and spec.r * (alpha - 1) >= 1:
        raise ValueError(f"c_N needs r(alpha-1) < 1, got {spec.r * (alpha - 1)}")
    beta = beta_sum(spec, alpha, N)
    return beta, _c_from_beta(spec, tail, alpha, N, beta)


def canonical_c(spec: ScheduleSpec, alpha: float, N: int) -> float:
    """``beta_N ** (1/alpha)``: the c sequence of a unit Pareto tail."""
    return beta_sum(spec, alpha, N) ** (1.0 / alpha)


def diffw_ratio(spec: ScheduleSpec, tail: TailModel, i, integer_batches: bool = True):
    """``i * (w_{i+1} - w_i) / w_i``.

    With ``integer_batches=False`` the ceiling is dropped and ``b_i`` is the
    real-valued power law ``c_batch * i**r``; this is the smooth sequence the
    regularity condition is about. With integer batches the ratio jumps
    whenever ``b_i`` increments (by about ``i**(1-r) / alpha'`` for
    fractional ``r < 1``).
    """
    arr = np.asarray(i, dtype=float)
    if np.any(arr < 1):
        raise ValueError("index must be >= 1")
    if integer_batches:
        w0 = np.asarray(w_norm(spec, tail, arr.astype(np.int64)))
        w1 = np.asarray(w_norm(spec, tail, arr.astype(np.int64) + 1))
    else:
        def w(x):
            g = spec.c_gamma * x ** (-spec.rho)
            b = spec.c_batch * x ** spec.r
            return b / (g * quantile_upper(tail, g / b))
        w0, w1 = np.asarray(w(arr)), np.asarray(w(arr + 1))
    out = arr * (w1 - w0) / w0
    return float(out) if out.ndim == 0 else out


@dataclass
class NormalizerState:
    """Append-only record of ``w_0..w_N``, ``beta_N`` and ``c_N``."""
    alpha: float
    w: list = field(default_factory=lambda: [1.0])
    beta: float = 0.0
    c: float = float("nan")

    @classmethod
    def build(cls, spec: ScheduleSpec, tail: TailModel, N: int) -> "NormalizerState":
        st = cls(alpha=tail.alpha)
        st.w = [1.0] + list(np.atleast_1d(w_norm(spec, tail, np.arange(1, N + 1))))
        st.beta, st.c = c_norm(spec, tail, N, check=False)
        return st
