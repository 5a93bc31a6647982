"""Mini-batch SGD and Monte Carlo ensembles.

The recursion is

    theta_{i+1} = theta_i - gamma_{i+1} * (1/b_{i+1}) * sum_{j in block i+1} grad(theta_i, xi_j)

with every datum used once. Replications are advanced in lock-step in
chunks (vectorized over the replication axis), which is an implementation
detail: each replication reads its data from its own stream and every
reduction is done row-wise, so a replication's trajectory is bitwise
identical whatever the chunk size or thread count.

Data layout
-----------
Replication ``m`` draws its data from ``make_stream(seed, m, "data", s)``
for segment ``s = 0, 1, ...``; segment ``s`` holds ``min(2**(10+s), 2**16)``
data. The segment sizes do not depend on ``N``, so a run to ``2N`` extends
the run to ``N`` exactly.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import schedules as sch
from .noise import make_stream
from .problems import Problem

SEGMENT_MIN_LOG2 = 10
SEGMENT_MAX_LOG2 = 16
DEFAULT_CHUNK = 256
THREADS_ENV = "HEAVYSGD_THREADS"


def segment_size(s: int) -> int:
    return 1 << min(SEGMENT_MIN_LOG2 + s, SEGMENT_MAX_LOG2)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


class _DataReader:
    """Serves consecutive data blocks for a group of replications."""

    def __init__(self, problem, master_seed, replications):
        self.problem = problem
        self.seed = master_seed
        self.reps = list(replications)
        self.buf = np.empty((len(self.reps), 0, problem.datum_size))
        self.pos = 0
        self.segment = 0
        self.consumed = 0

    def _refill(self, need):
        parts = [self.buf[:, self.pos:]]
        have = parts[0].shape[1]
        while have < need:
            n = segment_size(self.segment)
            seg = np.stack([
                self.problem.sample_data(make_stream(self.seed, m, "data", self.segment), n)
                for m in self.reps])
            parts.append(seg)
            have += n
            self.segment += 1
        self.buf = np.concatenate(parts, axis=1)
        self.pos = 0

    def take(self, b):
        if self.pos + b > self.buf.shape[1]:
            self._refill(b)
        out = self.buf[:, self.pos:self.pos + b]
        self.pos += b
        self.consumed += b
        return out


def replay_data(problem: Problem, spec: sch.ScheduleSpec, N: int, master_seed: int,
                replication: int = 0) -> list:
    """The data blocks that replication ``replication`` consumes, as a list of
    ``N`` arrays of shape ``(b_i, k)``."""
    reader = _DataReader(problem, master_seed, [replication])
    return [reader.take(int(b))[0].copy() for b in sch.batches(spec, N)]


def minibatch_gradient(problem: Problem, theta, data=None, *, b: int | None = None, rng=None):
    """Batch-mean gradient.

    Either pass the block ``data`` (shape ``(..., b, k)``) or a batch size
    ``b`` and a generator ``rng`` to draw a fresh block.
    """
    if data is None:
        if b is None or rng is None:
            raise ValueError("need data, or both b and rng")
        data = problem.sample_data(rng, int(b))
    g = problem.grad(theta, data)  # (..., b, d)
    gt = np.ascontiguousarray(np.swapaxes(g, -1, -2))
    return gt.sum(axis=-1) / g.shape[-2]


# ---------------------------------------------------------------------------
# configuration and results
# ---------------------------------------------------------------------------

def _record_grid(record, N):
    if record in (None, "endpoint"):
        grid = [N]
    elif record == "full":
        grid = list(range(1, N + 1))
    elif isinstance(record, tuple) and record and record[0] == "every_k":
        k = int(record[1])
        if k < 1:
            raise ValueError("every_k needs k >= 1")
        grid = list(range(k, N + 1, k))
        if not grid or grid[-1] != N:
            grid.append(N)
    elif isinstance(record, (list, np.ndarray)):
        grid = sorted({int(n) for n in record})
        if not grid or grid[0] < 1 or grid[-1] > N:
            raise ValueError("record grid must lie in [1, N]")
        if grid[-1] != N:
            grid.append(N)
    else:
        raise ValueError(f"unsupported record option {record!r}")
    return np.asarray(grid, dtype=np.int64)


@dataclass
class RunConfig:
    problem: Problem
    schedule: sch.ScheduleSpec
    N: int
    theta0: np.ndarray | None = None
    record: object = "endpoint"
    master_seed: int = 0
    replication: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        d = self.problem.dim
        if self.theta0 is None:
            self.theta0 = self.problem.theta_star + 1.0
        self.theta0 = np.atleast_1d(np.asarray(self.theta0, dtype=float))
        if self.theta0.shape != (d,):
            raise ValueError(f"theta0 must have shape ({d},)")
        if not np.all(np.isfinite(self.theta0)):
            raise ValueError("theta0 must be finite")

    @property
    def record_grid(self):
        return _record_grid(self.record, self.N)


def normalizers(problem: Problem, spec: sch.ScheduleSpec, Ns):
    """``(w_N, c_N, kind)`` for each ``N`` in ``Ns``.

    Uses the tail model's exact quantile when it has one. Otherwise (stable
    noise) the power-law forms ``(b_N/gamma_N)**(1-1/alpha)`` and
    ``beta_N**(1/alpha)`` are used; with a stable driver of scale ``sigma``
    these make the iterate limit exactly SaS with scale
    ``sigma * (alpha a)**(-1/alpha)``. Without noise the result is NaN.
    """
    Ns = np.atleast_1d(np.asarray(Ns, dtype=np.int64))
    tail = problem.tail
    if tail is None:
        nan = np.full(Ns.shape, np.nan)
        return nan, nan.copy(), "none"
    alpha = tail.alpha
    if tail.has_exact_quantile:
        w = np.atleast_1d(sch.w_norm(spec, tail, Ns)).astype(float)
        c = np.array([sch.c_norm(spec, tail, int(n), check=False)[1] for n in Ns])
        return w, c, "quantile"
    w = np.atleast_1d(sch.canonical_w(spec, alpha, Ns)).astype(float)
    c = np.array([sch.canonical_c(spec, alpha, int(n)) for n in Ns])
    return w, c, "power_law"


@dataclass
class RunResult:
    theta_final: np.ndarray
    error_final: np.ndarray
    partial_sum: np.ndarray
    normalized_iterate: np.ndarray
    normalized_average: np.ndarray
    samples_consumed: int
    w_N: float
    c_N: float
    diverged: bool = False
    record_grid: np.ndarray | None = None
    errors: np.ndarray | None = None
    partial_sums: np.ndarray | None = None


# ---------------------------------------------------------------------------
# core loop
# ---------------------------------------------------------------------------

def _run_chunk(config: RunConfig, reps, grid):
    problem, spec, N = config.problem, config.schedule, config.N
    R, d = len(reps), problem.dim
    g = sch.gammas(spec, N)
    b = sch.batches(spec, N)
    reader = _DataReader(problem, config.master_seed, reps)

    theta = np.broadcast_to(config.theta0, (R, d)).copy()
    tstar = problem.theta_star
    psum = np.zeros((R, d))
    errs = np.empty((R, len(grid), d))
    sums = np.empty((R, len(grid), d))
    slot = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(N):
            gm = minibatch_gradient(problem, theta, reader.take(int(b[i])))
            theta = theta - g[i] * gm
            err = theta - tstar
            psum += err
            if slot < len(grid) and grid[slot] == i + 1:
                errs[:, slot] = err
                sums[:, slot] = psum
                slot += 1
    diverged = ~np.all(np.isfinite(theta), axis=1)
    if reader.consumed != int(b.sum()):
        raise RuntimeError("sample accounting mismatch")
    return theta, errs, sums, diverged, reader.consumed


@dataclass
class Ensemble:
    """Outcome of ``M`` replications recorded on ``grid``.

    ``errors`` / ``partial_sums`` have shape ``(M, len(grid), d)``. Diverged
    replications (non-finite final iterate) are kept in the raw arrays and
    masked out of every statistic.
    """
    config: RunConfig
    M: int
    grid: np.ndarray
    errors: np.ndarray
    partial_sums: np.ndarray
    theta_final: np.ndarray
    diverged: np.ndarray
    w: np.ndarray
    c: np.ndarray
    normalizer_kind: str
    samples_consumed: int
    wall_time: float = 0.0
    stat: object = None
    extra: dict = field(default_factory=dict)

    @property
    def n_diverged(self) -> int:
        return int(self.diverged.sum())

    @property
    def ok(self):
        return ~self.diverged

    def _col(self, N):
        if N is None:
            return len(self.grid) - 1
        hits = np.nonzero(self.grid == N)[0]
        if not len(hits):
            raise KeyError(f"N={N} was not recorded")
        return int(hits[0])

    def error_norms(self, N=None):
        return np.linalg.norm(self.errors[self.ok, self._col(N)], axis=-1)

    def error_p_moment(self, p, N=None, groups=32):
        """``(plain mean, median-of-means, standard error)`` of ``|theta_N - theta*|**p``."""
        from .analysis import median_of_means
        x = self.error_norms(N) ** p
        se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else float("nan")
        mom = median_of_means(x, groups) if x.size >= groups else float(np.median(x))
        return float(np.mean(x)), mom, se

    def normalized_iterates(self, N=None):
        j = self._col(N)
        return self.w[j] * self.errors[self.ok, j]

    def normalized_averages(self, N=None):
        j = self._col(N)
        return self.partial_sums[self.ok, j] / self.c[j]

    def collect(self, what, **kw):
        if what == "error_p_moment":
            return self.error_p_moment(**kw)
        if what == "normalized_iterates":
            return self.normalized_iterates(**kw)
        if what == "normalized_averages":
            return self.normalized_averages(**kw)
        raise ValueError(f"unknown statistic {what!r}")


def monte_carlo(config: RunConfig, M: int, collect=None, chunk: int = DEFAULT_CHUNK,
                threads: int | None = None, **collect_kw) -> Ensemble:
    """Run replications ``0 .. M-1`` of ``config`` (its ``replication`` field is ignored).

    Deterministic given ``(config.master_seed, M, config)``; ``chunk`` and
    ``threads`` only affect speed.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    t0 = time.perf_counter()
    grid = config.record_grid
    d = config.problem.dim
    chunks = [list(range(s, min(s + chunk, M))) for s in range(0, M, chunk)]
    threads = default_threads() if threads is None else max(1, int(threads))
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(lambda r: _run_chunk(config, r, grid), chunks))
    else:
        parts = [_run_chunk(config, r, grid) for r in chunks]
    theta = np.concatenate([p[0] for p in parts]).reshape(M, d)
    errs = np.concatenate([p[1] for p in parts])
    sums = np.concatenate([p[2] for p in parts])
    div = np.concatenate([p[3] for p in parts])
    w, c, kind = normalizers(config.problem, config.schedule, grid)
    ens = Ensemble(config, M, grid, errs, sums, theta, div, w, c, kind,
                   samples_consumed=int(parts[0][4]),
                   wall_time=time.perf_counter() - t0)
    if collect is not None:
        ens.stat = ens.collect(collect, **collect_kw)
    return ens


def sgd_run(config: RunConfig) -> RunResult:
    """A single trajectory: replication ``config.replication`` of the ensemble."""
    grid = config.record_grid
    theta, errs, sums, div, used = _run_chunk(config, [config.replication], grid)
    w, c, _ = normalizers(config.problem, config.schedule, grid)
    err = errs[0, -1]
    psum = sums[0, -1]
    many = len(grid) > 1
    return RunResult(
        theta_final=theta[0], error_final=err, partial_sum=psum,
        normalized_iterate=w[-1] * err, normalized_average=psum / c[-1],
        samples_consumed=used, w_N=float(w[-1]), c_N=float(c[-1]),
        diverged=bool(div[0]), record_grid=grid,
        errors=errs[0] if many else None, partial_sums=sums[0] if many else None)
