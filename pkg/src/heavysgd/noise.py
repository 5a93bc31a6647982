"""Heavy-tailed gradient-noise models.

Two symmetric laws with tail index ``alpha`` in (1, 2) are provided:

* ``"pareto"``: ``|zeta|`` is Pareto with survival ``(x / x_m) ** -alpha``
  on ``x >= x_m`` and a uniform direction (a random sign in 1-d). An optional
  logarithmic perturbation ``log_kappa`` gives survival
  ``1 / (y * log(y) ** kappa)`` with ``y = (x / x_m) ** alpha``.
* ``"stable"``: symmetric alpha-stable with characteristic function
  ``exp(-(scale * |u|) ** alpha)``, drawn with the Chambers-Mallows-Stuck
  transform. 1-d only and without an exact quantile.

Random streams
--------------
Every random draw in the package comes from a Philox generator keyed by
``SeedSequence(master_seed, spawn_key=(replication, domain, *extra))``.
``domain`` separates independent uses (SGD data, oracle samples, ...), so a
replication's data never depends on how many other replications run or in
which order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KINDS = ("pareto", "stable")

# stream domains
DOMAINS = {
    "data": 0,
    "theta0": 1,
    "oracle": 2,
    "lepage": 3,
    "stable": 4,
    "check": 5,
}


class NoExactQuantile(ValueError):
    """The tail model has no closed-form (or numerically exact) quantile."""


@dataclass(frozen=True)
class TailModel:
    kind: str = "pareto"
    alpha: float = 1.5
    scale: float = 1.0
    log_kappa: float | None = None

    def __post_init__(self):
        kind = self.kind.lower()
        aliases = {"paretosymmetric": "pareto", "stablesymmetric": "stable", "sas": "stable"}
        kind = aliases.get(kind, kind)
        if kind not in KINDS:
            raise ValueError(f"unknown tail kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not 1 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha}")
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if self.log_kappa is not None:
            if kind != "pareto":
                raise ValueError("log_kappa is only defined for the Pareto model")
            if self.log_kappa < 0:
                raise ValueError("log_kappa must be >= 0")
            if self.log_kappa == 0:
                object.__setattr__(self, "log_kappa", None)

    @property
    def has_exact_quantile(self) -> bool:
        return self.kind == "pareto"

    @property
    def is_pure_pareto(self) -> bool:
        return self.kind == "pareto" and self.log_kappa is None


def _require_pareto(tail, what):
    if tail.kind != "pareto":
        raise NoExactQuantile(f"{what}: the {tail.kind} model has no exact quantile")


def _solve_log_perturbed(t, kappa):
    """Solve ``y * log(y)**kappa = t`` for ``y > 1`` given ``t >= 1``.

    Works with ``z = log y`` (``z + kappa log z = log t``) and bisects; the
    root lies in ``(0, max(1, log t)]``.
    """
    lt = np.log(t)
    lo = np.full_like(lt, 1e-300)
    hi = np.maximum(1.0, lt)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = mid + kappa * np.log(mid) - lt
        pos = f > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.all(hi - lo <= 4e-16 * hi):
            break
    return np.exp(0.5 * (lo + hi))


def _survival_from_y(y, kappa):
    # 1 / (y log^kappa y), capped at 1; y <= 1 is inside the support floor
    with np.errstate(divide="ignore", invalid="ignore"):
        v = y * np.log(y) ** kappa
        out = np.where(v > 1, 1.0 / np.where(v > 1, v, 1.0), 1.0)
    return out


def quantile_upper(tail: TailModel, q):
    """``F0^{-1}(1 - q)`` for an upper-tail probability ``q`` in ``(0, 1]``.

    Taking ``q`` directly avoids the cancellation in ``1 - (1 - q)`` when ``q``
    is tiny (``gamma_i / b_i`` at large ``i``).
    """
    _require_pareto(tail, "quantile")
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q > 1)):
        raise ValueError("upper-tail probability must lie in (0, 1]")
    if tail.log_kappa is None:
        out = tail.scale * q ** (-1.0 / tail.alpha)
    else:
        y = _solve_log_perturbed(np.maximum(1.0 / q, 1.0), tail.log_kappa)
        out = tail.scale * y ** (1.0 / tail.alpha)
    return float(out) if out.ndim == 0 else out


def quantile_F0(tail: TailModel, u):
    """Left-continuous inverse of the cdf of ``|zeta_0|``.

    For pure Pareto this is ``x_m * (1 - u) ** (-1/alpha)``; ``u = 0`` gives
    the support floor ``x_m``. The log-perturbed model is inverted numerically.
    """
    _require_pareto(tail, "quantile_F0")
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u >= 1)):
        raise ValueError("u must lie in [0, 1)")
    return quantile_upper(tail, 1.0 - u)


def tail_prob(tail: TailModel, x):
    """Exact survival ``P(|zeta_0| > x)``."""
    _require_pareto(tail, "tail_prob")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be > 0")
    y = np.maximum(x / tail.scale, 1.0) ** tail.alpha
    if tail.log_kappa is None:
        out = 1.0 / y
    else:
        out = _survival_from_y(y, tail.log_kappa)
    return float(out) if out.ndim == 0 else out


def debruijn_quantile(tail: TailModel, x):
    """First-order de Bruijn approximation ``x_m * (x / log(x)**kappa) ** (1/alpha)``
    of ``F0^{-1}(1 - 1/x)``."""
    kappa = tail.log_kappa or 0.0
    x = np.asarray(x, dtype=float)
    return tail.scale * (x / np.log(x) ** kappa) ** (1.0 / tail.alpha)


# ---------------------------------------------------------------------------
# streams
# ---------------------------------------------------------------------------

def _domain_id(domain):
    if isinstance(domain, str):
        try:
            return DOMAINS[domain]
        except KeyError:
            raise ValueError(f"unknown stream domain {domain!r}") from None
    return int(domain)


def derive_seed(master_seed: int, replication: int = 0, domain="data", *extra) -> np.random.SeedSequence:
    """Seed sequence for ``(master_seed, replication, domain, *extra)``."""
    if master_seed < 0 or replication < 0:
        raise ValueError("seeds and replication indices must be non-negative")
    key = (int(replication), _domain_id(domain)) + tuple(int(e) for e in extra)
    return np.random.SeedSequence(int(master_seed), spawn_key=key)


def make_stream(master_seed: int, replication: int = 0, domain="data", *extra) -> np.random.Generator:
    """Philox generator for the given key; see the module docstring."""
    return np.random.Generator(np.random.Philox(derive_seed(master_seed, replication, domain, *extra)))


def stream_fingerprint(master_seed: int, replication: int = 0, domain="data", *extra) -> str:
    """Hex form of the first 128 bits of derived state (used by ``heavysgd seeds``)."""
    words = derive_seed(master_seed, replication, domain, *extra).generate_state(4, np.uint32)
    return "".join(f"{int(w):08x}" for w in words)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _random_signs(rng, n):
    bits = np.unpackbits(np.frombuffer(rng.bytes((n + 7) // 8), dtype=np.uint8))[:n]
    return 2.0 * bits - 1.0


def _pareto_radius(tail, rng, n):
    u = 1.0 - rng.random(n)  # (0, 1]
    if tail.log_kappa is None:
        return tail.scale * u ** (-1.0 / tail.alpha)
    return quantile_upper(tail, u) if n else np.empty(0)


def _cms(alpha, sigma, rng, n):
    v = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, n)
    w = rng.standard_exponential(n)
    return (sigma * np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))


def sample_stable(alpha: float, sigma: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` symmetric alpha-stable draws with scale ``sigma`` (CMS transform)."""
    return _cms(alpha, sigma, rng, int(n))


def sample_zeta(tail: TailModel, dim: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw noise vectors.

    Returns shape ``(dim,)`` when ``size`` is None, else ``(size, dim)``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    n = 1 if size is None else int(size)
    if tail.kind == "stable":
        if dim != 1:
            raise ValueError("the stable model is unsupported for dim > 1")
        out = _cms(tail.alpha, tail.scale, rng, n)[:, None]
    else:
        radius = _pareto_radius(tail, rng, n)
        if dim == 1:
            out = (radius * _random_signs(rng, n))[:, None]
        else:
            g = rng.standard_normal((n, dim))
            out = radius[:, None] * g / np.linalg.norm(g, axis=1, keepdims=True)
    return out[0] if size is None else out


def sample_scalar(tail: TailModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """Flat array of ``n`` 1-d noise draws."""
    return sample_zeta(tail, 1, rng, n)[:, 0]


def hill_estimate(samples, k: int) -> float:
    """Hill estimator ``k / sum_{i<=k} log(X_(n-i+1) / X_(n-k))``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if k <= 0 or k >= n:
        raise ValueError(f"need 0 < k < n, got k={k}, n={n}")
    if np.any(x <= 0):
        raise ValueError("samples must be positive")
    ref = x[n - k - 1]
    s = math.fsum(np.log(x[n - k:] / ref))
    if s <= 0:
        raise ValueError("degenerate sample: zero log-spacings")
    return k / s
