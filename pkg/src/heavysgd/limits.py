"""One-dimensional stable limit laws and the quantities used to derive them.

Measures are described by their tail weights: ``nu((x, inf)) = c_plus x**-alpha``
and ``nu((-inf, -x)) = c_minus x**-alpha``. The noise convention is
``nu(|x| > 1) = 1`` with ``c_plus = c_minus = 1/2`` (unit Pareto noise). The
stationary law of the driven OU process then has weights
``c / (alpha a)`` and the averaged limit has weights ``c * a**-alpha``.

Two independent ways of producing limit-law samples are implemented:

* a LePage series (from the measure alone) with a Gaussian correction for
  the truncated remainder;
* for an alpha-stable driver, the exact stationary OU law, either directly
  (CMS) or through a discretized OU sum that is exact for any step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from . import schedules as sch
from .noise import TailModel, quantile_upper, sample_stable, tail_prob


class QuadratureError(RuntimeError):
    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


@dataclass(frozen=True)
class ExponentMeasure1D:
    alpha: float
    c_plus: float = 0.5
    c_minus: float = 0.5

    def __post_init__(self):
        if not 1 < self.alpha < 2:
            raise ValueError("alpha must lie in (1, 2)")
        if self.c_plus < 0 or self.c_minus < 0 or self.c_plus + self.c_minus <= 0:
            raise ValueError("need c_plus, c_minus >= 0 with positive sum")

    @property
    def total(self):
        return self.c_plus + self.c_minus

    @property
    def symmetric(self):
        return self.c_plus == self.c_minus

    def tail_plus(self, x):
        return self.c_plus * np.power(x, -self.alpha)

    def tail_minus(self, x):
        return self.c_minus * np.power(x, -self.alpha)

    def mass_outside(self, s):
        """``nu({|x| > s})``."""
        return self.total * np.power(s, -self.alpha)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        c = np.where(x > 0, self.c_plus, self.c_minus)
        return self.alpha * c * np.abs(x) ** (-self.alpha - 1)

    def scaled(self, factor):
        return ExponentMeasure1D(self.alpha, self.c_plus * factor, self.c_minus * factor)


def pareto_measure(alpha: float) -> ExponentMeasure1D:
    """The exponent measure of symmetric unit Pareto noise."""
    return ExponentMeasure1D(alpha, 0.5, 0.5)


def nu_tilde(measure: ExponentMeasure1D, a: float) -> ExponentMeasure1D:
    """``int_0^inf nu(e^{ta} .) dt``: weights ``c / (alpha a)``."""
    if not a > 0:
        raise ValueError("a must be > 0")
    return measure.scaled(1.0 / (measure.alpha * a))


def nu_bar(measure: ExponentMeasure1D, a: float) -> ExponentMeasure1D:
    """``nu(a .)``: weights ``c a**-alpha``."""
    if not a > 0:
        raise ValueError("a must be > 0")
    return measure.scaled(a ** (-measure.alpha))


def _r1(alpha):
    # int_0^inf (cos y - 1) alpha y^{-alpha-1} dy
    return alpha * special.gamma(-alpha) * math.cos(math.pi * alpha / 2)


def _j1(alpha):
    # int_0^inf (sin y - y) alpha y^{-alpha-1} dy (negative: sin y <= y)
    return -alpha * special.gamma(-alpha) * math.sin(math.pi * alpha / 2)


def stable_scale(measure: ExponentMeasure1D) -> float:
    """Scale ``sigma`` with ``|CF(u)| = exp(-(sigma |u|)**alpha)`` for the law of ``measure``."""
    return (-measure.total * _r1(measure.alpha)) ** (1.0 / measure.alpha)


def measure_of_stable(alpha: float, sigma: float = 1.0) -> ExponentMeasure1D:
    """Symmetric measure whose compensated law is SaS with scale ``sigma``."""
    k = sigma ** alpha / -_r1(alpha)
    return ExponentMeasure1D(alpha, k / 2, k / 2)


@dataclass(frozen=True)
class StableLaw1D:
    measure: ExponentMeasure1D

    def cf(self, u):
        return cf_from_measure(self.measure, u)

    def sample(self, rng, n, terms=1000):
        return lepage_sample(self.measure, terms, rng, n)

    @property
    def scale(self):
        return stable_scale(self.measure)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def lepage_sample(measure: ExponentMeasure1D, terms: int, rng: np.random.Generator,
                  size: int | None = None, block: int = 8192):
    """Draws from the zero-mean law with Levy measure ``measure`` (symmetric only).

    ``X = K**(1/alpha) * (sum_{i<=M} eps_i G_i**(-1/alpha) + R)`` with
    ``K = c_plus + c_minus``, ``G_i`` unit-rate Poisson arrivals and
    Rademacher ``eps_i``. Given ``G_M`` the remainder has mean zero and
    variance ``G_M**(1-2/alpha) / (2/alpha - 1)``. ``R`` is drawn as a
    normal with that variance, which removes the leading truncation error.
    Without it the Kolmogorov error at ``M = 1000`` is of order 1e-3.
    """
    if not measure.symmetric:
        raise ValueError("lepage_sample supports symmetric measures only")
    if terms < 1000:
        raise ValueError("use at least 1000 series terms")
    n = 1 if size is None else int(size)
    a = measure.alpha
    out = np.empty(n)
    for s in range(0, n, block):
        m = min(block, n - s)
        gam = np.cumsum(rng.standard_exponential((m, terms)), axis=1)
        bits = np.unpackbits(np.frombuffer(rng.bytes((m * terms + 7) // 8), dtype=np.uint8))
        eps = (2.0 * bits[: m * terms] - 1.0).reshape(m, terms)
        head = np.sum(eps * gam ** (-1.0 / a), axis=1)
        last = gam[:, -1]
        var = last ** (1.0 - 2.0 / a) / (2.0 / a - 1.0)
        out[s:s + m] = head + np.sqrt(var) * rng.standard_normal(m)
    out *= measure.total ** (1.0 / a)
    return out[0] if size is None else out


@dataclass(frozen=True)
class ZInfinitySampler:
    """Exact stationary law of the OU process ``dZ = -a Z dt + dL`` driven by SaS(sigma) ``L``."""
    alpha: float
    sigma: float
    a: float

    @property
    def scale(self):
        return self.sigma * (self.alpha * self.a) ** (-1.0 / self.alpha)

    def sample(self, rng, n):
        return sample_stable(self.alpha, self.scale, rng, n)

    def sample_ou(self, rng, n, delta=0.1, horizon=4.0):
        """Discretized form ``sum_{k<K} e^{-a k delta} S_k + T_K``.

        ``S_k`` are SaS increments of scale ``sigma ((1 - e^{-alpha a delta})/(alpha a))**(1/alpha)``
        and ``T_K`` collects all terms ``k >= K`` in one SaS draw of scale
        ``sigma (e^{-alpha a K delta}/(alpha a))**(1/alpha)``. Both pieces
        follow from stability, so the result is exact for any ``delta``.
        """
        al, a = self.alpha, self.a
        K = max(1, int(math.ceil(horizon / (a * delta))))
        inc = self.sigma * ((1.0 - math.exp(-al * a * delta)) / (al * a)) ** (1.0 / al)
        out = np.zeros(n)
        for k in range(K):
            out += math.exp(-a * k * delta) * sample_stable(al, inc, rng, n)
        rest = self.sigma * (math.exp(-al * a * K * delta) / (al * a)) ** (1.0 / al)
        out += sample_stable(al, rest, rng, n)
        return out

    def law(self) -> StableLaw1D:
        return StableLaw1D(measure_of_stable(self.alpha, self.scale))


def z_infinity_stable_exact(alpha: float, sigma: float, a: float) -> ZInfinitySampler:
    if not 1 < alpha < 2 or not sigma > 0 or not a > 0:
        raise ValueError("need alpha in (1, 2), sigma > 0, a > 0")
    return ZInfinitySampler(alpha, sigma, a)


# ---------------------------------------------------------------------------
# characteristic function
# ---------------------------------------------------------------------------

_SERIES_CUT = 1e-3


def _unit_integral(alpha, tol):
    """``int_0^inf (e^{iy} - 1 - iy) alpha y^{-alpha-1} dy`` split as
    series on ``(0, 1e-3)``, plain quadrature on ``(1e-3, 1)`` and Fourier
    quadrature on ``(1, inf)`` with the ``-1`` and ``-iy`` parts integrated
    analytically."""
    e = _SERIES_CUT
    # (cos y - 1) = sum_{k>=1} (-1)^k y^{2k}/(2k)!,  (sin y - y) = sum_{k>=1} (-1)^k y^{2k+1}/(2k+1)!
    re_s = sum((-1) ** k / math.factorial(2 * k) * alpha * e ** (2 * k - alpha) / (2 * k - alpha)
               for k in range(1, 5))
    im_s = sum((-1) ** k / math.factorial(2 * k + 1) * alpha * e ** (2 * k + 1 - alpha) / (2 * k + 1 - alpha)
               for k in range(1, 5))

    def dens(y):
        return alpha * y ** (-alpha - 1)

    re_m, er1 = integrate.quad(lambda y: (math.cos(y) - 1.0) * dens(y), e, 1.0, epsabs=tol / 10, epsrel=1e-13, limit=200)
    im_m, er2 = integrate.quad(lambda y: (math.sin(y) - y) * dens(y), e, 1.0, epsabs=tol / 10, epsrel=1e-13, limit=200)
    re_t, er3 = integrate.quad(dens, 1.0, np.inf, weight="cos", wvar=1.0, epsabs=tol / 10, limlst=200)
    im_t, er4 = integrate.quad(dens, 1.0, np.inf, weight="sin", wvar=1.0, epsabs=tol / 10, limlst=200)
    re = re_s + re_m + re_t - 1.0
    im = im_s + im_m + im_t - alpha / (alpha - 1.0)
    return complex(re, im), er1 + er2 + er3 + er4


def cf_from_measure(measure: ExponentMeasure1D, u, tol: float = 1e-8):
    """``exp(int (e^{iux} - 1 - iux) nu(dx))`` evaluated by quadrature.

    The integral over ``x > 0`` is computed at ``u = 1`` and carried to
    other ``u`` by homogeneity, ``I(u) = |u|**alpha I(1)`` for ``u > 0`` and
    the conjugate for ``u < 0``. The negative half-line contributes the
    conjugate with weight ``c_minus``. Raises :class:`QuadratureError` when
    the error estimate exceeds ``tol``.
    """
    us = np.atleast_1d(np.asarray(u, dtype=float))
    I1, err = _unit_integral(measure.alpha, tol)
    if not err <= tol:
        raise QuadratureError("cf quadrature did not converge", err)
    out = np.ones(us.shape, dtype=complex)
    for k, uk in enumerate(us):
        if uk == 0:
            continue
        I = I1 if uk > 0 else I1.conjugate()
        log_cf = abs(uk) ** measure.alpha * (measure.c_plus * I + measure.c_minus * I.conjugate())
        out[k] = np.exp(log_cf)
    return out[0] if np.ndim(u) == 0 else out


def cf_closed_form(measure: ExponentMeasure1D, u):
    """Closed-form counterpart of :func:`cf_from_measure` via Gamma-function integrals."""
    us = np.asarray(u, dtype=float)
    al = measure.alpha
    I1 = complex(_r1(al), _j1(al))
    sgn = np.sign(us)
    val = np.abs(us) ** al * (measure.total * I1.real + 1j * sgn * (measure.c_plus - measure.c_minus) * I1.imag)
    return np.exp(val)


# ---------------------------------------------------------------------------
# drift identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DriftResult:
    first_term: float
    double_integral: float
    gamma_tilde_direct: float
    integral_nu_tilde: float
    integral_nu: float
    abserr: float


def drift_decomposition(measure: ExponentMeasure1D, a: float, tol: float = 1e-6) -> DriftResult:
    """Evaluate the drift of the OU stationary law two ways.

    ``gamma_tilde_direct = -a^{-1} int_{|x|>1} x nu(dx)
    + int_0^inf int e^{-at} x (1{|e^{-at} x| <= 1} - 1{|x| <= 1}) nu(dx) dt``
    by (nested) quadrature, and ``int_{|x|>1} x nu_tilde(dx)`` in closed form.
    """
    al = measure.alpha
    cp, cm = measure.c_plus, measure.c_minus
    errs = []

    def q(f, lo, hi, **kw):
        v, e = integrate.quad(f, lo, hi, epsabs=tol / 100, epsrel=1e-12, limit=200, **kw)
        errs.append(e)
        return v

    # int_{|x|>1} x nu(dx): density alpha c |x|^{-alpha-1} on each side
    pos = q(lambda x: x * al * x ** (-al - 1), 1.0, np.inf)
    int_nu = (cp - cm) * pos
    first = -int_nu / a

    # for fixed t the inner integrand lives on 1 < |x| <= e^{at}; integrate in s = log x
    def inner(t):
        if t <= 0:
            return 0.0
        v, e = integrate.quad(lambda s: al * math.exp((1.0 - al) * s), 0.0, a * t,
                              epsabs=tol / 1000, epsrel=1e-12, limit=200)
        errs.append(e)
        return math.exp(-a * t) * (cp - cm) * v

    double = q(inner, 0.0, np.inf)
    total_err = float(sum(errs))
    if total_err > tol:
        raise QuadratureError("drift quadrature did not converge", total_err)
    nt = nu_tilde(measure, a)
    int_nt = (nt.c_plus - nt.c_minus) * al / (al - 1.0)
    return DriftResult(first, double, first + double, int_nt, int_nu, total_err)


# ---------------------------------------------------------------------------
# product matrices and mean-measure sums
# ---------------------------------------------------------------------------

def _as_matrix(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return A


def products_1d(spec: sch.ScheduleSpec, a: float, N: int):
    """Arrays ``A_{N,i}`` and ``G_{N,i}`` for ``i = 1..N`` (index ``i-1``) in 1-d.

    ``A_{N,i} = prod_{k=i+1}^N (1 - gamma_k a)`` and
    ``G_{N,i} = gamma_i sum_{j=i}^N prod_{k=i+1}^j (1 - gamma_k a)``, the latter
    via ``S_N = 1``, ``S_{i} = 1 + (1 - gamma_{i+1} a) S_{i+1}``.
    """
    g = sch.gammas(spec, N)
    f = 1.0 - g * a
    rc = np.ones(N + 1)
    rc[:N] = np.cumprod(f[::-1])[::-1]
    A_arr = rc[1:]  # A_{N,i} = prod f[i:], i = 1..N
    S = np.empty(N)
    acc = 1.0
    fl = f.tolist()
    for i in range(N - 1, -1, -1):
        S[i] = acc
        acc = 1.0 + fl[i] * acc
    return A_arr, g * S


def w_sigma_1d(spec: sch.ScheduleSpec, sigma: float, N: int):
    """``w_{N,i}(sigma) = prod_{k=i+1}^N (1 - sigma gamma_k)`` for ``i = 1..N``."""
    return products_1d(spec, sigma, N)[0]


@dataclass(frozen=True)
class ProofMatrices:
    A_Ni: np.ndarray
    W_Ni: np.ndarray | None
    w_Ni_sigma: float | None
    G_Ni: np.ndarray


def proof_matrices(spec: sch.ScheduleSpec, A, N: int, i: int, sigma: float | None = None,
                   tail: TailModel | None = None) -> ProofMatrices:
    """``A_{N,i}``, ``W_{N,i}``, ``w_{N,i}(sigma)`` and ``G_{N,i}`` for one ``(N, i)``.

    ``W_{N,i}`` needs a tail with an exact quantile and is ``None`` when
    ``tail`` is not given.
    """
    if not 1 <= i <= N:
        raise ValueError("need 1 <= i <= N")
    A = _as_matrix(A)
    d = A.shape[0]
    I = np.eye(d)
    g = sch.gammas(spec, N)
    prod = I.copy()
    acc = I.copy()  # sum_{j=i}^{N} prod_{k=i+1}^{j}
    for k in range(i + 1, N + 1):
        prod = prod @ (I - g[k - 1] * A)
        acc = acc + prod
    G = g[i - 1] * acc
    W = None
    if tail is not None:
        if not tail.has_exact_quantile:
            raise ValueError("W_{N,i} needs a tail model with an exact quantile")
        gi, bi = sch.gamma(spec, i), sch.batch(spec, i)
        W = prod / quantile_upper(tail, gi / bi)
    ws = None
    if sigma is not None:
        ws = float(np.prod(1.0 - sigma * g[i:N]))
    return ProofMatrices(prod, W, ws, G)


def _pareto_only(tail):
    if not tail.is_pure_pareto and tail.kind != "pareto":
        raise ValueError("mean-measure sums need a Pareto tail model")


def mean_measure_sum_iterates(spec: sch.ScheduleSpec, tail: TailModel, a: float, N: int, s: float = 1.0) -> float:
    """``sum_i b_i P(|W_{N,i} zeta_0| > s)``, exact for Pareto tails."""
    _pareto_only(tail)
    A_arr, _ = products_1d(spec, a, N)
    b = sch.batches(spec, N).astype(float)
    g = sch.gammas(spec, N)
    q = quantile_upper(tail, g / b)
    absA = np.abs(A_arr)
    with np.errstate(divide="ignore"):
        arg = np.where(absA > 0, s * q / np.where(absA > 0, absA, 1.0), np.inf)
    p = np.zeros(N)
    fin = np.isfinite(arg)
    p[fin] = tail_prob(tail, arg[fin])
    return float(math.fsum(b * p))


def mean_measure_sum_averages(spec: sch.ScheduleSpec, tail: TailModel, a: float, N: int, s: float = 1.0) -> float:
    """``sum_i b_i P(|G_{N,i} zeta_0| > s b_i c_N)``, exact for Pareto tails."""
    _pareto_only(tail)
    _, G = products_1d(spec, a, N)
    b = sch.batches(spec, N).astype(float)
    _, cN = sch.c_norm(spec, tail, N)
    arg = s * b * cN / np.abs(G)
    return float(math.fsum(b * tail_prob(tail, arg)))


def batch_tail_sum(spec: sch.ScheduleSpec, tail: TailModel, N: int) -> float:
    """``sum_i b_i P(|zeta_0| > b_i c_N)``."""
    _pareto_only(tail)
    b = sch.batches(spec, N).astype(float)
    _, cN = sch.c_norm(spec, tail, N)
    return float(math.fsum(b * tail_prob(tail, b * cN)))
