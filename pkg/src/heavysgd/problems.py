"""Optimization instances with linear mean field.

A problem exposes per-sample gradients on data arrays. Data has shape
``(..., n, k)`` (``k`` numbers per datum) and :meth:`Problem.grad` returns
``(..., n, d)``. ``theta`` broadcasts as ``(..., d)``.

Both built-ins have ``H(theta) = A (theta - theta*)`` exactly, so the Taylor
remainder of the mean field vanishes and every constant in the theory is
explicit. Matrix-vector products are written as elementwise
multiply-and-sum rather than ``@`` so that results do not depend on BLAS
blocking.
"""

from __future__ import annotations

import numpy as np

from .noise import TailModel, sample_scalar, sample_zeta


def _apply(A, v):
    # (A v) over the trailing axis without BLAS
    return np.sum(A * v[..., None, :], axis=-1)


class Problem:
    """Base contract. Subclasses set ``dim``, ``datum_size``, ``theta_star`` and ``A``."""

    dim: int
    datum_size: int
    theta_star: np.ndarray
    A: np.ndarray
    tail: TailModel | None = None

    def mean_field(self, theta):
        theta = np.asarray(theta, dtype=float)
        return _apply(self.A, theta - self.theta_star)

    def jacobian_at_optimum(self):
        return self.A.copy()

    @property
    def spectrum(self):
        ev = np.linalg.eigvalsh(self.A)
        return float(ev[0]), float(ev[-1])

    @property
    def a_min(self):
        return self.spectrum[0]

    @property
    def a_max(self):
        return self.spectrum[1]

    def sample_data(self, rng, n):
        raise NotImplementedError

    def sample_datum(self, rng):
        return self.sample_data(rng, 1)[0]

    def grad(self, theta, xi):
        raise NotImplementedError

    def zeta_at_optimum(self, xi):
        """``grad(theta*, xi)`` minus its mean (the mean is zero for the built-ins)."""
        return self.grad(self.theta_star, xi)

    def taylor_remainder(self, theta):
        """``H(theta) - H(theta*) - A (theta - theta*)``."""
        theta = np.asarray(theta, dtype=float)
        return (self.mean_field(theta) - self.mean_field(self.theta_star)
                - _apply(self.A, theta - self.theta_star))

    def describe(self) -> dict:
        raise NotImplementedError


def _check_spd(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("A must be symmetric")
    if np.linalg.eigvalsh(A)[0] <= 0:
        raise ValueError("A must be positive definite")
    return A


class QuadraticProblem(Problem):
    """``grad(theta, zeta) = A (theta - theta*) + zeta`` with additive noise ``zeta``.

    ``tail=None`` gives the noiseless problem (data are all zero).
    """

    def __init__(self, A, theta_star=None, tail: TailModel | None = None):
        self.A = _check_spd(A)
        self.dim = self.A.shape[0]
        self.datum_size = self.dim
        ts = np.zeros(self.dim) if theta_star is None else np.atleast_1d(np.asarray(theta_star, dtype=float))
        if ts.shape != (self.dim,):
            raise ValueError("theta_star has the wrong shape")
        self.theta_star = ts
        self.tail = tail

    def sample_data(self, rng, n):
        if self.tail is None:
            return np.zeros((n, self.dim))
        return sample_zeta(self.tail, self.dim, rng, n)

    def grad(self, theta, xi):
        theta = np.asarray(theta, dtype=float)
        xi = np.asarray(xi, dtype=float)
        drift = _apply(self.A, theta - self.theta_star)
        if xi.ndim == theta.ndim:  # a single datum
            return drift + xi
        return drift[..., None, :] + xi

    def zeta_at_optimum(self, xi):
        return np.array(xi, dtype=float)

    def describe(self):
        return {"name": "quadratic", "A": self.A.tolist(), "theta_star": self.theta_star.tolist(),
                "noise": None if self.tail is None else self.tail.kind}


X_LAWS = ("normal", "uniform", "constant")


class LinearRegressionProblem(Problem):
    """Univariate regression ``Y = theta* X + eps``, squared loss.

    A datum is ``(X, eps)`` and the per-sample gradient is the derivative of
    ``(Y - theta X)**2 / 2``, namely ``-X (Y - theta X) = X**2 (theta - theta*) - X eps``.

    ``x_law`` is ``"normal"`` (``N(0, x_scale**2)``), ``"uniform"``
    (``U(-x_scale, x_scale)``) or ``"constant"`` (``X = x_scale``).
    """

    datum_size = 2
    dim = 1

    def __init__(self, theta_star=0.0, eps: TailModel | None = None, x_law="normal", x_scale=1.0):
        if x_law not in X_LAWS:
            raise ValueError(f"x_law must be one of {X_LAWS}")
        if not x_scale > 0:
            raise ValueError("x_scale must be > 0")
        self.theta_star = np.atleast_1d(np.asarray(theta_star, dtype=float))
        if self.theta_star.shape != (1,):
            raise ValueError("linear regression is univariate")
        self.tail = eps
        self.x_law = x_law
        self.x_scale = float(x_scale)
        m2 = {"normal": 1.0, "uniform": 1.0 / 3.0, "constant": 1.0}[x_law] * self.x_scale ** 2
        self.A = np.array([[m2]])

    @property
    def second_moment(self):
        return float(self.A[0, 0])

    def sample_data(self, rng, n):
        if self.x_law == "normal":
            x = self.x_scale * rng.standard_normal(n)
        elif self.x_law == "uniform":
            x = rng.uniform(-self.x_scale, self.x_scale, n)
        else:
            x = np.full(n, self.x_scale)
        eps = np.zeros(n) if self.tail is None else sample_scalar(self.tail, rng, n)
        return np.stack([x, eps], axis=-1)

    def grad(self, theta, xi):
        theta = np.asarray(theta, dtype=float)
        xi = np.asarray(xi, dtype=float)
        x, eps = xi[..., 0], xi[..., 1]
        y = self.theta_star[0] * x + eps
        if xi.ndim > theta.ndim:
            t = theta[..., None, 0]
        else:
            t = theta[..., 0]
        return (-x * (y - t * x))[..., None]

    def describe(self):
        return {"name": "linear_regression", "theta_star": self.theta_star.tolist(),
                "x_law": self.x_law, "x_scale": self.x_scale,
                "noise": None if self.tail is None else self.tail.kind}
