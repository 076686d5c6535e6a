"""Conditional expectations of a frozen-coefficient Gaussian step.

The linear half of the splitting scheme needs E[phi(Y)] where
Y = y + b(t,y)*dt + sigma(t,y)*(W_{t+dt} - W_t) is Gaussian once the
coefficients are frozen at (t, y).  Three evaluators are provided:
Gauss-Hermite quadrature (production path), seeded Monte Carlo
(cross-validation oracle) and a single explicit finite-difference step
(parity mode with classical grid methods).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CflViolation

SQRT_PI = math.sqrt(math.pi)
SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class GridFunction:
    """A real function sampled on a uniform 1-D grid.

    Between nodes the function is piecewise linear; beyond the first and
    last node it is extended by holding the boundary value constant (the
    only extension policy supported; it adds no spurious growth for
    bounded data).
    """

    xs: np.ndarray
    vals: np.ndarray
    extension: str = "constant"

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        vals = np.asarray(self.vals, dtype=float)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "vals", vals)
        if xs.ndim != 1 or xs.size < 2 or vals.shape != xs.shape:
            raise ValueError("grid needs >= 2 nodes and matching value array")
        if self.extension != "constant":
            raise ValueError("only constant-hold extension is supported")
        diffs = np.diff(xs)
        h = diffs[0]
        if h <= 0 or np.any(diffs <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        # 1e-12*h uniformity, floored at a few ulps of the coordinates so
        # fine grids with |x| ~ 25 remain representable
        drift_tol = max(1e-12 * h, 8.0 * np.finfo(float).eps * np.max(np.abs(xs)))
        if np.max(np.abs(diffs - h)) > drift_tol:
            raise ValueError("grid spacing drifts beyond uniform tolerance")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(vals))):
            raise ValueError("grid nodes and values must be finite")

    @property
    def spacing(self) -> float:
        return float(self.xs[1] - self.xs[0])

    def __call__(self, x):
        """Piecewise-linear interpolation with constant-hold extension."""
        return np.interp(x, self.xs, self.vals)

    def lipschitz(self) -> float:
        """Max adjacent slope: the observable Lipschitz constant."""
        return float(np.max(np.abs(np.diff(self.vals))) / self.spacing)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.vals)))

    def with_values(self, vals) -> "GridFunction":
        return GridFunction(self.xs, np.asarray(vals, dtype=float))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("x,value\n")
            for x, v in zip(self.xs, self.vals):
                fh.write(f"{x:.17g},{v:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


def uniform_grid(x_min: float, x_max: float, h: float) -> np.ndarray:
    """Uniform nodes covering [x_min, x_max] with spacing ~h."""
    if not (x_min < x_max and h > 0):
        raise ValueError("need x_min < x_max and h > 0")
    n = max(2, int(round((x_max - x_min) / h)))
    return np.linspace(x_min, x_max, n + 1)


def grid_function(xs, f) -> GridFunction:
    """Sample a callable onto a grid."""
    xs = np.asarray(xs, dtype=float)
    return GridFunction(xs, np.asarray(f(xs), dtype=float))


@dataclass(frozen=True)
class GaussianStep:
    """Law of the frozen-coefficient state after one time step."""

    mean: float
    std: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)):
            raise ValueError("mean and std must be finite")
        if self.std < 0:
            raise ValueError("std must be nonnegative")


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Hermite nodes/weights for weight function exp(-z^2)."""

    nodes: np.ndarray
    weights: np.ndarray
    weight_sum: float = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        wsum = float(np.sum(weights))
        object.__setattr__(self, "weight_sum", wsum)
        if abs(wsum - SQRT_PI) > 1e-12:
            raise ValueError("weights must sum to sqrt(pi)")
        if np.max(np.abs(nodes + nodes[::-1])) > 1e-12:
            raise ValueError("nodes must be symmetric about 0")

    @property
    def span(self) -> float:
        return float(self.nodes[-1] - self.nodes[0])


@lru_cache(maxsize=32)
def hermite_rule(order: int) -> QuadratureRule:
    z, w = np.polynomial.hermite.hermgauss(order)
    return QuadratureRule(z, w)


def pick_rule(order: int, std: float, h: float) -> QuadratureRule:
    """Order doubles once when the scaled node span sweeps many cells
    (SQRT2*std*span > 6h), which is when the interpolant's kinks start to
    matter."""
    base = hermite_rule(order)
    if SQRT2 * std * base.span > 6.0 * h:
        return hermite_rule(2 * order)
    return base


def frozen_step(coeffs, t: float, dt: float, y: float) -> GaussianStep:
    """Freeze drift and diffusion at (t, y) over a step of length dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return GaussianStep(mean=float(y + coeffs.b(t, y) * dt),
                        std=float(abs(coeffs.sigma(t, y)) * math.sqrt(dt)))


def expect_quadrature(phi: GridFunction, step: GaussianStep,
                      rule: QuadratureRule) -> float:
    """(1/sqrt(pi)) * sum_i w_i * phi(mean + sqrt(2)*std*z_i)."""
    if step.std == 0.0:
        return float(phi(step.mean))
    pts = step.mean + SQRT2 * step.std * rule.nodes
    return float(np.dot(rule.weights, phi(pts)) / rule.weight_sum)


def expect_quadrature_many(phi: GridFunction, means: np.ndarray,
                           stds: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """Vectorized expect_quadrature over per-point Gaussian steps."""
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    pts = means[:, None] + SQRT2 * stds[:, None] * rule.nodes[None, :]
    fv = np.interp(pts.ravel(), phi.xs, phi.vals).reshape(pts.shape)
    return fv @ rule.weights / rule.weight_sum


def expect_monte_carlo(phi: GridFunction, step: GaussianStep, n: int,
                       seed: int) -> tuple[float, float]:
    """Seeded sample mean and standard error over n normal draws.

    Philox is counter-based, so draw i is a pure function of (seed, i)
    and the result is bitwise reproducible regardless of how callers
    schedule threads around this function.
    """
    if n < 2:
        raise ValueError("need n >= 2 samples")
    gen = np.random.Generator(np.random.Philox(seed))
    z = gen.standard_normal(n)
    samples = phi(step.mean + step.std * z)
    est = float(np.mean(samples))
    std_err = float(np.std(samples, ddof=1) / math.sqrt(n))
    return est, std_err


def expect_fd_explicit(phi: GridFunction, coeffs, t: float, dt: float,
                       y_index: int) -> float:
    """One explicit step phi + dt*(0.5*sigma^2*D2 phi + b*D phi) at a node.

    Central second difference, first difference upwinded by the sign of
    the drift, boundary neighbours held constant.
    """
    xs, vals = phi.xs, phi.vals
    h = phi.spacing
    n = xs.size
    if not (0 <= y_index < n):
        raise IndexError("y_index outside the grid")
    y = float(xs[y_index])
    sig = float(coeffs.sigma(t, y))
    drift = float(coeffs.b(t, y))
    if sig * sig * dt / (h * h) > 1.0 + 1e-12 or abs(drift) * dt / h > 1.0 + 1e-12:
        raise CflViolation(
            f"sigma^2*dt/h^2={sig * sig * dt / (h * h):.3g}, "
            f"|b|*dt/h={abs(drift) * dt / h:.3g} at (t={t}, y={y})")
    lo = vals[max(y_index - 1, 0)]
    mid = vals[y_index]
    hi = vals[min(y_index + 1, n - 1)]
    d2 = (hi - 2.0 * mid + lo) / (h * h)
    if drift >= 0:
        d1 = (hi - mid) / h
    else:
        d1 = (mid - lo) / h
    return float(mid + dt * (0.5 * sig * sig * d2 + drift * d1))
