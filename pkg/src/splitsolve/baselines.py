"""Comparison baselines: the closed-form Cole-Hopf benchmark and an
implicit finite-difference solver driven by Howard's policy iteration.

The benchmark problem (sigma=1, b=0, H=p^2/2, U = 0 v x ^ K) linearizes
under v = exp(-u) to the backward heat equation, whose solution with the
clamped terminal datum is an explicit combination of normal CDFs; u then
follows as -log v.  The FD baseline rewrites the PDE as an HJB equation
over the dual variable, -du/dt + sup_q { -0.5*sigma^2 u_xx
- (b - q) u_x - L(t,x,q) } = 0, and advances it by implicit Euler with
one policy-improvement loop per layer.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import ndtr

from .errors import OutOfRange, PolicyNonConvergence, StepMismatch
from .expectation import grid_function
from .problem import ProblemSpec, minimizer_radius
from .scheme import SchemeSolution


def normal_cdf(z):
    """Standard normal CDF via the complementary error function."""
    return ndtr(z)


@dataclass(frozen=True)
class ColeHopfParams:
    K: float = 5.0
    T: float = 1.0

    def __post_init__(self):
        if self.K <= 0 or self.T <= 0:
            raise ValueError("K and T must be positive")

    def terminal(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, self.K)


def cole_hopf_exact(params: ColeHopfParams, t: float, x) -> float | np.ndarray:
    """Exact solution u(t,x) = -log v(t,x) of the benchmark equation.

    The middle heat-kernel term is evaluated through CDF complements so
    that the difference of two near-unit CDFs never cancels.
    """
    if not (0.0 <= t < params.T):
        raise OutOfRange(f"t={t} outside [0, T); the terminal value is the "
                         f"clamp itself")
    x = np.asarray(x, dtype=float)
    tau = params.T - t
    s = math.sqrt(tau)
    upper = (params.K - x + tau) / s
    lower = (-x + tau) / s
    mid = np.where(upper + lower > 0.0,
                   ndtr(-lower) - ndtr(-upper),
                   ndtr(upper) - ndtr(lower))
    v = (ndtr(-x / s)
         + np.exp(-x + 0.5 * tau) * mid
         + math.exp(-params.K) * ndtr(-(params.K - x) / s))
    out = -np.log(v)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HowardConfig:
    """Policy-candidate grid and iteration caps for the FD baseline."""

    q_grid: np.ndarray
    max_policy_iters: int = 50
    value_tol: float = 1e-10

    def __post_init__(self):
        q = np.asarray(self.q_grid, dtype=float)
        object.__setattr__(self, "q_grid", q)
        if self.max_policy_iters < 1:
            raise ValueError("max_policy_iters must be >= 1")
        if not np.any(q == 0.0):
            raise ValueError("q_grid must contain 0")


def default_howard_config(prob: ProblemSpec, radius_safety: float = 2.0,
                          q_points: int = 201, **kwargs) -> HowardConfig:
    """Symmetric uniform policy grid spanning the dual coercivity radius
    of the terminal datum; q_points is kept odd so 0 is a grid point."""
    q_max = radius_safety * minimizer_radius(prob.dual, prob.terminal.lip_const)
    if q_points % 2 == 0:
        q_points += 1
    return HowardConfig(q_grid=np.linspace(-q_max, q_max, q_points), **kwargs)


def _upwind_gradients(u: np.ndarray, h: float):
    """(forward, backward) one-sided differences with constant-hold ends."""
    fwd = np.empty_like(u)
    bwd = np.empty_like(u)
    fwd[:-1] = (u[1:] - u[:-1]) / h
    fwd[-1] = 0.0
    bwd[1:] = (u[1:] - u[:-1]) / h
    bwd[0] = 0.0
    return fwd, bwd


def _improve_policy(u, h, drift, l_table, q_grid):
    """argmax over the policy grid of -(b - q)*Du - L(t,x,q), with Du
    upwinded by the sign of the frozen advection b - q."""
    fwd, bwd = _upwind_gradients(u, h)
    best_score = np.full(u.shape, -np.inf)
    best_idx = np.zeros(u.shape, dtype=int)
    for a, q in enumerate(q_grid):
        vel = drift - q
        du = np.where(vel > 0.0, fwd, bwd)
        score = -vel * du - l_table[a]
        take = score > best_score
        best_score = np.where(take, score, best_score)
        best_idx = np.where(take, a, best_idx)
    return best_idx


def _policy_solve(u_next, dt, h, nu, vel, l_vals):
    """Tridiagonal solve of (I + dt*A) u = u_next + dt*L for one frozen
    policy; upwinding keeps the matrix an M-matrix, zero-Neumann ends."""
    n = u_next.size
    vp = np.maximum(vel, 0.0)
    vm = np.maximum(-vel, 0.0)
    upper = -dt * (nu / (h * h) + vp / h)
    lower = -dt * (nu / (h * h) + vm / h)
    diag = 1.0 + dt * (2.0 * nu / (h * h) + (vp + vm) / h)
    # fold the ghost nodes into the boundary rows
    diag = diag.copy()
    diag[0] += lower[0]
    diag[-1] += upper[-1]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    rhs = u_next + dt * l_vals
    return solve_banded((1, 1), ab, rhs)


def howard_fd_solve(prob: ProblemSpec, xs, dt: float,
                    cfg: HowardConfig) -> SchemeSolution:
    """Implicit Euler + policy iteration on the HJB form of the PDE.

    Per layer: solve the linear PDE for the frozen policy, then improve
    the policy nodewise over the candidate grid; stop when the policy is
    stable or the value change drops below value_tol.
    """
    xs = np.asarray(xs, dtype=float)
    h = float(xs[1] - xs[0])
    T = prob.horizon
    ratio = T / dt
    n_steps = round(ratio)
    if n_steps < 1 or abs(ratio - n_steps) > 1e-9:
        raise StepMismatch(f"horizon {T} is not an integer multiple of dt={dt}")

    q_grid = cfg.q_grid
    layers = [grid_function(xs, prob.terminal.eval)]
    policy = np.full(xs.size, int(np.argmin(np.abs(q_grid))))
    for j in range(1, n_steps + 1):
        t_j = T - j * dt
        u_next = layers[-1].vals
        sig = np.asarray(prob.coeffs.sigma(t_j, xs), dtype=float)
        drift = np.asarray(prob.coeffs.b(t_j, xs), dtype=float)
        nu = 0.5 * sig * sig
        l_table = np.stack([
            prob.dual.eval_batch(t_j, xs, np.full(xs.size, q))
            for q in q_grid])
        u = u_next
        converged = False
        for _ in range(cfg.max_policy_iters):
            new_policy = _improve_policy(u, h, drift, l_table, q_grid)
            qv = q_grid[new_policy]
            lv = l_table[new_policy, np.arange(xs.size)]
            u_new = _policy_solve(u_next, dt, h, nu, drift - qv, lv)
            policy_stable = np.array_equal(new_policy, policy)
            value_stable = float(np.max(np.abs(u_new - u))) < cfg.value_tol
            policy = new_policy
            u = u_new
            if policy_stable or value_stable:
                converged = True
                break
        if not converged:
            warnings.warn(f"policy iteration hit the cap at layer t={t_j:g}",
                          PolicyNonConvergence)
        layers.append(layers[0].with_values(u))
    return SchemeSolution(problem=prob, delta=dt, layers=tuple(layers))
