"""Backward iteration of the splitting operator from T down to 0.

Layers live on the time grid t_j = T - j*delta; the interval
(T - delta, T] is covered by the linear terminal interpolation layer
between U and its first operator image.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .backward import OperatorConfig, apply_operator
from .errors import OutOfRange, StepMismatch
from .expectation import GridFunction, grid_function
from .problem import ProblemSpec

LAYER_TIME_TOL = 1e-9


@dataclass(frozen=True)
class SchemeSolution:
    """Stack of value layers; layers[j] holds the layer at t_j = T - j*delta,
    so layers[0] is the gridded terminal datum."""

    problem: ProblemSpec = field(repr=False)
    delta: float
    layers: tuple[GridFunction, ...]

    @property
    def n_steps(self) -> int:
        return len(self.layers) - 1

    @property
    def xs(self) -> np.ndarray:
        return self.layers[0].xs

    def time_of(self, j: int) -> float:
        return self.problem.horizon - j * self.delta

    def layer_index(self, t: float) -> int | None:
        j = round((self.problem.horizon - t) / self.delta)
        if 0 <= j <= self.n_steps and abs(self.time_of(int(j)) - t) <= LAYER_TIME_TOL:
            return int(j)
        return None

    def layer_at(self, t: float) -> GridFunction:
        j = self.layer_index(t)
        if j is None:
            raise OutOfRange(f"t={t} is not a layer time")
        return self.layers[j]


def solve(prob: ProblemSpec, xs, cfg: OperatorConfig) -> SchemeSolution:
    """Run the full backward recursion u(t) = S_t(dt) u(t+dt)."""
    xs = np.asarray(xs, dtype=float)
    T = prob.horizon
    ratio = T / cfg.delta
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9:
        raise StepMismatch(f"horizon {T} is not an integer multiple of "
                           f"delta {cfg.delta}")
    layers = [grid_function(xs, prob.terminal.eval)]
    for j in range(1, n + 1):
        t_j = T - j * cfg.delta
        layers.append(apply_operator(prob, t_j, cfg, layers[-1]))
    return SchemeSolution(problem=prob, delta=cfg.delta, layers=tuple(layers))


def solve_final_layer(prob: ProblemSpec, xs, cfg: OperatorConfig) -> GridFunction:
    """Low-memory variant of solve: identical recursion, but only the
    current layer is kept, and the t=0 layer is returned."""
    xs = np.asarray(xs, dtype=float)
    T = prob.horizon
    ratio = T / cfg.delta
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9:
        raise StepMismatch(f"horizon {T} is not an integer multiple of "
                           f"delta {cfg.delta}")
    layer = grid_function(xs, prob.terminal.eval)
    for j in range(1, n + 1):
        layer = apply_operator(prob, T - j * cfg.delta, cfg, layer)
    return layer


def terminal_layer(prob: ProblemSpec, xs, cfg: OperatorConfig, t: float,
                   x: float, first_image: GridFunction | None = None) -> float:
    """Linear interpolation between U and S_{T-dt}(dt)U on (T-dt, T].

    first_image, when supplied, must be the already-computed operator
    image of the gridded terminal datum; otherwise it is computed here.
    """
    T = prob.horizon
    dt = cfg.delta
    if not (T - dt < t <= T + LAYER_TIME_TOL):
        raise OutOfRange(f"t={t} outside the terminal strip ({T - dt}, {T}]")
    w1 = (t + dt - T) / dt
    w2 = (T - t) / dt
    u_val = float(prob.terminal.eval(np.asarray(x, dtype=float)))
    if w2 == 0.0:
        return u_val
    if first_image is None:
        xs = np.asarray(xs, dtype=float)
        first_image = apply_operator(prob, T - dt, cfg,
                                     grid_function(xs, prob.terminal.eval))
    return w1 * u_val + w2 * float(first_image(x))


def evaluate(sol: SchemeSolution, t: float, x: float) -> float:
    """Value of the scheme at (t, x): exact layers at grid times, the
    terminal interpolation layer on (T-dt, T), and plain linear
    interpolation in t elsewhere (a convenience, not part of the scheme)."""
    T = sol.problem.horizon
    dt = sol.delta
    if not (-LAYER_TIME_TOL <= t <= T + LAYER_TIME_TOL):
        raise OutOfRange(f"t={t} outside [0, {T}]")
    j = sol.layer_index(t)
    if j is not None:
        return float(sol.layers[j](x))
    if t > T - dt:
        w1 = (t + dt - T) / dt
        w2 = (T - t) / dt
        u_val = float(sol.problem.terminal.eval(np.asarray(x, dtype=float)))
        return w1 * u_val + w2 * float(sol.layers[1](x))
    j_hi = int(np.ceil((T - t) / dt - LAYER_TIME_TOL))
    j_hi = min(max(j_hi, 1), sol.n_steps)
    t_hi = sol.time_of(j_hi - 1)
    t_lo = sol.time_of(j_hi)
    w = (t - t_lo) / (t_hi - t_lo)
    return float((1.0 - w) * sol.layers[j_hi](x) + w * sol.layers[j_hi - 1](x))


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float
    per_layer: tuple[float, ...]
    terminal_excess: float
    residual_gap: float


def scheme_comparison_check(u_sol: SchemeSolution, v_sol: SchemeSolution,
                            h1, h2) -> ComparisonReport:
    """Check the discrete comparison inequality

        u - v <= sup (u_T - v_T)^+ + (T - t) * sup (h1 - h2)^+

    at every node of every layer, given that u is a subsolution up to h1
    and v a supersolution down to h2 (caller-asserted).  h1/h2 may be
    scalars or arrays of shape (n_steps, n_nodes) aligned with layers
    1..n_steps.
    """
    if u_sol.n_steps != v_sol.n_steps or u_sol.xs.shape != v_sol.xs.shape:
        raise ValueError("solutions must share the time and space grids")
    n = u_sol.n_steps
    nx = u_sol.xs.size
    h1 = np.broadcast_to(np.asarray(h1, dtype=float), (n, nx))
    h2 = np.broadcast_to(np.asarray(h2, dtype=float), (n, nx))
    term_excess = float(np.max(np.maximum(
        u_sol.layers[0].vals - v_sol.layers[0].vals, 0.0)))
    gap = float(np.max(np.maximum(h1 - h2, 0.0)))
    per_layer = []
    for j in range(n + 1):
        elapsed = j * u_sol.delta
        bound = term_excess + elapsed * gap
        diff = u_sol.layers[j].vals - v_sol.layers[j].vals
        per_layer.append(float(np.max(diff) - bound))
    return ComparisonReport(max_violation=max(per_layer),
                            per_layer=tuple(per_layer),
                            terminal_excess=term_excess, residual_gap=gap)


def export_layers(sol: SchemeSolution, out_dir: str) -> list[str]:
    """One CSV per layer plus a layers.csv manifest (j,t,file)."""
    os.makedirs(out_dir, exist_ok=True)
    files = []
    manifest = os.path.join(out_dir, "layers.csv")
    with open(manifest, "w", newline="") as fh:
        fh.write("j,t,file\n")
        for j, layer in enumerate(sol.layers):
            name = f"layer_{j:04d}.csv"
            layer.to_csv(os.path.join(out_dir, name))
            fh.write(f"{j},{sol.time_of(j):.17g},{name}\n")
            files.append(name)
    return files
