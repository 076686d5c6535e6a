"""Problem definition: coefficients, Hamiltonian, terminal datum, and the
numerical Legendre transform with its coercivity-derived bounds.

A problem instance is the semilinear terminal-value PDE

    -du/dt - 0.5*sigma(t,x)^2 * u_xx - b(t,x) * u_x + H(t, x, u_x) = 0,
    u(T, x) = U(x),

with H convex and coercive in the gradient.  The convex dual
L(t,x,q) = sup_p {p*q - H(t,x,p)} is what the splitting scheme actually
consumes, together with its (t,x)-uniform envelopes and the radius
function that confines minimizers to a compact set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._golden import golden_max_scalar, golden_min_vec as _golden_min_vec
from .errors import NonCoercive

CONJUGATION_POINTS = 2001
CONJUGATION_TOL = 1e-10
ENVELOPE_LATTICE = (21, 41)
MAX_COERCIVITY_RADIUS = 1e6


@dataclass(frozen=True)
class CoefficientField:
    """Diffusion and drift coefficients; callables take (t, x) and must
    broadcast over numpy arrays."""

    sigma: Callable
    b: Callable


@dataclass(frozen=True)
class HamiltonianSpec:
    """Hamiltonian H(t,x,p), convex and coercive in p.

    coercivity_radius is the declared increasing function K_H: it returns
    a radius beyond which H(t,x,p)/|p| >= y for every (t,x).  It cannot be
    inferred from a black-box H, so the caller declares it; the selftest
    spot-checks it.  When the convex dual is known in closed form it can
    be supplied as analytic_dual(t,x,q), which short-circuits numerical
    conjugation.
    """

    eval: Callable
    coercivity_radius: Callable
    analytic_dual: Callable | None = None
    tx_dependent: bool = True


@dataclass(frozen=True)
class TerminalDatum:
    """Bounded Lipschitz terminal condition U with its declared constant."""

    eval: Callable
    lip_const: float


def legendre_transform(ham: HamiltonianSpec, t: float, x: float, q: float,
                       n_points: int = CONJUGATION_POINTS,
                       tol: float = CONJUGATION_TOL,
                       h_star0: float | None = None) -> float:
    """Convex conjugate sup_p {p*q - H(t,x,p)} at a single point.

    Uses the analytic dual when declared; otherwise scans a uniform
    p-grid on [-R, R] with R = K_H(|H^*(0)| + |q| + 1) and refines the
    best bracket by golden-section.  Ties in the grid argmax go to the
    smallest |p| (then the smaller p).
    """
    if ham.analytic_dual is not None:
        return float(ham.analytic_dual(t, x, q))
    h0 = abs(float(ham.eval(t, x, 0.0))) if h_star0 is None else abs(h_star0)
    return _conjugate(lambda p: np.asarray(ham.eval(t, x, p), dtype=float),
                      ham.coercivity_radius, h0, float(q), n_points, tol)


def _conjugate(fval, k_radius, h0: float, q: float, n_points: int,
               tol: float) -> float:
    """Numerical conjugate of a vectorizable function of p."""
    radius = max(float(k_radius(h0 + abs(q) + 1.0)), 1.0)
    for _ in range(2):
        p = np.linspace(-radius, radius, n_points)
        vals = p * q - fval(p)
        vmax = np.max(vals)
        ties = np.flatnonzero(vals == vmax)
        j = int(ties[np.lexsort((p[ties], np.abs(p[ties])))[0]])
        if 0 < j < n_points - 1:
            _, refined = golden_max_scalar(lambda pp: pp * q - fval(pp),
                                           p[j - 1], p[j + 1], tol)
            return float(max(vmax, refined))
        radius *= 2.0
    raise NonCoercive(
        f"conjugation argmax stuck on the search boundary |p|={radius / 2:g}; "
        f"check the declared coercivity radius")


class DualHamiltonian:
    """Legendre transform L(t,x,q) with envelope bounds and radius map.

    eval(t,x,q) is the dual itself; lower_env/upper_env are the
    (t,x)-uniform envelopes L_* <= L <= L^* obtained by conjugating the
    sup/inf of H over a sample lattice of the declared space-time box;
    xi(z) = max(K_L(|L^*(0)| + z), 1) bounds the minimizer displacement
    rate in the backward operator.
    """

    def __init__(self, ham: HamiltonianSpec, t_range, x_range,
                 lattice=ENVELOPE_LATTICE,
                 max_radius: float = MAX_COERCIVITY_RADIUS):
        self._ham = ham
        self._max_radius = max_radius
        self._lower_memo: dict[float, float] = {}
        self._upper_memo: dict[float, float] = {}
        self._xi_memo: dict[float, float] = {}
        self._kl_memo: dict[float, float] = {}

        if ham.tx_dependent:
            nt, nx = lattice
            tl = np.linspace(t_range[0], t_range[1], nt)
            xl = np.linspace(x_range[0], x_range[1], nx)
            self._tt = np.repeat(tl, nx)
            self._xx = np.tile(xl, nt)
        else:
            self._tt = np.array([0.5 * (t_range[0] + t_range[1])])
            self._xx = np.array([0.5 * (x_range[0] + x_range[1])])
        self.h_upper0 = float(np.max(self._ham_lattice(0.0)))
        self.h_star0_abs = abs(self.h_upper0)

    def _ham_lattice(self, p):
        """H over the (t,x) lattice at momenta p; shape (lattice, len(p))."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return np.asarray(
            self._ham.eval(self._tt[:, None], self._xx[:, None], p[None, :]),
            dtype=float)

    def _h_sup(self, p):
        return np.max(self._ham_lattice(p), axis=0)

    def _h_inf(self, p):
        return np.min(self._ham_lattice(p), axis=0)

    def eval(self, t, x, q):
        if self._ham.analytic_dual is not None:
            return self._ham.analytic_dual(t, x, q)
        return legendre_transform(self._ham, float(t), float(x), float(q),
                                  h_star0=self.h_star0_abs)

    def eval_batch(self, t, xs, qs) -> np.ndarray:
        """Dual values for paired arrays of x and q at a common time.

        The numeric path shares one p-grid across the batch (radius from
        the largest |q|), so values match the scalar transform to the
        refinement tolerance rather than bitwise.
        """
        xs = np.asarray(xs, dtype=float)
        qs = np.asarray(qs, dtype=float)
        if self._ham.analytic_dual is not None:
            out = self._ham.analytic_dual(t, xs, qs)
            return np.broadcast_to(np.asarray(out, dtype=float),
                                   np.broadcast_shapes(xs.shape, qs.shape)).copy()
        xs_b, qs_b = np.broadcast_arrays(xs, qs)
        xf = xs_b.ravel()
        qf = qs_b.ravel()
        radius = max(float(self._ham.coercivity_radius(
            self.h_star0_abs + float(np.max(np.abs(qf))) + 1.0)), 1.0)
        n_p = CONJUGATION_POINTS
        for attempt in range(2):
            p = np.linspace(-radius, radius, n_p)
            ham_vals = np.asarray(
                self._ham.eval(t, xf[:, None], p[None, :]), dtype=float)
            vals = qf[:, None] * p[None, :] - ham_vals
            vmax = np.max(vals, axis=1)
            rank = np.abs(np.arange(n_p) - (n_p - 1) / 2.0) * (2 * n_p) \
                + np.arange(n_p)
            tie = np.where(vals == vmax[:, None], rank[None, :], np.inf)
            j = np.argmin(tie, axis=1)
            if np.all((j > 0) & (j < n_p - 1)):
                break
            radius *= 2.0
        else:
            raise NonCoercive(
                f"batched conjugation argmax stuck on the search boundary "
                f"|p|={radius / 2:g}")

        def neg_obj(pv):
            return np.asarray(self._ham.eval(t, xf, pv), dtype=float) \
                - pv * qf

        _, neg = _golden_min_vec(neg_obj, p[j - 1], p[j + 1],
                                 np.full(xf.size, CONJUGATION_TOL))
        return np.maximum(vmax, -neg).reshape(xs_b.shape)

    def lower_env(self, q: float) -> float:
        """L_*(q): conjugate of the upper envelope H^*."""
        q = float(q)
        if q not in self._lower_memo:
            if not self._ham.tx_dependent and self._ham.analytic_dual is not None:
                val = float(self._ham.analytic_dual(0.0, 0.0, q))
            else:
                val = _conjugate(self._h_sup, self._ham.coercivity_radius,
                                 self.h_star0_abs, q, CONJUGATION_POINTS,
                                 CONJUGATION_TOL)
            self._lower_memo[q] = val
        return self._lower_memo[q]

    def upper_env(self, q: float) -> float:
        """L^*(q): conjugate of the lower envelope H_*."""
        q = float(q)
        if q not in self._upper_memo:
            if not self._ham.tx_dependent and self._ham.analytic_dual is not None:
                val = float(self._ham.analytic_dual(0.0, 0.0, q))
            else:
                val = _conjugate(self._h_inf, self._ham.coercivity_radius,
                                 self.h_star0_abs, q, CONJUGATION_POINTS,
                                 CONJUGATION_TOL)
            self._upper_memo[q] = val
        return self._upper_memo[q]

    def stability_constant(self) -> float:
        """max(|L^*(0)|, |H^*(0)|): the per-step growth constant."""
        return max(abs(self.upper_env(0.0)), self.h_star0_abs)

    def _coercivity_radius_of_dual(self, y: float) -> float:
        """Smallest sampled radius r with L_*(+-r)/r >= y (K_L)."""
        y = float(y)
        if y in self._kl_memo:
            return self._kl_memo[y]

        def satisfied(r: float) -> bool:
            return min(self.lower_env(r), self.lower_env(-r)) >= y * r

        lo, hi = 0.0, 1.0
        while not satisfied(hi):
            lo, hi = hi, 2.0 * hi
            if hi > self._max_radius:
                raise NonCoercive(
                    f"dual growth never reached rate {y:g} within radius "
                    f"{self._max_radius:g}")
        for _ in range(80):
            if hi - lo <= 1e-12 * max(1.0, hi):
                break
            mid = 0.5 * (lo + hi)
            if satisfied(mid):
                hi = mid
            else:
                lo = mid
        self._kl_memo[y] = hi
        return hi

    def xi(self, z: float) -> float:
        """Increasing radius bound max(K_L(|L^*(0)| + z), 1)."""
        z = float(z)
        if z not in self._xi_memo:
            target = abs(self.upper_env(0.0)) + z
            self._xi_memo[z] = max(self._coercivity_radius_of_dual(target), 1.0)
        return self._xi_memo[z]


def dual_envelopes(dual: DualHamiltonian, q: float) -> tuple[float, float]:
    """(L_*(q), L^*(q)); always ordered L_* <= L^*."""
    return dual.lower_env(q), dual.upper_env(q)


def minimizer_radius(dual: DualHamiltonian, lip: float) -> float:
    """Bound on |x - y*|/dt for the backward-operator minimizer when the
    propagated function has Lipschitz constant lip."""
    if lip < 0:
        raise ValueError("lip must be nonnegative")
    return dual.xi(lip)


@dataclass(frozen=True)
class ProblemSpec:
    """Full PDE instance plus the declared constants the numerics rely on."""

    coeffs: CoefficientField
    hamiltonian: HamiltonianSpec
    dual: DualHamiltonian = field(repr=False)
    terminal: TerminalDatum
    horizon: float
    x_domain: tuple[float, float]
    m_bound: float
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.x_domain[0] < self.x_domain[1]:
            raise ValueError("x_domain must be an increasing pair")


def make_problem(coeffs: CoefficientField, ham: HamiltonianSpec,
                 terminal: TerminalDatum, horizon: float,
                 x_domain=(-15.0, 25.0), m_bound: float = 10.0,
                 name: str = "", params: dict | None = None) -> ProblemSpec:
    dual = DualHamiltonian(ham, (0.0, horizon), x_domain)
    return ProblemSpec(coeffs=coeffs, hamiltonian=ham, dual=dual,
                       terminal=terminal, horizon=horizon,
                       x_domain=tuple(map(float, x_domain)),
                       m_bound=float(m_bound), name=name,
                       params=dict(params or {}))


def constant_coefficient(c: float) -> Callable:
    c = float(c)

    def f(t, x):
        return np.full_like(np.asarray(x, dtype=float), c)

    return f


def clamp_terminal(lo: float, hi: float) -> TerminalDatum:
    lo, hi = float(lo), float(hi)

    def u(x):
        return np.clip(np.asarray(x, dtype=float), lo, hi)

    return TerminalDatum(eval=u, lip_const=1.0)


def cole_hopf_problem(K: float = 5.0, T: float = 1.0,
                      x_domain=(-15.0, 25.0)) -> ProblemSpec:
    """sigma=1, b=0, H=p^2/2, U=clamp(x,0,K): the Cole-Hopf benchmark."""
    K = float(K)
    ham = HamiltonianSpec(
        eval=lambda t, x, p: 0.5 * np.asarray(p, dtype=float) ** 2,
        coercivity_radius=lambda y: max(2.0 * y, 0.0),
        analytic_dual=lambda t, x, q: 0.5 * np.asarray(q, dtype=float) ** 2,
        tx_dependent=False)
    return make_problem(
        CoefficientField(constant_coefficient(1.0), constant_coefficient(0.0)),
        ham, clamp_terminal(0.0, K), horizon=float(T), x_domain=x_domain,
        m_bound=K + 1.0, name="cole-hopf", params={"K": K, "T": float(T)})


def quadratic_drift_problem(a: float = 1.0, K: float = 5.0, T: float = 1.0,
                            x_domain=(-15.0, 25.0)) -> ProblemSpec:
    """H = a*p + p^2/2; dual is a shifted parabola (q-a)^2/2."""
    a = float(a)
    ham = HamiltonianSpec(
        eval=lambda t, x, p: a * np.asarray(p, dtype=float)
        + 0.5 * np.asarray(p, dtype=float) ** 2,
        coercivity_radius=lambda y: max(2.0 * (y + abs(a)), 0.0),
        analytic_dual=lambda t, x, q: 0.5 * (np.asarray(q, dtype=float) - a) ** 2,
        tx_dependent=False)
    return make_problem(
        CoefficientField(constant_coefficient(1.0), constant_coefficient(0.0)),
        ham, clamp_terminal(0.0, K), horizon=float(T), x_domain=x_domain,
        m_bound=float(K) + 1.0 + abs(a), name="quadratic-drift",
        params={"a": a, "K": float(K), "T": float(T)})


def quartic_problem(K: float = 5.0, T: float = 1.0,
                    x_domain=(-15.0, 25.0)) -> ProblemSpec:
    """H = p^4/4; dual (3/4)|q|^{4/3}."""
    ham = HamiltonianSpec(
        eval=lambda t, x, p: 0.25 * np.asarray(p, dtype=float) ** 4,
        coercivity_radius=lambda y: float(np.cbrt(4.0 * max(y, 0.0))),
        analytic_dual=lambda t, x, q:
            0.75 * np.abs(np.asarray(q, dtype=float)) ** (4.0 / 3.0),
        tx_dependent=False)
    return make_problem(
        CoefficientField(constant_coefficient(1.0), constant_coefficient(0.0)),
        ham, clamp_terminal(0.0, K), horizon=float(T), x_domain=x_domain,
        m_bound=float(K) + 1.0, name="quartic",
        params={"K": float(K), "T": float(T)})


BUILTIN_PROBLEMS = {
    "cole-hopf": cole_hopf_problem,
    "quadratic-drift": quadratic_drift_problem,
    "quartic": quartic_problem,
}


def validate_declarations(prob: ProblemSpec, seed: int = 0,
                          n_samples: int = 64) -> list[str]:
    """Spot-check the user-declared constants against samples.

    Declarations (bound, Lipschitz constants, the coercivity radius K_H,
    convexity of H) cannot be proven from black-box callables; this
    samples them and returns human-readable violation strings, empty when
    everything checks out.
    """
    rng = np.random.default_rng(seed)
    out = []
    t_lo, t_hi = 0.0, prob.horizon
    x_lo, x_hi = prob.x_domain
    ts = rng.uniform(t_lo, t_hi, n_samples)
    xs = rng.uniform(x_lo, x_hi, n_samples)
    m = prob.m_bound

    for name, fn in (("sigma", prob.coeffs.sigma), ("b", prob.coeffs.b)):
        vals = np.asarray(fn(ts, xs), dtype=float)
        if np.max(np.abs(vals)) > m + 1e-12:
            out.append(f"{name} exceeds the declared bound {m:g}")
        dx = 1e-5 * (x_hi - x_lo)
        quot = np.abs(np.asarray(fn(ts, xs + dx), dtype=float) - vals) / dx
        if np.max(quot) > m + 1e-6:
            out.append(f"{name} difference quotients exceed the declared "
                       f"bound {m:g}")

    u_vals = np.asarray(prob.terminal.eval(xs), dtype=float)
    if np.max(np.abs(u_vals)) > m + 1e-12:
        out.append(f"terminal datum exceeds the declared bound {m:g}")
    dx = 1e-6 * (x_hi - x_lo)
    u_quot = np.abs(np.asarray(prob.terminal.eval(xs + dx), dtype=float)
                    - u_vals) / dx
    if np.max(u_quot) > prob.terminal.lip_const + 1e-6:
        out.append(f"terminal datum steeper than the declared Lipschitz "
                   f"constant {prob.terminal.lip_const:g}")

    ham = prob.hamiltonian
    for _ in range(n_samples):
        t = float(rng.uniform(t_lo, t_hi))
        x = float(rng.uniform(x_lo, x_hi))
        p1, p2 = rng.uniform(-6.0, 6.0, 2)
        mid = 0.5 * (float(ham.eval(t, x, p1)) + float(ham.eval(t, x, p2)))
        if float(ham.eval(t, x, 0.5 * (p1 + p2))) > mid + 1e-10:
            out.append(f"H fails midpoint convexity at (t={t:.3g}, "
                       f"x={x:.3g})")
            break
    for y in (0.5, 1.0, 4.0):
        radius = max(float(ham.coercivity_radius(y)), 1e-9)
        for sign in (-1.0, 1.0):
            p = sign * radius * 1.0000001
            t = float(rng.uniform(t_lo, t_hi))
            x = float(rng.uniform(x_lo, x_hi))
            if float(ham.eval(t, x, p)) / abs(p) < y - 1e-9:
                out.append(f"H/|p| below {y:g} at |p|=K_H({y:g}): the "
                           f"declared coercivity radius is too small")
    return out
