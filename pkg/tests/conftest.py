import numpy as np
import pytest

import splitsolve as ss


@pytest.fixture(scope="session")
def cole_hopf():
    return ss.cole_hopf_problem()


@pytest.fixture(scope="session")
def coarse_grid():
    return ss.uniform_grid(-15.0, 25.0, 0.05)


@pytest.fixture(scope="session")
def zero_diffusion_abs():
    """sigma=0, b=0, H=p^2/2, U=|x| on [-10, 10]: the Hopf-Lax oracle."""
    ham = ss.HamiltonianSpec(
        eval=lambda t, x, p: 0.5 * np.asarray(p, dtype=float) ** 2,
        coercivity_radius=lambda y: max(2.0 * y, 0.0),
        analytic_dual=lambda t, x, q: 0.5 * np.asarray(q, dtype=float) ** 2,
        tx_dependent=False)
    zero = lambda t, x: np.zeros_like(np.asarray(x, dtype=float))
    return ss.make_problem(
        ss.CoefficientField(sigma=zero, b=zero), ham,
        ss.TerminalDatum(eval=lambda x: np.abs(np.asarray(x, dtype=float)),
                         lip_const=1.0),
        horizon=1.0, x_domain=(-10.0, 10.0), m_bound=11.0, name="hopf-lax-abs")


def random_lipschitz(rng, xs, n_kinks=(4, 12), slope=2.0, bound=3.0,
                     min_gap=0.0):
    """Random bounded piecewise-linear function on the given grid.

    min_gap keeps kinks at least that far apart, so the function's
    feature scale stays above any smoothing radius a test sweeps.
    """
    nk = int(rng.integers(*n_kinks))
    if min_gap > 0:
        nk = min(nk, max(int((xs[-1] - xs[0]) / min_gap), 2))
        base = np.linspace(xs[0], xs[-1], nk)
        spacing = base[1] - base[0]
        kx = base + rng.uniform(-0.2 * spacing, 0.2 * spacing, size=nk)
    else:
        kx = np.sort(rng.uniform(xs[0], xs[-1], size=nk))
    kx[0], kx[-1] = xs[0], xs[-1]
    kv = np.cumsum(rng.uniform(-slope, slope, size=nk) * np.diff(
        np.concatenate([[xs[0]], kx]))[:nk])
    kv = np.clip(kv - kv.mean(), -bound, bound)
    return ss.GridFunction(xs, np.interp(xs, kx, kv))
