"""Golden-section search, scalar and vectorized over independent lanes."""

from __future__ import annotations

import math

import numpy as np

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_min_vec(f, a, b, tol, max_iter=200):
    """Minimize f lane-wise on brackets [a, b] by golden-section.

    f maps an array of query points (one per lane) to an array of values.
    Lanes whose bracket has shrunk below tol are frozen so results do not
    depend on how long other lanes keep iterating.  Returns the best point
    and value ever evaluated per lane.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    tol = np.broadcast_to(np.asarray(tol, dtype=float), a.shape)
    span = b - a
    c = b - INVPHI * span
    d = a + INVPHI * span
    fc = np.asarray(f(c), dtype=float)
    fd = np.asarray(f(d), dtype=float)
    take_c = fc <= fd
    best_y = np.where(take_c, c, d)
    best_f = np.where(take_c, fc, fd)

    active = (b - a) > tol
    it = 0
    while np.any(active) and it < max_iter:
        it += 1
        go_left = fc < fd
        new_b = np.where(go_left, d, b)
        new_a = np.where(go_left, a, c)
        width = new_b - new_a
        new_c = np.where(go_left, new_b - INVPHI * width, d)
        new_d = np.where(go_left, c, new_a + INVPHI * width)
        probe = np.where(go_left, new_c, new_d)
        fe = np.asarray(f(np.where(active, probe, best_y)), dtype=float)
        new_fc = np.where(go_left, fe, fd)
        new_fd = np.where(go_left, fc, fe)

        a = np.where(active, new_a, a)
        b = np.where(active, new_b, b)
        c = np.where(active, new_c, c)
        d = np.where(active, new_d, d)
        fc = np.where(active, new_fc, fc)
        fd = np.where(active, new_fd, fd)

        better = active & (fe < best_f)
        best_y = np.where(better, probe, best_y)
        best_f = np.where(better, fe, best_f)
        active = active & ((b - a) > tol)
    return best_y, best_f


def golden_max_scalar(f, a, b, tol, max_iter=200):
    """Maximize a scalar function on [a, b]; returns (argmax, max)."""
    y, neg = golden_min_vec(lambda p: -f(p), np.array([a]), np.array([b]),
                            np.array([tol]), max_iter=max_iter)
    return float(y[0]), float(-neg[0])


def golden_min_scalar(f, a, b, tol, max_iter=200):
    y, v = golden_min_vec(f, np.array([a]), np.array([b]), np.array([tol]),
                          max_iter=max_iter)
    return float(y[0]), float(v[0])
