"""Chebyshev scalarization, ideal-point tracking and preference sampling."""

import numpy as np

PREF_FLOOR = 1e-6
IDEAL_MARGIN = 0.1


def sample_preferences(count, m, rng):
    """Draw ``count`` preference vectors from the flat Dirichlet Dir(1/m, ..., 1/m).

    Entries are floored at 1e-6 and renormalized so every preference lies in
    the open simplex.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(rng)
    R = rng.dirichlet(np.full(m, 1.0 / m), size=count)
    R = np.where(np.isfinite(R), R, 1.0 / m)
    R = np.maximum(R, PREF_FLOOR)
    return R / R.sum(axis=1, keepdims=True)


def simplex_grid(resolution, m=2):
    """Evenly spread preferences: r = (t, 1 - t) for 2 objectives.

    A single point is the simplex midpoint. For 3 objectives a triangular
    lattice with ``resolution`` points per edge is returned.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if resolution == 1:
        return np.full((1, m), 1.0 / m)
    if m == 2:
        t = np.linspace(0.0, 1.0, resolution)
        R = np.column_stack([t, 1.0 - t])
    elif m == 3:
        k = resolution - 1
        R = np.array([(i, j, k - i - j) for i in range(k + 1) for j in range(k + 1 - i)], float) / k
    else:
        raise ValueError("simplex_grid supports 2 or 3 objectives")
    R = np.maximum(R, PREF_FLOOR)
    return R / R.sum(axis=1, keepdims=True)


def chebyshev(f_hat, r, z):
    """Weighted Chebyshev value ``max_i r_i |f_i - z_i|`` and its argmax.

    Ties resolve to the lowest objective index.
    """
    terms = np.asarray(r, float) * np.abs(np.asarray(f_hat, float) - np.asarray(z, float))
    idx = int(np.argmax(terms))
    return float(terms[idx]), idx


def chebyshev_batch(F, R, z):
    """Row-wise :func:`chebyshev` for K objective vectors and K preferences."""
    terms = np.asarray(R, float) * np.abs(np.asarray(F, float) - np.asarray(z, float))
    idx = np.argmax(terms, axis=1)
    return terms[np.arange(len(idx)), idx], idx


def chebyshev_grad(F, R, z, idx=None):
    """Subgradient of the Chebyshev value w.r.t. each objective vector.

    Only the argmax branch carries weight; ``|.|`` contributes its sign, with
    a zero difference treated as positive.
    """
    F = np.atleast_2d(np.asarray(F, float))
    R = np.atleast_2d(np.asarray(R, float))
    if idx is None:
        _, idx = chebyshev_batch(F, R, z)
    rows = np.arange(len(F))
    diff = F[rows, idx] - np.asarray(z, float)[idx]
    G = np.zeros_like(F)
    G[rows, idx] = R[rows, idx] * np.where(diff < 0, -1.0, 1.0)
    return G


def ideal_point(observations, margin=IDEAL_MARGIN):
    """Componentwise minimum of observed objective vectors minus ``margin``."""
    Y = np.atleast_2d(np.asarray(observations, float))
    return Y.min(axis=0) - margin


def update_ideal(z, new_observations, margin=IDEAL_MARGIN):
    """Lower ``z`` wherever a new observation undercuts it by less than ``margin``."""
    Y = np.atleast_2d(np.asarray(new_observations, float))
    if Y.size == 0:
        return np.asarray(z, float).copy()
    return np.minimum(np.asarray(z, float), Y.min(axis=0) - margin)
