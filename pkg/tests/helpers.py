"""Independent oracles shared by the test modules.

Nothing here calls into the package's own hypervolume, kernel or gradient
code; each oracle recomputes its quantity from definitions.
"""

import itertools

import numpy as np


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def rel_err(a, b):
    """Infinity-norm relative error of ``a`` against the reference ``b``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = np.max(np.abs(b))
    if scale == 0.0:
        return float(np.max(np.abs(a)))
    return float(np.max(np.abs(a - b)) / scale)


def brute_non_dominated(P):
    """O(n^2) dominance filter keeping first copies of duplicates."""
    P = np.asarray(P, float)
    keep = []
    for i, p in enumerate(P):
        dominated = any(np.all(q <= p) and np.any(q < p) for q in P)
        dup = any(np.array_equal(P[j], p) for j in keep)
        if not dominated and not dup:
            keep.append(i)
    return P[keep]


def inclusion_exclusion_hv(front, ref):
    """Union volume of the boxes [p, ref] by inclusion-exclusion."""
    P = [np.asarray(p, float) for p in front if np.all(np.asarray(p) < ref)]
    total = 0.0
    for k in range(1, len(P) + 1):
        for subset in itertools.combinations(P, k):
            corner = np.max(subset, axis=0)
            total += (-1) ** (k + 1) * np.prod(np.maximum(ref - corner, 0.0))
    return float(total)


def monte_carlo_hv(front, ref, n, rng):
    """Monte Carlo hypervolume estimate and its standard error."""
    front = np.asarray(front, float)
    lo = front.min(axis=0)
    box = np.prod(ref - lo)
    U = rng.uniform(lo, ref, (n, len(ref)))
    hit = np.zeros(n, bool)
    for p in front:
        hit |= np.all(U >= p, axis=1)
    frac = hit.mean()
    return box * frac, box * np.sqrt(frac * (1.0 - frac) / n)


def dense_posterior(X, y, Xq, lengthscale, signal_variance, noise_variance):
    """Exact GP posterior (standardized targets) by dense linear solves."""
    def k(A, B):
        d2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=2)
        return signal_variance * np.exp(-0.5 * d2 / lengthscale**2)

    K = k(X, X) + noise_variance * np.eye(len(X))
    Ks = k(Xq, X)
    mean = Ks @ np.linalg.solve(K, y)
    var = signal_variance - np.einsum("qn,nq->q", Ks, np.linalg.solve(K, Ks.T))
    return mean, np.sqrt(np.maximum(var, 1e-12))


def rbf(a, b, c):
    return float(np.exp(-0.5 * np.sum((np.asarray(a) - np.asarray(b)) ** 2) / c**2))


class QuadraticStub:
    """Analytic surrogate ``F_j(x) = sum_k w_jk (x_k - c_jk)^2`` with exact Jacobian."""

    def __init__(self, centers, weights):
        self.c = np.asarray(centers, float)
        self.w = np.asarray(weights, float)

    def __call__(self, X):
        X = np.atleast_2d(X)
        D = X[:, None, :] - self.c[None, :, :]
        return np.sum(self.w * D**2, axis=2), 2.0 * self.w * D

    def values(self, X):
        return self(X)[0]
