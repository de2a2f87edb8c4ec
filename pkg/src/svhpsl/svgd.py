"""Stein variational update for the Pareto set model.

Particles are surrogate objective vectors ``F_i`` of K decoded preferences.
Each training step combines a kernel-weighted driving term (the Chebyshev
gradient of every particle) with a kernel-gradient repulsion term, both
pulled back to the shared network parameters.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalFailureError
from .model import scalarized_terms
from .scalarize import chebyshev_grad

BANDWIDTH_FLOOR = 1e-8


@dataclass
class KernelMatrix:
    k_vals: np.ndarray  # (K, K)
    dk_dF: np.ndarray  # (K, K, m), gradient w.r.t. the row particle
    bandwidth: np.ndarray  # scalar for the global kernel, (m,) for the local one


@dataclass
class ParticleSet:
    prefs: np.ndarray  # (K, m)
    xs: np.ndarray  # (K, n)
    Fs: np.ndarray  # (K, m)
    argmax_idx: np.ndarray  # (K,)
    g_values: np.ndarray  # (K,)
    g_grads: np.ndarray  # (K, P)
    jacobians: np.ndarray  # (K, m, n), dF/dx
    model: object = None
    cache: tuple = None

    @property
    def K(self):
        return len(self.Fs)

    def pullback(self, i, v):
        """Gradient w.r.t. theta of ``v . F_i`` (chain through surrogate and net)."""
        acts, dsq, theta = self.cache
        row = ([a[i:i + 1] for a in acts], dsq[i:i + 1], theta)
        dX = (v @ self.jacobians[i])[None, :]
        return self.model.backward(row, dX)

    def pullback_all(self, V):
        """Sum over particles of :meth:`pullback` in one reverse pass."""
        dX = np.einsum("km,kmn->kn", V, self.jacobians)
        return self.model.backward(self.cache, dX)


def build_particles(model, R, surrogate, z):
    """Decode K preferences and collect everything the update needs."""
    R = np.atleast_2d(np.asarray(R, float))
    g, idx, F, J, X, cache = scalarized_terms(model, R, surrogate, z)
    dF = chebyshev_grad(F, R, z, idx)
    dX = np.einsum("km,kmn->kn", dF, J)
    g_grads = model.backward(cache, dX, per_sample=True)
    return ParticleSet(R, X, F, idx, g, g_grads, J, model, cache)


def median_bandwidth(dists):
    """Median of the pairwise distances, floored away from zero."""
    if dists.size == 0:
        return 1.0
    return max(float(np.median(dists)), BANDWIDTH_FLOOR)


def global_kernel(Fs, bandwidth=None):
    """Gaussian kernel on full objective vectors, median-heuristic bandwidth."""
    F = np.atleast_2d(np.asarray(Fs, float))
    K = len(F)
    diff = F[:, None, :] - F[None, :, :]
    d2 = np.sum(diff**2, axis=2)
    if bandwidth is None:
        iu = np.triu_indices(K, 1)
        bandwidth = median_bandwidth(np.sqrt(d2[iu]))
    c2 = bandwidth**2
    k = np.exp(-0.5 * d2 / c2)
    dk = -k[:, :, None] * diff / c2
    return KernelMatrix(k, dk, np.asarray(bandwidth, float))


def local_kernel(Fs, argmax_idx, bandwidths=None):
    """Per-objective Gaussian kernel gated by each row's Chebyshev branch.

    Row ``i`` compares particles only along objective ``a = argmax_idx[i]``
    with a 1-D Gaussian whose bandwidth is the median pairwise distance of
    all particles along ``a``. The matrix is therefore not symmetric when
    rows sit on different branches.
    """
    F = np.atleast_2d(np.asarray(Fs, float))
    K, m = F.shape
    idx = np.asarray(argmax_idx, dtype=int)
    if bandwidths is None:
        iu = np.triu_indices(K, 1)
        bandwidths = np.array(
            [median_bandwidth(np.abs(F[:, None, a] - F[None, :, a])[iu]) for a in range(m)]
        )
    bandwidths = np.asarray(bandwidths, float)
    rows = np.arange(K)
    diff = F[rows, idx][:, None] - F[:, idx].T  # (K, K): F_i[a_i] - F_j[a_i]
    c2 = bandwidths[idx][:, None] ** 2
    k = np.exp(-0.5 * diff**2 / c2)
    dk = np.zeros((K, K, m))
    dk[rows, :, idx] = -k * diff / c2
    return KernelMatrix(k, dk, bandwidths)


def particle_kernel(particles, kind="local"):
    if kind == "local":
        return local_kernel(particles.Fs, particles.argmax_idx)
    if kind == "global":
        return global_kernel(particles.Fs)
    raise ValueError(f"unknown kernel {kind!r}; expected 'local' or 'global'")


def svh_gradient(particles, kernel, alpha, dF_dtheta_apply=None):
    """Parameter gradient of one Stein variational hypernetwork step.

    ``(1/K) sum_i sum_j [ k_ij * grad g_i  -  alpha * grad_partner k_ij ]``

    The kernel gradient is taken w.r.t. the partner argument, as in SVGD,
    which for these Gaussian kernels is ``-dk_dF[i, j]``; it is chained to
    theta through particle ``i`` only. Descending this gradient drives each
    particle along its own Chebyshev direction and pushes it away from its
    neighbours in objective space.

    ``dF_dtheta_apply(i, v)`` maps an objective-space vector at particle
    ``i`` to a parameter gradient; by default the particle set's own reverse
    pass is used.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    k = kernel.k_vals
    dk = kernel.dk_dF
    K = particles.K
    bad = ~np.isfinite(k) | ~np.all(np.isfinite(dk), axis=2)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NumericalFailureError(f"non-finite kernel entry for particle pair ({i}, {j})")
    bad_g = ~np.all(np.isfinite(particles.g_grads), axis=1)
    if bad_g.any():
        i = int(np.flatnonzero(bad_g)[0])
        raise NumericalFailureError(f"non-finite driving gradient for particle pair ({i}, *)")

    weights = k.sum(axis=1)
    grad = weights @ particles.g_grads
    if alpha > 0:
        repulse = dk.sum(axis=1)  # (K, m)
        if dF_dtheta_apply is None:
            grad = grad + alpha * particles.pullback_all(repulse)
        else:
            for i in range(K):
                grad = grad + alpha * dF_dtheta_apply(i, repulse[i])
    if not np.all(np.isfinite(grad)):
        raise NumericalFailureError("non-finite update after reduction")
    return grad / K
