"""Pareto set model: an MLP mapping preference vectors to decision vectors.

Architecture: ``m -> tanh(H) -> tanh(H) -> n`` followed by a logistic squash
scaled into the problem box. All parameters live in one flat float64 vector
so the optimizer and the particle updates can work on plain arrays.
"""

import json
import logging

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import CheckpointError
from .scalarize import chebyshev_batch, chebyshev_grad
from .validation import check_preferences

logger = logging.getLogger(__name__)

SQUASH_EPS = 1e-12
CHECKPOINT_MAGIC = "svhpsl-theta-v1"


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class ParetoSetModel(TransformerMixin, BaseEstimator):
    """Preference-conditioned decoder ``h(r | theta)``.

    ``fit`` only initializes parameters (hidden layers fan-in uniform, output
    layer zero so every preference starts at the box midpoint); training
    happens through :func:`scalarized_grad` / :func:`svh_gradient` and
    :class:`Adam`.
    """

    def __init__(self, n_var, n_obj=2, lower=0.0, upper=1.0, hidden=(256, 256), random_state=None):
        self.n_var = n_var
        self.n_obj = n_obj
        self.lower = lower
        self.upper = upper
        self.hidden = hidden
        self.random_state = random_state

    # -- parameter layout --------------------------------------------------

    def _shapes(self):
        dims = [self.n_obj, *self.hidden, self.n_var]
        shapes = []
        for a, b in zip(dims[:-1], dims[1:]):
            shapes += [(a, b), (b,)]
        return shapes

    def _views(self, flat):
        out, pos = [], 0
        for shp in self._shapes():
            size = int(np.prod(shp))
            out.append(flat[pos:pos + size].reshape(shp))
            pos += size
        return out

    @property
    def n_params(self):
        return sum(int(np.prod(s)) for s in self._shapes())

    def fit(self, R=None, y=None):
        if len(self.hidden) < 1:
            raise ValueError("hidden must list at least one layer width")
        lo = np.broadcast_to(np.asarray(self.lower, float), (self.n_var,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, float), (self.n_var,)).copy()
        if np.any(lo >= hi):
            raise ValueError("lower must be below upper in every coordinate")
        self.lower_ = lo
        self.span_ = hi - lo
        rng = np.random.default_rng(self.random_state)
        theta = np.zeros(self.n_params)
        views = self._views(theta)
        n_layers = len(views) // 2
        for k in range(n_layers - 1):
            W, b = views[2 * k], views[2 * k + 1]
            bound = 1.0 / np.sqrt(W.shape[0])
            W[...] = rng.uniform(-bound, bound, W.shape)
            b[...] = rng.uniform(-bound, bound, b.shape)
        self.theta_ = theta
        return self

    def set_theta(self, theta):
        theta = np.asarray(theta, float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"theta has shape {theta.shape}, expected ({self.n_params},)")
        if not hasattr(self, "theta_"):
            self.fit()
        self.theta_ = theta.copy()
        return self

    # -- forward / reverse -------------------------------------------------

    def forward(self, R, theta=None, return_cache=False):
        check_is_fitted(self, "theta_")
        R = np.atleast_2d(np.asarray(R, float))
        theta = self.theta_ if theta is None else np.asarray(theta, float)
        views = self._views(theta)
        acts = [R]
        h = R
        for k in range(len(views) // 2 - 1):
            h = np.tanh(h @ views[2 * k] + views[2 * k + 1])
            acts.append(h)
        z = h @ views[-2] + views[-1]
        s = _sigmoid(z)
        clipped = (s < SQUASH_EPS) | (s > 1.0 - SQUASH_EPS)
        s_c = np.clip(s, SQUASH_EPS, 1.0 - SQUASH_EPS)
        X = self.lower_ + self.span_ * s_c
        if return_cache:
            dsq = np.where(clipped, 0.0, s * (1.0 - s)) * self.span_
            return X, (acts, dsq, theta)
        return X

    def transform(self, R):
        """Decision vectors for each preference row."""
        R = check_preferences(R, self.n_obj)
        return self.forward(R)

    def backward(self, cache, dX, per_sample=False):
        """Pull decision-space cotangents ``dX`` (K, n) back to parameters.

        Returns the summed gradient (P,) or, with ``per_sample``, one row per
        preference (K, P).
        """
        acts, dsq, theta = cache
        views = self._views(theta)
        n_layers = len(views) // 2
        delta = np.asarray(dX, float) * dsq
        grads = [None] * len(views)
        for k in range(n_layers - 1, -1, -1):
            a = acts[k]
            if per_sample:
                grads[2 * k] = np.einsum("ki,kj->kij", a, delta).reshape(len(a), -1)
                grads[2 * k + 1] = delta
            else:
                grads[2 * k] = (a.T @ delta).reshape(-1)
                grads[2 * k + 1] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ views[2 * k].T) * (1.0 - a**2)
        axis = 1 if per_sample else 0
        return np.concatenate(grads, axis=axis)

    # -- checkpoints -------------------------------------------------------

    def save_checkpoint(self, path, **meta):
        """Write a one-line JSON header followed by theta as little-endian float64."""
        check_is_fitted(self, "theta_")
        header = {
            "format": CHECKPOINT_MAGIC,
            "n_var": self.n_var,
            "n_obj": self.n_obj,
            "hidden": list(self.hidden),
            "lower": self.lower_.tolist(),
            "upper": (self.lower_ + self.span_).tolist(),
            "n_params": self.n_params,
            **meta,
        }
        with open(path, "wb") as fh:
            fh.write((json.dumps(header) + "\n").encode())
            fh.write(self.theta_.astype("<f8").tobytes())

    @classmethod
    def load_checkpoint(cls, path):
        try:
            with open(path, "rb") as fh:
                header = json.loads(fh.readline().decode())
                payload = fh.read()
        except FileNotFoundError:
            raise CheckpointError(f"checkpoint {path} not found") from None
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise CheckpointError(f"{path} is not a model checkpoint") from None
        if header.get("format") != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not a model checkpoint")
        theta = np.frombuffer(payload, dtype="<f8").astype(float)
        if theta.size != header["n_params"]:
            raise CheckpointError(
                f"{path}: expected {header['n_params']} parameters, found {theta.size}"
            )
        model = cls(
            header["n_var"], header["n_obj"], np.array(header["lower"]),
            np.array(header["upper"]), tuple(header["hidden"]),
        ).fit()
        return model.set_theta(theta), header


class Adam:
    """Adaptive-moment first-order optimizer over a flat parameter vector.

    A step whose gradient holds any non-finite entry is skipped entirely and
    counted in ``skipped``.
    """

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None
        self.skipped = 0

    def step(self, theta, grad):
        grad = np.asarray(grad, float)
        if not np.all(np.isfinite(grad)):
            self.skipped += 1
            logger.warning("non-finite gradient; update skipped (%d so far)", self.skipped)
            return theta
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad**2
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def apply_update(model, dtheta, optimizer):
    """Advance ``model.theta_`` by one optimizer step; returns the model."""
    model.theta_ = optimizer.step(model.theta_, dtheta)
    return model


def scalarized_terms(model, R, surrogate, z):
    """Decode preferences and score them through the surrogate.

    ``surrogate`` is a :class:`~svhpsl.gp.SurrogateBundle` or any callable
    mapping decision rows (K, n) to ``(values (K, m), jacobian (K, m, n))``.
    Returns ``(g, idx, F, J, X, cache)``.
    """
    X, cache = model.forward(R, return_cache=True)
    F, J = getattr(surrogate, "lcb_with_jacobian", surrogate)(X)
    g, idx = chebyshev_batch(F, R, z)
    return g, idx, F, J, X, cache


def scalarized_grad(model, r, surrogate, z):
    """Chebyshev-of-LCB value at ``h(r)`` and its gradient w.r.t. theta.

    Returns ``(g_value, dtheta, F, argmax_index)``.
    """
    R = np.atleast_2d(r)
    g, idx, F, J, X, cache = scalarized_terms(model, R, surrogate, z)
    dF = chebyshev_grad(F, R, z, idx)
    dX = np.einsum("km,kmn->kn", dF, J)
    return float(g[0]), model.backward(cache, dX), F[0], int(idx[0])
