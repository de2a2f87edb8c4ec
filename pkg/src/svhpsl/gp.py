"""Exact Gaussian-process regression with analytic input gradients.

The kernel is an isotropic squared exponential,
``k(x, x') = s2 * exp(-|x - x'|^2 / (2 l^2))``, on inputs that the caller has
already normalized to the unit box. Targets are standardized per fit.
Hyperparameters ``(l, s2, noise)`` are fitted by multi-start gradient ascent
on the log marginal likelihood in log space.
"""

import logging

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import NumericalFailureError
from .validation import check_matrix, check_targets

logger = logging.getLogger(__name__)

LENGTHSCALE_BOUNDS = (1e-2, 10.0)
SIGNAL_BOUNDS = (1e-3, 10.0)
NOISE_BOUNDS = (1e-6, 1e-1)
JITTER_LADDER = (0.0, 1e-8, 1e-6, 1e-4)
VAR_FLOOR = 1e-12

_LOG_LO = np.log([LENGTHSCALE_BOUNDS[0], SIGNAL_BOUNDS[0], NOISE_BOUNDS[0]])
_LOG_HI = np.log([LENGTHSCALE_BOUNDS[1], SIGNAL_BOUNDS[1], NOISE_BOUNDS[1]])


def se_kernel(A, B, lengthscale, signal_variance):
    d2 = np.sum(A**2, 1)[:, None] + np.sum(B**2, 1)[None, :] - 2.0 * A @ B.T
    np.maximum(d2, 0.0, out=d2)
    return signal_variance * np.exp(-0.5 * d2 / lengthscale**2)


def _sq_dists(A, B):
    d2 = np.sum(A**2, 1)[:, None] + np.sum(B**2, 1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def _dedupe_keep_last(X, y):
    rev = X[::-1]
    _, first_in_rev = np.unique(rev, axis=0, return_index=True)
    keep = np.sort(len(X) - 1 - first_in_rev)
    return X[keep], y[keep]


class GaussianProcess(RegressorMixin, BaseEstimator):
    """Exact GP regressor on unit-box inputs.

    Parameters
    ----------
    lengthscale, signal_variance, noise_variance : float or None
        Starting values (or fixed values when ``optimize=False``). A ``None``
        lengthscale starts at ``sqrt(n_features) / 2``.
    optimize : bool
        Fit hyperparameters by maximizing the log marginal likelihood.
    n_restarts : int
        Number of ascent starts. The first uses the values above; the rest
        are drawn log-uniformly inside the bounds from ``random_state``.
    n_steps, step_size : int, float
        Ascent iterations per start and the initial step (halved on failure).
    """

    def __init__(
        self,
        lengthscale=None,
        signal_variance=1.0,
        noise_variance=1e-6,
        optimize=True,
        n_restarts=4,
        n_steps=64,
        step_size=0.05,
        random_state=None,
    ):
        self.lengthscale = lengthscale
        self.signal_variance = signal_variance
        self.noise_variance = noise_variance
        self.optimize = optimize
        self.n_restarts = n_restarts
        self.n_steps = n_steps
        self.step_size = step_size
        self.random_state = random_state

    # -- fitting -----------------------------------------------------------

    def fit(self, X, y):
        X = check_matrix(X, "X")
        y = check_targets(y, len(X))
        X, y = _dedupe_keep_last(X, y)
        if len(X) < 2:
            raise ValueError("GaussianProcess.fit needs at least 2 distinct points")
        self.X_train_ = X
        self.n_features_in_ = X.shape[1]
        self.y_mean_ = float(np.mean(y))
        std = float(np.std(y))
        self.y_std_ = std if std > 1e-12 * max(1.0, abs(self.y_mean_)) else 1.0
        self.y_train_ = (y - self.y_mean_) / self.y_std_
        self._d2 = _sq_dists(X, X)

        ls0 = self.lengthscale if self.lengthscale is not None else 0.5 * np.sqrt(X.shape[1])
        p0 = np.log([ls0, self.signal_variance, self.noise_variance])
        self.init_params_ = np.clip(p0, _LOG_LO, _LOG_HI) if self.optimize else p0
        self.init_log_marginal_likelihood_ = self._lml(self.init_params_)[0]
        if self.optimize:
            params = self._ascend()
        else:
            params = p0
        self.lengthscale_, self.signal_variance_, self.noise_variance_ = np.exp(params)
        self._factorize()
        self.log_marginal_likelihood_value_ = self.log_marginal_likelihood()
        self.n_std_floor_hits_ = 0
        return self

    def _ascend(self):
        rng = np.random.default_rng(self.random_state)
        starts = [self.init_params_]
        for _ in range(max(self.n_restarts, 1) - 1):
            p = rng.uniform(_LOG_LO, _LOG_HI)
            p[2] = rng.uniform(_LOG_LO[2], np.log(1e-2))
            starts.append(p)
        best_p, best_v = self.init_params_, self.init_log_marginal_likelihood_
        for p in starts:
            p, v = self._ascend_from(p)
            if v > best_v:
                best_p, best_v = p, v
        return best_p

    def _ascend_from(self, p):
        val, grad = self._lml(p)
        if not np.isfinite(val):
            return p, -np.inf
        for _ in range(self.n_steps):
            step = self.step_size
            improved = False
            for _ in range(20):
                q = np.clip(p + step * grad, _LOG_LO, _LOG_HI)
                qv, qg = self._lml(q)
                if np.isfinite(qv) and qv > val:
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
            p, val, grad = q, qv, qg
        return p, val

    def _lml(self, p):
        """Log marginal likelihood and its gradient w.r.t. log-hyperparameters."""
        ls, s2, noise = np.exp(p)
        E = np.exp(-0.5 * self._d2 / ls**2)
        Kse = s2 * E
        n = len(self.y_train_)
        K = Kse + noise * np.eye(n)
        try:
            L = cholesky(K, lower=True, check_finite=False)
        except LinAlgError:
            return -np.inf, np.zeros(3)
        alpha = cho_solve((L, True), self.y_train_, check_finite=False)
        val = (
            -0.5 * self.y_train_ @ alpha
            - np.sum(np.log(np.diag(L)))
            - 0.5 * n * np.log(2.0 * np.pi)
        )
        W = np.outer(alpha, alpha) - cho_solve((L, True), np.eye(n), check_finite=False)
        dK_dls = Kse * self._d2 / ls**2
        grad = 0.5 * np.array([
            np.sum(W * dK_dls),
            np.sum(W * Kse),
            noise * np.trace(W),
        ])
        return float(val), grad

    def log_marginal_likelihood(self, theta=None):
        """LML at log-hyperparameters ``theta`` (defaults to the fitted ones)."""
        check_is_fitted(self, "X_train_")
        if theta is None:
            theta = np.log([self.lengthscale_, self.signal_variance_, self.noise_variance_])
        return self._lml(np.asarray(theta, float))[0]

    def _factorize(self):
        n = len(self.X_train_)
        K = self.signal_variance_ * np.exp(-0.5 * self._d2 / self.lengthscale_**2)
        K[np.diag_indices(n)] += self.noise_variance_
        for jitter in JITTER_LADDER:
            try:
                L = cholesky(K + jitter * np.eye(n), lower=True, check_finite=False)
            except LinAlgError:
                continue
            if not np.all(np.isfinite(L)):
                continue
            if jitter:
                logger.warning("GP factorization needed jitter %g", jitter)
            self.jitter_ = jitter
            self.L_ = L
            self.alpha_ = cho_solve((L, True), self.y_train_, check_finite=False)
            return
        raise NumericalFailureError(
            f"Cholesky failed even with jitter {JITTER_LADDER[-1]} "
            f"(lengthscale={self.lengthscale_:.3g}, noise={self.noise_variance_:.3g})"
        )

    # -- prediction --------------------------------------------------------

    def _cross(self, X):
        return se_kernel(X, self.X_train_, self.lengthscale_, self.signal_variance_)

    def predict(self, X, return_std=False):
        """Posterior mean (and standard deviation) in original target units."""
        check_is_fitted(self, "L_")
        X = check_matrix(X, "X", n_features=self.n_features_in_)
        Ks = self._cross(X)
        mean = self.y_mean_ + self.y_std_ * (Ks @ self.alpha_)
        if not return_std:
            return mean
        V = solve_triangular(self.L_, Ks.T, lower=True, check_finite=False)
        var = np.maximum(self.signal_variance_ - np.sum(V**2, axis=0), VAR_FLOOR)
        return mean, self.y_std_ * np.sqrt(var)

    def predict_grad(self, X):
        """Posterior mean, std and their gradients w.r.t. the inputs.

        Returns ``mean (Q,), std (Q,), dmean (Q, d), dstd (Q, d)``. Where the
        latent variance sits at the floor the std gradient is set to zero and
        ``n_std_floor_hits_`` is incremented.
        """
        check_is_fitted(self, "L_")
        X = check_matrix(X, "X", n_features=self.n_features_in_)
        Ks = self._cross(X)
        diff = X[:, None, :] - self.X_train_[None, :, :]
        dKs = -(Ks[:, :, None] * diff) / self.lengthscale_**2
        mean = self.y_mean_ + self.y_std_ * (Ks @ self.alpha_)
        dmean = self.y_std_ * np.einsum("qnd,n->qd", dKs, self.alpha_)
        # same arithmetic as predict() so values agree bitwise
        V = solve_triangular(self.L_, Ks.T, lower=True, check_finite=False)
        var_raw = self.signal_variance_ - np.sum(V**2, axis=0)
        Kinv_k = cho_solve((self.L_, True), Ks.T, check_finite=False)
        floor = var_raw <= VAR_FLOOR
        var = np.maximum(var_raw, VAR_FLOOR)
        sd = np.sqrt(var)
        dvar = -2.0 * np.einsum("qnd,nq->qd", dKs, Kinv_k)
        dstd = self.y_std_ * dvar / (2.0 * sd[:, None])
        if np.any(floor):
            dstd[floor] = 0.0
            self.n_std_floor_hits_ += int(floor.sum())
        return mean, self.y_std_ * sd, dmean, dstd

    @property
    def hyperparameters_(self):
        check_is_fitted(self, "L_")
        return {
            "lengthscale": float(self.lengthscale_),
            "signal_variance": float(self.signal_variance_),
            "noise_variance": float(self.noise_variance_),
            "jitter": float(self.jitter_),
            "log_marginal_likelihood": float(self.log_marginal_likelihood_value_),
        }


class SurrogateBundle:
    """One GP per objective behind a box normalizer, exposing the LCB surrogate
    ``mean - lcb_lambda * std`` in original decision coordinates."""

    def __init__(self, lower, upper, lcb_lambda=2.0, gp_params=None):
        self.lower = np.asarray(lower, float)
        self.upper = np.asarray(upper, float)
        self.scale = self.upper - self.lower
        if np.any(self.scale <= 0):
            raise ValueError("normalizer needs lower < upper in every coordinate")
        if lcb_lambda < 0:
            raise ValueError("lcb_lambda must be non-negative")
        self.lcb_lambda = float(lcb_lambda)
        self.gp_params = dict(gp_params or {})
        self.gps = []

    def normalize(self, X):
        return (np.asarray(X, float) - self.lower) / self.scale

    def denormalize(self, U):
        return self.lower + np.asarray(U, float) * self.scale

    def fit(self, X, Y, random_state=None):
        U = self.normalize(X)
        Y = np.atleast_2d(np.asarray(Y, float))
        if not isinstance(random_state, np.random.SeedSequence):
            random_state = np.random.SeedSequence(random_state)
        seeds = random_state.spawn(Y.shape[1])
        self.gps = [
            GaussianProcess(**self.gp_params, random_state=np.random.default_rng(s)).fit(U, Y[:, j])
            for j, s in enumerate(seeds)
        ]
        return self

    @property
    def n_obj(self):
        return len(self.gps)

    def predict(self, X):
        """Posterior means and stds, each shaped (Q, m)."""
        U = self.normalize(np.atleast_2d(X))
        out = [gp.predict(U, return_std=True) for gp in self.gps]
        return np.column_stack([o[0] for o in out]), np.column_stack([o[1] for o in out])

    def lcb_values(self, X):
        mean, std = self.predict(X)
        return mean - self.lcb_lambda * std

    def lcb_with_jacobian(self, X):
        """LCB values (Q, m) and their Jacobians w.r.t. x, shaped (Q, m, n)."""
        U = self.normalize(np.atleast_2d(X))
        vals, jacs = [], []
        for gp in self.gps:
            mean, std, dmean, dstd = gp.predict_grad(U)
            vals.append(mean - self.lcb_lambda * std)
            jacs.append((dmean - self.lcb_lambda * dstd) / self.scale)
        return np.column_stack(vals), np.stack(jacs, axis=1)

    def std_floor_hits(self):
        return int(sum(gp.n_std_floor_hits_ for gp in self.gps))

    def hyperparameters(self):
        return [gp.hyperparameters_ for gp in self.gps]


def lcb(bundle, x, objective_index):
    """LCB value of one objective at ``x`` and its gradient in box coordinates."""
    if not 0 <= objective_index < bundle.n_obj:
        raise IndexError(f"objective_index {objective_index} out of range")
    vals, jac = bundle.lcb_with_jacobian(np.atleast_2d(x))
    return float(vals[0, objective_index]), jac[0, objective_index]
