"""Input checks shared by the estimators."""

import numpy as np
from sklearn.utils import check_array


def check_matrix(X, name="X", n_features=None):
    X = check_array(X, dtype=np.float64, ensure_2d=True, input_name=name, ensure_min_samples=1)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"{name} has {X.shape[1]} features, expected {n_features}")
    return X


def check_targets(y, n_samples):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != n_samples:
        raise ValueError(f"y has {y.shape[0]} entries, expected {n_samples}")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite values")
    return y


def check_preferences(R, n_obj=None, tol=1e-9):
    """Validate preference rows: strictly positive and summing to one."""
    R = check_array(np.atleast_2d(np.asarray(R, dtype=np.float64)), input_name="preferences")
    if n_obj is not None and R.shape[1] != n_obj:
        raise ValueError(f"preferences have {R.shape[1]} entries, expected {n_obj}")
    if np.any(R <= 0):
        raise ValueError("preference entries must be strictly positive")
    if np.any(np.abs(R.sum(axis=1) - 1.0) > tol):
        raise ValueError("preference rows must sum to 1")
    return R
