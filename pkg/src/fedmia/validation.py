"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length

from .exceptions import ShapeError


def check_windows(X, n_channels=None, window_len=None):
    """Validate a (N, C, T) window batch and return it as float64."""
    X = check_array(X, ensure_2d=False, allow_nd=True, dtype=np.float64)
    if X.ndim != 3:
        raise ShapeError(f"expected windows of shape (N, C, T), got {X.shape}")
    if n_channels is not None and X.shape[1] != n_channels:
        raise ShapeError(f"expected {n_channels} channels, got {X.shape[1]}")
    if window_len is not None and X.shape[2] != window_len:
        raise ShapeError(f"expected window length {window_len}, got {X.shape[2]}")
    return X


def check_windows_labels(X, y):
    X = check_windows(X)
    y = np.asarray(y)
    if y.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got shape {y.shape}")
    check_consistent_length(X, y)
    return X, y


def check_feature_matrix(X, n_features=None):
    """Validate a dense 2-D feature matrix (e.g. sorted prediction vectors)."""
    X = check_array(X, dtype=np.float64)
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeError(f"expected {n_features} features, got {X.shape[1]}")
    return X
