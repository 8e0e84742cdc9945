"""Scikit-learn compatible wrapper around the numpy CNN."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..datahub.dataset import WindowedDataset
from ..validation import check_windows, check_windows_labels
from .convnet import ConvNetSpec, init_params, predict_proba
from .train import TrainConfig, local_train


class ConvNetClassifier(ClassifierMixin, BaseEstimator):
    """Centralised (single-client) training of the HAR CNN.

    Parameters
    ----------
    conv_blocks : sequence of (filters, kernel, pool)
    dense_hidden : int
    dropout_rate : float
    l2_lambda : float
    learning_rate : float
    epochs : int
        Passes over the training data.
    batch_size : int
    n_classes : int or None
        Width of the output layer; defaults to ``max(y) + 1``. Labels must be
        integer class ids.
    random_state : int
    """

    def __init__(
        self,
        conv_blocks=((32, 5, 2), (64, 5, 2)),
        dense_hidden=64,
        dropout_rate=0.0,
        l2_lambda=0.0,
        learning_rate=0.01,
        epochs=5,
        batch_size=32,
        n_classes=None,
        random_state=0,
    ):
        self.conv_blocks = conv_blocks
        self.dense_hidden = dense_hidden
        self.dropout_rate = dropout_rate
        self.l2_lambda = l2_lambda
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.n_classes = n_classes
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_windows_labels(X, y)
        y = y.astype(np.int64)
        n_classes = self.n_classes if self.n_classes is not None else int(y.max()) + 1
        self.spec_ = ConvNetSpec(
            in_channels=X.shape[1],
            window_len=X.shape[2],
            classes=max(n_classes, 2),
            conv_blocks=tuple(self.conv_blocks),
            dense_hidden=self.dense_hidden,
            dropout_rate=self.dropout_rate,
            l2_lambda=self.l2_lambda,
        )
        self.classes_ = np.arange(self.spec_.classes)
        cfg = TrainConfig(
            learning_rate=self.learning_rate,
            local_epochs=self.epochs,
            batch_size=self.batch_size,
            rng_seed=self.random_state,
        )
        params = init_params(self.spec_, seed=self.random_state)
        self.params_ = local_train(params, self.spec_, WindowedDataset.from_arrays(X, y), cfg)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        X = check_windows(X, self.spec_.in_channels, self.spec_.window_len)
        return predict_proba(self.params_, self.spec_, X)

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
