"""Minimal numpy neural-network core for the HAR classifier."""

from .convnet import (
    ConvNetSpec,
    cross_entropy,
    forward,
    init_params,
    loss_and_grads,
    param_layout,
    predict_proba,
)
from .estimator import ConvNetClassifier
from .train import ConvNet, Model, TrainConfig, as_model, local_train, sgd_step

__all__ = [
    "ConvNet",
    "ConvNetClassifier",
    "ConvNetSpec",
    "Model",
    "TrainConfig",
    "as_model",
    "cross_entropy",
    "forward",
    "init_params",
    "local_train",
    "loss_and_grads",
    "param_layout",
    "predict_proba",
    "sgd_step",
]
