"""SGD training loop and the model interface the federated engine depends on."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from ..datahub.dataset import WindowedDataset
from ..exceptions import ConfigurationError, DataError
from ..params import ModelParams
from . import convnet


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    local_epochs: int = 1
    batch_size: int = 32
    prox_mu: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be nonnegative, got {self.learning_rate}")
        if self.local_epochs < 1:
            raise ConfigurationError(f"local_epochs must be >= 1, got {self.local_epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.prox_mu < 0:
            raise ConfigurationError(f"prox_mu must be nonnegative, got {self.prox_mu}")

    def to_dict(self) -> dict:
        return asdict(self)


@runtime_checkable
class Model(Protocol):
    """Anything the federated engine can train and the attacker can query."""

    n_classes: int

    def init_params(self, seed: int) -> ModelParams: ...

    def loss_and_grads(self, params, X, y, prox_mu=0.0, global_ref=None, dropout_seed=0): ...

    def predict_proba(self, params, X) -> np.ndarray: ...


class ConvNet:
    """Binds a :class:`ConvNetSpec` to the :class:`Model` interface."""

    def __init__(self, spec: convnet.ConvNetSpec):
        self.spec = spec

    @property
    def n_classes(self) -> int:
        return self.spec.classes

    def init_params(self, seed: int) -> ModelParams:
        return convnet.init_params(self.spec, seed)

    def loss_and_grads(self, params, X, y, prox_mu=0.0, global_ref=None, dropout_seed=0):
        return convnet.loss_and_grads(
            params, self.spec, X, y, prox_mu=prox_mu, global_ref=global_ref, dropout_seed=dropout_seed
        )

    def predict_proba(self, params, X) -> np.ndarray:
        return convnet.predict_proba(params, self.spec, X)

    def __repr__(self) -> str:
        return f"ConvNet({self.spec!r})"


def as_model(model_or_spec) -> Model:
    if isinstance(model_or_spec, convnet.ConvNetSpec):
        return ConvNet(model_or_spec)
    return model_or_spec


def sgd_step(params: ModelParams, grads: ModelParams, learning_rate: float) -> ModelParams:
    """``params - learning_rate * grads``; raises ShapeError on layout mismatch."""
    return params.axpy(-learning_rate, grads)


def local_train(
    params: ModelParams,
    model,
    dataset: WindowedDataset,
    cfg: TrainConfig,
    global_ref: ModelParams | None = None,
) -> ModelParams:
    """Run ``cfg.local_epochs`` epochs of shuffled mini-batch SGD.

    Shuffling and dropout masks are drawn from ``cfg.rng_seed`` only, so the
    result is a pure function of the arguments. ``params`` is not modified.
    """
    if len(dataset) == 0:
        raise DataError("cannot train on an empty dataset")
    model = as_model(model)
    if cfg.prox_mu > 0 and global_ref is None:
        raise ConfigurationError("prox_mu > 0 requires a global reference model")
    rng = np.random.default_rng(cfg.rng_seed)
    current = params.copy()
    n = len(dataset)
    for _ in range(cfg.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            dropout_seed = int(rng.integers(2**63))
            _, grads = model.loss_and_grads(
                current,
                dataset.windows[idx],
                dataset.labels[idx],
                prox_mu=cfg.prox_mu,
                global_ref=global_ref,
                dropout_seed=dropout_seed,
            )
            current = sgd_step(current, grads, cfg.learning_rate)
    return current
