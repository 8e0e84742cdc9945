"""Federated training: client sampling, local SGD, unweighted FedAvg, FedProx.

An optional observer is called with every :class:`RoundRecord` after
aggregation and before the next round starts; this is where the curious
server looks at uploaded client models.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType

import numpy as np

from .datahub.dataset import WindowedDataset, concat
from .exceptions import ConfigurationError, DataError
from .nncore.train import TrainConfig, as_model, local_train
from .params import ModelParams, mean_params

logger = logging.getLogger(__name__)

ALGORITHMS = ("fedavg", "fedprox")


def default_sample_size(n_clients: int) -> int:
    return max(1, math.ceil(0.3 * n_clients))


@dataclass(frozen=True)
class FederatedConfig:
    n_clients: int
    rounds: int = 20
    sample_size: int | None = None
    algorithm: str = "fedavg"
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    sampling_seed: int = 0
    init_seed: int = 0

    def __post_init__(self):
        if self.sample_size is None:
            object.__setattr__(self, "sample_size", default_sample_size(self.n_clients))
        if self.n_clients < 1:
            raise ConfigurationError("n_clients must be >= 1")
        if not 1 <= self.sample_size <= self.n_clients:
            raise ConfigurationError(
                f"sample_size must lie in [1, {self.n_clients}], got {self.sample_size}"
            )
        if self.rounds < 1:
            raise ConfigurationError("rounds must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.algorithm == "fedprox" and self.train_cfg.prox_mu <= 0:
            logger.warning("fedprox with prox_mu=0 reduces to fedavg")
        if self.algorithm == "fedprox" and self.train_cfg.learning_rate * self.train_cfg.prox_mu >= 2:
            # the proximal pull alone multiplies the offset by (1 - lr*mu) per step
            logger.warning("learning_rate * prox_mu >= 2: local SGD will diverge")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    selected: tuple[int, ...]
    uploaded: MappingProxyType
    global_before: ModelParams = field(repr=False)
    global_after: ModelParams = field(repr=False)

    def __contains__(self, client_id: int) -> bool:
        return client_id in self.uploaded


def sample_clients(cfg: FederatedConfig, round: int, forced: int | None = None) -> tuple[int, ...]:
    """``sample_size`` distinct ids for ``round`` (1-based), plus ``forced`` if missing.

    The draw depends only on ``(sampling_seed, round)``, so forcing a client
    never perturbs what the other rounds would have selected.
    """
    if round < 1:
        raise ConfigurationError("rounds are numbered from 1")
    rng = np.random.default_rng([cfg.sampling_seed, round])
    chosen = set(int(c) for c in rng.choice(cfg.n_clients, size=cfg.sample_size, replace=False))
    if forced is not None:
        if not 0 <= forced < cfg.n_clients:
            raise ConfigurationError(f"forced client {forced} out of range")
        chosen.add(int(forced))
    return tuple(sorted(chosen))


def client_train_config(cfg: FederatedConfig, round: int, client: int) -> TrainConfig:
    seed = int(np.random.SeedSequence([cfg.train_cfg.rng_seed, round, client]).generate_state(1, np.uint64)[0])
    prox = cfg.train_cfg.prox_mu if cfg.algorithm == "fedprox" else 0.0
    return replace(cfg.train_cfg, rng_seed=seed, prox_mu=prox)


def run_round(
    global_params: ModelParams,
    clients: Sequence[WindowedDataset],
    selected: Sequence[int],
    cfg: FederatedConfig,
    model,
    round: int = 1,
) -> RoundRecord:
    """Distribute, train each selected client locally, and average the uploads."""
    model = as_model(model)
    for cid in selected:
        if len(clients[cid]) == 0:
            raise DataError(f"client {cid} has an empty dataset")
    uploaded = {}
    for cid in selected:
        ccfg = client_train_config(cfg, round, cid)
        ref = global_params if ccfg.prox_mu > 0 else None
        uploaded[cid] = local_train(global_params, model, clients[cid], ccfg, global_ref=ref)
    new_global = mean_params([uploaded[c] for c in selected])
    return RoundRecord(round, tuple(selected), MappingProxyType(uploaded), global_params, new_global)


Observer = Callable[[RoundRecord], None]


def run_training(
    cfg: FederatedConfig,
    clients: Sequence[WindowedDataset],
    model,
    observer: Observer | None = None,
    forced: dict[int, int] | None = None,
    initial: ModelParams | None = None,
) -> tuple[ModelParams, list[RoundRecord]]:
    """Run ``cfg.rounds`` rounds of federated training.

    Parameters
    ----------
    forced : mapping round -> client id
        Clients the server adds to the random draw of a given round.
    initial : ModelParams, optional
        Starting global model; defaults to ``model.init_params(cfg.init_seed)``.
    """
    if len(clients) != cfg.n_clients:
        raise ConfigurationError(f"expected {cfg.n_clients} client datasets, got {len(clients)}")
    model = as_model(model)
    forced = forced or {}
    global_params = initial.copy() if initial is not None else model.init_params(cfg.init_seed)
    history = []
    for e in range(1, cfg.rounds + 1):
        selected = sample_clients(cfg, e, forced.get(e))
        record = run_round(global_params, clients, selected, cfg, model, round=e)
        history.append(record)
        logger.debug("round %d: selected %s", e, list(selected))
        if observer is not None:
            observer(record)
        global_params = record.global_after
    return global_params, history


def evaluate(params: ModelParams, model, dataset: WindowedDataset, batch_size: int = 512):
    """(accuracy, mean cross-entropy) of ``params`` on ``dataset``."""
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    model = as_model(model)
    correct, loss = 0, 0.0
    for start in range(0, len(dataset), batch_size):
        X = dataset.windows[start : start + batch_size]
        y = dataset.labels[start : start + batch_size]
        probs = model.predict_proba(params, X)
        correct += int(np.sum(probs.argmax(axis=1) == y))
        loss += float(-np.log(np.maximum(probs[np.arange(len(y)), y], 1e-300)).sum())
    return correct / len(dataset), loss / len(dataset)


def evaluate_pooled(params, model, datasets) -> tuple[float, float]:
    return evaluate(params, model, concat(datasets))


def export_history(history: Sequence[RoundRecord], directory: str | Path, metrics: dict | None = None) -> Path:
    """Write ``round_XXX_client_YYY.bin`` / ``round_XXX_global.bin`` and ``manifest.jsonl``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    metrics = metrics or {}
    lines = []
    for rec in history:
        entry = {"round": rec.round, "selected": list(rec.selected), "uploads": {}}
        for cid, params in rec.uploaded.items():
            name = f"round_{rec.round:03d}_client_{cid:03d}.bin"
            params.save(directory / name)
            entry["uploads"][str(cid)] = name
        gname = f"round_{rec.round:03d}_global.bin"
        rec.global_after.save(directory / gname)
        entry["global_after"] = gname
        entry["metrics"] = metrics.get(rec.round, {})
        lines.append(json.dumps(entry, sort_keys=True))
    (directory / "manifest.jsonl").write_text("\n".join(lines) + "\n")
    return directory
