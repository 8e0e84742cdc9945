import json

import numpy as np
import pytest

from conftest import small_spec
from fedmia.datahub import SynthSpec, WindowedDataset, generate_synthetic, split_clients
from fedmia.exceptions import ConfigurationError, DataError
from fedmia.feder import (
    FederatedConfig,
    client_train_config,
    evaluate,
    evaluate_pooled,
    export_history,
    run_round,
    run_training,
    sample_clients,
)
from fedmia.nncore import ConvNet, ConvNetSpec, TrainConfig, local_train
from fedmia.params import ModelParams, mean_params


class PullModel:
    """Loss 0.5*||w - mean(X)||^2: one full-batch step at lr=1 lands on the client mean."""

    n_classes = 2

    def init_params(self, seed):
        return ModelParams({"w": np.zeros(1)})

    def loss_and_grads(self, params, X, y, prox_mu=0.0, global_ref=None, dropout_seed=0):
        diff = params["w"] - X.mean()
        grads = ModelParams({"w": diff.copy()})
        loss = 0.5 * float(diff @ diff)
        if prox_mu > 0:
            d = params["w"] - global_ref["w"]
            grads = grads.axpy(prox_mu, ModelParams({"w": d}))
            loss += 0.5 * prox_mu * float(d @ d)
        return loss, grads

    def predict_proba(self, params, X):
        return np.full((len(X), 2), 0.5)


def const_client(value, n=4):
    return WindowedDataset.from_arrays(np.full((n, 1, 2), float(value)), np.zeros(n, dtype=int))


def pull_cfg(n, m=None, **kw):
    return FederatedConfig(
        n_clients=n,
        sample_size=m,
        train_cfg=TrainConfig(learning_rate=1.0, batch_size=64, **kw.pop("train", {})),
        **kw,
    )


def test_full_participation_selects_everyone():
    cfg = pull_cfg(10, 10)
    for e in range(1, 6):
        assert sample_clients(cfg, e) == tuple(range(10))


def test_forced_client_is_added_without_disturbing_draw():
    cfg = pull_cfg(10, 3, sampling_seed=4)
    drawn = sample_clients(cfg, 1)
    j = next(c for c in range(10) if c not in drawn)
    forced = sample_clients(cfg, 1, forced=j)
    assert set(forced) == set(drawn) | {j} and len(forced) == 4
    assert sample_clients(cfg, 1) == drawn
    assert sample_clients(cfg, 2) == sample_clients(cfg, 2)


def test_default_sample_size_is_thirty_percent():
    assert FederatedConfig(n_clients=5).sample_size == 2
    assert FederatedConfig(n_clients=1).sample_size == 1
    with pytest.raises(ConfigurationError):
        FederatedConfig(n_clients=3, sample_size=4)
    with pytest.raises(ConfigurationError):
        FederatedConfig(n_clients=3, algorithm="fedsgd")


def test_mean_of_two_uploads():
    clients = [const_client(2.0), const_client(4.0)]
    rec = run_round(ModelParams({"w": [0.0]}), clients, (0, 1), pull_cfg(2, 2), PullModel())
    assert rec.uploaded[0]["w"][0] == 2.0 and rec.uploaded[1]["w"][0] == 4.0
    assert rec.global_after["w"][0] == 3.0


def test_single_upload_becomes_global():
    clients = [const_client(2.0), const_client(7.5)]
    rec = run_round(ModelParams({"w": [0.0]}), clients, (1,), pull_cfg(2, 1), PullModel())
    assert rec.global_after == rec.uploaded[1]


def test_empty_selected_client_is_a_data_error():
    clients = [const_client(1.0), const_client(1.0, n=0)]
    with pytest.raises(DataError):
        run_round(ModelParams({"w": [0.0]}), clients, (0, 1), pull_cfg(2, 2), PullModel())


def test_aggregation_matches_flat_mean_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 8))
        shapes = {"a": (int(rng.integers(1, 5)), 3), "b": (int(rng.integers(1, 4)),)}
        ups = [ModelParams({k: rng.normal(scale=10, size=s) for k, s in shapes.items()}) for _ in range(n)]
        flat = np.stack([u.flatten() for u in ups])
        oracle = flat.sum(axis=0) / n
        np.testing.assert_allclose(mean_params(ups).flatten(), oracle, rtol=0, atol=1e-12)


def _small_clients(n=3, heterogeneous=True, seed=0, per_class=12):
    clients = generate_synthetic(
        SynthSpec(n_clients=n, classes=3, channels=2, window_len=16, windows_per_class=per_class,
                  heterogeneous=heterogeneous, rng_seed=seed)
    )
    return [clients[i] for i in range(n)]


def test_fedprox_zero_mu_matches_fedavg_and_large_mu_stays_close():
    spec = small_spec()
    net = ConvNet(spec)
    clients = _small_clients()
    g = net.init_params(1)
    tc = dict(learning_rate=0.05, local_epochs=2, batch_size=8, rng_seed=5)
    avg = FederatedConfig(3, sample_size=3, train_cfg=TrainConfig(**tc))
    prox0 = FederatedConfig(3, sample_size=3, algorithm="fedprox", train_cfg=TrainConfig(prox_mu=0.0, **tc))
    prox10 = FederatedConfig(3, sample_size=3, algorithm="fedprox", train_cfg=TrainConfig(prox_mu=10.0, **tc))
    a = run_round(g, clients, (0, 1, 2), avg, net)
    b = run_round(g, clients, (0, 1, 2), prox0, net)
    c = run_round(g, clients, (0, 1, 2), prox10, net)
    for cid in range(3):
        np.testing.assert_allclose(b.uploaded[cid].flatten(), a.uploaded[cid].flatten(), rtol=0, atol=1e-12)
        d_avg = np.linalg.norm(a.uploaded[cid].flatten() - g.flatten())
        d_prox = np.linalg.norm(c.uploaded[cid].flatten() - g.flatten())
        assert d_prox < d_avg


def test_mu_is_ignored_under_fedavg():
    clients = [const_client(2.0), const_client(4.0)]
    cfg = pull_cfg(2, 2, train={"prox_mu": 5.0})
    rec = run_round(ModelParams({"w": [0.0]}), clients, (0, 1), cfg, PullModel())
    assert rec.global_after["w"][0] == 3.0


def test_one_round_one_client_equals_local_training():
    spec = small_spec()
    net = ConvNet(spec)
    clients = _small_clients(1)
    cfg = FederatedConfig(1, rounds=1, train_cfg=TrainConfig(learning_rate=0.1, rng_seed=2), init_seed=3)
    final, history = run_training(cfg, clients, net)
    assert len(history) == 1
    expected = local_train(net.init_params(3), net, clients[0], client_train_config(cfg, 1, 0))
    assert final == expected == history[0].uploaded[0]


def test_observer_sees_exactly_the_rounds_with_target():
    clients = [const_client(v) for v in range(5)]
    cfg = pull_cfg(5, 2, rounds=15, sampling_seed=9)
    seen = []

    def hook(rec):
        if 3 in rec.uploaded:
            seen.append(rec.round)

    _, history = run_training(cfg, clients, PullModel(), observer=hook, forced={1: 3})
    assert seen == [r.round for r in history if 3 in r.selected]
    assert 1 in seen
    assert [r.round for r in history] == list(range(1, 16))
    for prev, nxt in zip(history, history[1:]):
        assert nxt.global_before == prev.global_after


def test_training_is_deterministic():
    net = ConvNet(small_spec())
    clients = _small_clients()
    cfg = FederatedConfig(3, rounds=3, train_cfg=TrainConfig(learning_rate=0.1))
    a, _ = run_training(cfg, clients, net)
    b, _ = run_training(cfg, clients, net)
    assert a.to_bytes() == b.to_bytes()


class FixedModel:
    n_classes = 2

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=float)

    def predict_proba(self, params, X):
        return self.probs[: len(X)]


def test_evaluate_closed_forms():
    X = np.zeros((4, 1, 2))
    ds = WindowedDataset.from_arrays(X, np.array([0, 1, 1, 0]))
    perfect = FixedModel([[0.9, 0.1], [0.2, 0.8], [0.3, 0.7], [0.6, 0.4]])
    acc, loss = evaluate(ModelParams(), perfect, ds)
    assert acc == 1.0
    assert loss == pytest.approx(-np.mean(np.log([0.9, 0.8, 0.7, 0.6])))
    constant = FixedModel(np.tile([0.7, 0.3], (4, 1)))
    assert evaluate(ModelParams(), constant, ds)[0] == 0.5
    with pytest.raises(DataError):
        evaluate(ModelParams(), constant, ds.subset(np.arange(0)))


def test_federated_model_beats_any_round_one_upload():
    clients = generate_synthetic(
        SynthSpec(n_clients=3, classes=3, window_len=32, windows_per_class=30, heterogeneous=False, rng_seed=1)
    )
    train, test = split_clients(clients, 0.8, 0)
    train, test = [train[i] for i in range(3)], [test[i] for i in range(3)]
    spec = ConvNetSpec(window_len=32, classes=3, conv_blocks=((8, 5, 2), (8, 3, 2)), dense_hidden=16)
    net = ConvNet(spec)
    cfg = FederatedConfig(3, rounds=20, train_cfg=TrainConfig(learning_rate=0.05))
    final, history = run_training(cfg, train, net)
    final_acc = evaluate_pooled(final, net, test)[0]
    first = max(evaluate_pooled(p, net, test)[0] for p in history[0].uploaded.values())
    assert final_acc >= first


def test_export_history_round_trips(tmp_path):
    clients = [const_client(v) for v in range(3)]
    cfg = pull_cfg(3, 2, rounds=2)
    _, history = run_training(cfg, clients, PullModel())
    out = export_history(history, tmp_path / "hist", {1: {"acc": 0.5}})
    lines = [json.loads(x) for x in (out / "manifest.jsonl").read_text().splitlines()]
    assert [x["round"] for x in lines] == [1, 2]
    assert lines[0]["metrics"] == {"acc": 0.5}
    for rec, line in zip(history, lines):
        for cid, name in line["uploads"].items():
            assert ModelParams.load(out / name) == rec.uploaded[int(cid)]
        assert ModelParams.load(out / line["global_after"]) == rec.global_after
