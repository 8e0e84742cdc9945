"""Experiment drivers behind the CLI subcommands; pure functions of the config."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..attacker import CuriousServer, best_confidence_baseline, extract_vectors, make_attack_classifier
from ..datahub import (
    WindowedDataset,
    build_scenario,
    concat,
    generate_synthetic,
    load_corpus,
    save_corpus,
    split_clients,
)
from ..feder import evaluate, evaluate_pooled, run_training
from ..nncore import ConvNet, local_train
from .config import FORMAT_VERSION, DefenseSetting, ExperimentConfig, SyntheticCorpus

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "format_version",
    "mode",
    "dataset",
    "model",
    "k",
    "target",
    "others",
    "defense",
    "l2_lambda",
    "dropout_rate",
    "rounds",
    "captures",
    "attack_set_size",
    "attack_accuracy",
    "attack_recall",
    "attack_precision",
    "baseline_threshold",
    "baseline_accuracy",
    "permutation_accuracy",
    "har_train_accuracy",
    "har_test_accuracy",
    "master_seed",
)


@dataclass
class Corpus:
    name: str
    full: dict[int, WindowedDataset]
    train: list[WindowedDataset]
    test: list[WindowedDataset]
    channels: int
    window_len: int
    classes: int

    @property
    def n_clients(self) -> int:
        return len(self.train)


def prepare_corpus(cfg: ExperimentConfig) -> Corpus:
    """Load or generate the per-client windows and split each client."""
    frac = cfg.federated.train_fraction
    split_seed = cfg.seed("split")
    if isinstance(cfg.corpus, SyntheticCorpus):
        spec = cfg.corpus.synth_spec(cfg.seed("corpus"))
        full = generate_synthetic(spec)
        classes = spec.classes
    else:
        # normalisation statistics must come from the same split used for training
        spec = replace(cfg.corpus.corpus_spec(), train_fraction=frac, split_seed=split_seed)
        full = load_corpus(spec, cfg.corpus.path)
        classes = spec.classes
    tr, te = split_clients(full, frac, split_seed)
    ids = sorted(full)
    first = full[ids[0]]
    return Corpus(
        name=cfg.corpus.name,
        full=full,
        train=[tr[c] for c in ids],
        test=[te[c] for c in ids],
        channels=first.n_channels,
        window_len=first.window_len,
        classes=classes,
    )


def pick_target(cfg: ExperimentConfig, n_clients: int) -> int:
    if cfg.scenario.target == "random":
        return int(np.random.default_rng(cfg.seed("target")).integers(n_clients))
    if not 0 <= cfg.scenario.target < n_clients:
        raise ValueError(f"scenario.target={cfg.scenario.target} outside [0, {n_clients})")
    return int(cfg.scenario.target)


def make_scenario(cfg: ExperimentConfig, corpus: Corpus, target: int):
    sc = cfg.scenario
    source = {
        "all": corpus.full,
        "train": dict(enumerate(corpus.train)),
        "test": dict(enumerate(corpus.test)),
    }[sc.pools_from]
    return build_scenario(
        source, target, sc.k, n_member=sc.n_member, n_nonmember=sc.n_nonmember, n_mix=sc.n_mix, seed=cfg.seed("scenario")
    )


def model_label(cfg: ExperimentConfig) -> str:
    blocks = "-".join(f"{f}x{k}p{p}" for f, k, p in cfg.model.conv_blocks)
    return f"convnet-{blocks}-d{cfg.model.dense_hidden}"


def attack_classifier(cfg: ExperimentConfig):
    if cfg.attack.classifier == "gbdt":
        g = cfg.gbdt_config()
        return make_attack_classifier("gbdt", **g.to_dict())
    return make_attack_classifier("logistic", max_iter=1000)


@dataclass
class DefenseOutcome:
    summary: dict
    train_metrics: list[dict] = field(default_factory=list)
    attack_history: list[dict] = field(default_factory=list)


@dataclass
class ExperimentResult:
    mode: str
    outcomes: list[DefenseOutcome]

    @property
    def summary_rows(self) -> list[dict]:
        return [o.summary for o in self.outcomes]


def run_defense(
    cfg: ExperimentConfig, corpus: Corpus, scenario, defense: DefenseSetting, rounds: int, mode: str
) -> DefenseOutcome:
    spec = cfg.convnet_spec(corpus.channels, corpus.window_len, corpus.classes, defense)
    net = ConvNet(spec)
    fcfg = cfg.federated_config(corpus.n_clients, rounds=rounds)
    server = CuriousServer(scenario, net, classifier=attack_classifier(cfg))
    test_pool = concat(corpus.test)
    metrics = []

    def observe(record):
        server(record)
        acc, loss = evaluate(record.global_after, net, test_pool)
        metrics.append(
            {
                "defense": defense.label,
                "round": record.round,
                "selected": list(record.selected),
                "target_selected": scenario.target in record.uploaded,
                "test_accuracy": acc,
                "test_loss": loss,
            }
        )
        logger.info("[%s] round %d  test acc %.3f", defense.label, record.round, acc)

    final, _ = run_training(fcfg, corpus.train, net, observer=observe, forced=server.forced_rounds())
    train_acc = evaluate_pooled(final, net, corpus.train)[0]
    test_acc = metrics[-1]["test_accuracy"]
    report = server.report()
    l2, dropout = defense.effective()
    row = {
        "format_version": FORMAT_VERSION,
        "mode": mode,
        "dataset": corpus.name,
        "model": model_label(cfg),
        "k": scenario.k,
        "target": scenario.target,
        "others": " ".join(str(o) for o in scenario.others),
        "defense": defense.label,
        "l2_lambda": l2,
        "dropout_rate": dropout,
        "rounds": rounds,
        "captures": len(server.captured),
        "attack_set_size": len(server.attack_set),
        "attack_accuracy": report.accuracy,
        "attack_recall": report.recall,
        "attack_precision": report.precision,
        "baseline_threshold": "",
        "baseline_accuracy": "",
        "permutation_accuracy": "",
        "har_train_accuracy": train_acc,
        "har_test_accuracy": test_acc,
        "master_seed": cfg.master_seed,
    }
    if cfg.attack.baseline:
        thr, base = best_confidence_baseline(scenario, server.latest, net)
        row["baseline_threshold"], row["baseline_accuracy"] = thr, base.accuracy
    if cfg.attack.permutation_repeats:
        perm = server.permutation_control(cfg.seed("permutation"), repeats=cfg.attack.permutation_repeats)
        row["permutation_accuracy"] = perm.accuracy
    history = [{"defense": defense.label, **h.to_dict()} for h in server.history]
    return DefenseOutcome(row, metrics, history)


def run_experiment(cfg: ExperimentConfig, first_round: bool = False) -> ExperimentResult:
    """Federated training under attack, once per defense setting.

    With ``first_round`` only round 1 is run (the target is always selected
    there), so the attack is trained on a single capture.
    """
    corpus = prepare_corpus(cfg)
    target = pick_target(cfg, corpus.n_clients)
    scenario = make_scenario(cfg, corpus, target)
    rounds = 1 if first_round else cfg.federated.rounds
    mode = "first_round" if first_round else "run"
    outcomes = [run_defense(cfg, corpus, scenario, d, rounds, mode) for d in cfg.defenses]
    return ExperimentResult(mode, outcomes)


def run_distributions(cfg: ExperimentConfig) -> dict[str, np.ndarray]:
    """Top-1 probabilities of a model trained only on the target client.

    ``own_top1`` is measured on the target's held-out windows and
    ``other_top1`` on an equal number of held-out windows from the other
    clients, spread evenly across them.
    """
    corpus = prepare_corpus(cfg)
    target = pick_target(cfg, corpus.n_clients)
    defense = cfg.defenses[0]
    net = ConvNet(cfg.convnet_spec(corpus.channels, corpus.window_len, corpus.classes, defense))
    tc = replace(cfg.train_config(), local_epochs=cfg.distributions.epochs, prox_mu=0.0)
    params = local_train(net.init_params(cfg.seed("init")), net, corpus.train[target], tc)
    own = corpus.test[target]
    others = [c for c in range(corpus.n_clients) if c != target]
    rng = np.random.default_rng(cfg.seed("scenario"))
    n = len(own)
    shares = [n // len(others) + (1 if i < n % len(others) else 0) for i in range(len(others))]
    parts = []
    for cid, share in zip(others, shares):
        ds = corpus.test[cid]
        take = min(share, len(ds))
        parts.append(ds.subset(np.sort(rng.permutation(len(ds))[:take])))
    other = concat(parts)
    n = min(len(own), len(other))
    return {
        "own_top1": extract_vectors(params, net, own)[:n, 0],
        "other_top1": extract_vectors(params, net, other)[:n, 0],
        "target": target,
    }


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_jsonl(path: Path, records) -> None:
    with open(path, "w", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def write_summary(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _format(row[k]) for k in SUMMARY_COLUMNS})


def write_config(path: Path, cfg: ExperimentConfig) -> None:
    path.write_text(json.dumps(cfg.resolved(), indent=2, sort_keys=True) + "\n")


def write_experiment(out: Path, cfg: ExperimentConfig, result: ExperimentResult) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "config.resolved.json", out / "train_metrics.jsonl", out / "attack_history.jsonl", out / "summary.csv"]
    write_config(paths[0], cfg)
    write_jsonl(paths[1], [m for o in result.outcomes for m in o.train_metrics])
    write_jsonl(paths[2], [h for o in result.outcomes for h in o.attack_history])
    write_summary(paths[3], result.summary_rows)
    return paths


def write_distributions(out: Path, cfg: ExperimentConfig, dist: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    write_config(out / "config.resolved.json", cfg)
    path = out / "distributions.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["own_top1", "other_top1"])
        for a, b in zip(dist["own_top1"], dist["other_top1"]):
            w.writerow([repr(float(a)), repr(float(b))])
    return path


def write_synthetic(out: Path, cfg: ExperimentConfig) -> Path:
    if not isinstance(cfg.corpus, SyntheticCorpus):
        raise ValueError("synth-gen needs corpus.kind = synthetic")
    out.mkdir(parents=True, exist_ok=True)
    clients = generate_synthetic(cfg.corpus.synth_spec(cfg.seed("corpus")))
    path = out / "corpus.npz"
    save_corpus(clients, path)
    write_config(out / "config.resolved.json", cfg)
    return path


__all__ = [
    "SUMMARY_COLUMNS",
    "Corpus",
    "ExperimentResult",
    "make_scenario",
    "pick_target",
    "prepare_corpus",
    "run_distributions",
    "run_experiment",
    "write_distributions",
    "write_experiment",
    "write_summary",
    "write_synthetic",
]
