"""Experiment configuration: one YAML or JSON document, validated with pydantic.

Every field has a default, so ``{}`` is a valid configuration (the synthetic
heterogeneous experiment). The resolved document, with all defaults filled in
and the derived sub-seeds, is written next to every run's outputs.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Annotated, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..datahub import CorpusSpec, SynthSpec, shipped_corpus_spec
from ..exceptions import ConfigurationError
from ..feder import FederatedConfig
from ..gbdt import GbdtConfig
from ..nncore import ConvNetSpec, TrainConfig

FORMAT_VERSION = 1
SEED_COMPONENTS = ("corpus", "split", "target", "scenario", "init", "sampling", "train", "attack", "permutation")

Range = tuple[float, float]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SyntheticCorpus(_Section):
    kind: Literal["synthetic"] = "synthetic"
    n_clients: int = Field(5, ge=2)
    classes: int = Field(6, ge=2)
    channels: int = Field(3, ge=1)
    window_len: int = Field(128, ge=8)
    windows_per_class: int = Field(100, ge=1)
    heterogeneous: bool = True
    amplitude_range: Range = (0.5, 1.8)
    freq_offset_range: Range = (-1.0, 1.0)
    baseline_range: Range = (-0.8, 0.8)
    noise_range: Range = (0.2, 0.7)
    base_frequency: float = Field(2.0, gt=0)
    frequency_step: float = Field(1.5, gt=0)

    @property
    def name(self) -> str:
        return "synthetic-" + ("heterogeneous" if self.heterogeneous else "iid")

    def synth_spec(self, seed: int) -> SynthSpec:
        kw = self.model_dump(exclude={"kind"})
        return SynthSpec(rng_seed=seed, **kw)


class FileCorpus(_Section):
    kind: Literal["file"]
    spec: str = Field(description="shipped spec name (e.g. uci_har) or path to a spec JSON file")
    path: str = Field(description="data file or directory")

    @property
    def name(self) -> str:
        return self.corpus_spec().name

    def corpus_spec(self) -> CorpusSpec:
        if self.spec.endswith(".json"):
            return CorpusSpec.from_json(self.spec)
        return shipped_corpus_spec(self.spec)


class ModelSection(_Section):
    conv_blocks: tuple[tuple[int, int, int], ...] = ((32, 5, 2), (64, 5, 2))
    dense_hidden: int = Field(64, ge=1)


class FederatedSection(_Section):
    rounds: int = Field(20, ge=1)
    sample_size: int | None = Field(None, ge=1)
    algorithm: Literal["fedavg", "fedprox"] = "fedavg"
    learning_rate: float = Field(0.05, ge=0)
    local_epochs: int = Field(5, ge=1)
    batch_size: int = Field(32, ge=1)
    prox_mu: float = Field(0.0, ge=0)
    train_fraction: float = Field(0.8, gt=0, lt=1)


class ScenarioSection(_Section):
    target: int | Literal["random"] = "random"
    k: int = Field(3, ge=2)
    n_member: int = Field(200, ge=1)
    n_nonmember: int = Field(200, ge=1)
    n_mix: int | None = Field(None, ge=2)
    pools_from: Literal["all", "train", "test"] = Field(
        "train", description="which split of each client the pools and the mix are drawn from"
    )


class DefenseSetting(_Section):
    l2: bool = False
    l2_lambda: float = Field(1e-3, ge=0)
    dropout: bool = False
    dropout_rate: float = Field(0.5, ge=0, lt=1)

    @property
    def label(self) -> str:
        parts = []
        if self.l2:
            parts.append(f"l2={self.l2_lambda:g}")
        if self.dropout:
            parts.append(f"dropout={self.dropout_rate:g}")
        return "+".join(parts) or "none"

    def effective(self) -> tuple[float, float]:
        """(l2_lambda, dropout_rate) actually applied."""
        return (self.l2_lambda if self.l2 else 0.0, self.dropout_rate if self.dropout else 0.0)


class AttackSection(_Section):
    classifier: Literal["gbdt", "logistic"] = "gbdt"
    n_trees: int = Field(100, ge=1)
    max_depth: int = Field(3, ge=1)
    learning_rate: float = Field(0.1, gt=0)
    min_samples_leaf: int = Field(5, ge=1)
    subsample: float = Field(1.0, gt=0, le=1)
    reg_lambda: float = Field(1.0, ge=0)
    permutation_repeats: int = Field(50, ge=0, description="label-shuffle control refits; 0 disables")
    baseline: bool = True


class DistributionsSection(_Section):
    epochs: int = Field(5, ge=1)


Corpus = Annotated[Union[SyntheticCorpus, FileCorpus], Field(discriminator="kind")]


class ExperimentConfig(_Section):
    corpus: Corpus = Field(default_factory=SyntheticCorpus)
    model: ModelSection = ModelSection()
    federated: FederatedSection = FederatedSection()
    scenario: ScenarioSection = ScenarioSection()
    defenses: tuple[DefenseSetting, ...] = (DefenseSetting(),)
    attack: AttackSection = AttackSection()
    distributions: DistributionsSection = DistributionsSection()
    output: str = "runs/default"
    master_seed: int = Field(0, ge=0, lt=2**64)

    @field_validator("corpus", mode="before")
    @classmethod
    def _default_corpus_kind(cls, value):
        if isinstance(value, dict) and "kind" not in value:
            return {"kind": "synthetic", **value}
        return value

    @model_validator(mode="after")
    def _check_cross_fields(self):
        if not self.defenses:
            raise ValueError("defenses needs at least one setting")
        labels = [d.label for d in self.defenses]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate defense settings {labels}")
        if isinstance(self.corpus, SyntheticCorpus):
            n = self.corpus.n_clients
            if self.scenario.k > n:
                raise ValueError(f"scenario.k={self.scenario.k} exceeds corpus.n_clients={n}")
            if isinstance(self.scenario.target, int) and not 0 <= self.scenario.target < n:
                raise ValueError(f"scenario.target={self.scenario.target} outside [0, {n})")
            if self.federated.sample_size is not None and self.federated.sample_size > n:
                raise ValueError(f"federated.sample_size exceeds corpus.n_clients={n}")
        return self

    # derived objects -------------------------------------------------------

    def seed(self, component: str) -> int:
        return derive_seed(self.master_seed, component)

    def seeds(self) -> dict[str, int]:
        return {name: self.seed(name) for name in SEED_COMPONENTS}

    def convnet_spec(self, in_channels: int, window_len: int, classes: int, defense: DefenseSetting) -> ConvNetSpec:
        l2, dropout = defense.effective()
        return ConvNetSpec(
            in_channels=in_channels,
            window_len=window_len,
            classes=classes,
            conv_blocks=tuple(tuple(b) for b in self.model.conv_blocks),
            dense_hidden=self.model.dense_hidden,
            dropout_rate=dropout,
            l2_lambda=l2,
        )

    def train_config(self) -> TrainConfig:
        f = self.federated
        return TrainConfig(
            learning_rate=f.learning_rate,
            local_epochs=f.local_epochs,
            batch_size=f.batch_size,
            prox_mu=f.prox_mu,
            rng_seed=self.seed("train"),
        )

    def federated_config(self, n_clients: int, rounds: int | None = None) -> FederatedConfig:
        return FederatedConfig(
            n_clients=n_clients,
            rounds=self.federated.rounds if rounds is None else rounds,
            sample_size=self.federated.sample_size,
            algorithm=self.federated.algorithm,
            train_cfg=self.train_config(),
            sampling_seed=self.seed("sampling"),
            init_seed=self.seed("init"),
        )

    def gbdt_config(self) -> GbdtConfig:
        a = self.attack
        return GbdtConfig(
            n_trees=a.n_trees,
            max_depth=a.max_depth,
            learning_rate=a.learning_rate,
            min_samples_leaf=a.min_samples_leaf,
            subsample=a.subsample,
            reg_lambda=a.reg_lambda,
            rng_seed=self.seed("attack"),
        )

    def resolved(self) -> dict:
        """Every field with defaults materialized, plus the derived seeds."""
        d = self.model_dump(mode="json")
        d["format_version"] = FORMAT_VERSION
        d["derived_seeds"] = self.seeds()
        return d


def derive_seed(master_seed: int, component: str) -> int:
    """64-bit sub-seed from (master seed, component name).

    Hash-based, so adding a component never shifts another component's stream.
    """
    digest = hashlib.blake2b(f"{int(master_seed)}/{component}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def format_validation_error(err: ValidationError) -> list[str]:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return lines


class ConfigError(ConfigurationError):
    """Invalid experiment configuration; ``problems`` holds field-path diagnostics."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


def parse_config(data: dict | None, seed: int | None = None) -> ExperimentConfig:
    """Validate a parsed document; ``seed`` overrides ``master_seed``."""
    data = dict(data or {})
    if seed is not None:
        data["master_seed"] = seed
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(format_validation_error(err)) from None
    _check_buildable(cfg)
    return cfg


def _check_buildable(cfg: ExperimentConfig) -> None:
    """Surface errors from the library constructors with a field path."""
    problems = []
    if isinstance(cfg.corpus, SyntheticCorpus):
        try:
            cfg.corpus.synth_spec(0)
        except ConfigurationError as e:
            problems.append(f"corpus: {e}")
        dims = (cfg.corpus.channels, cfg.corpus.window_len, cfg.corpus.classes)
    else:
        try:
            spec = cfg.corpus.corpus_spec()
            dims = (len(spec.channels), spec.window_len, spec.classes)
        except (ConfigurationError, OSError, ValueError, TypeError) as e:
            problems.append(f"corpus.spec: {e}")
            dims = None
    if dims is not None:
        for i, d in enumerate(cfg.defenses):
            try:
                cfg.convnet_spec(*dims, d)
            except ConfigurationError as e:
                problems.append(f"model (with defenses.{i}): {e}")
    try:
        cfg.gbdt_config()
        cfg.train_config()
    except ConfigurationError as e:
        problems.append(str(e))
    if problems:
        raise ConfigError(problems)


def load_config(path: str | Path | None, seed: int | None = None) -> ExperimentConfig:
    """Read a YAML or JSON document (YAML parsing covers both)."""
    if path is None:
        return parse_config({}, seed)
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as e:
        raise ConfigError([f"<file>: cannot read {path}: {e.strerror}"]) from None
    except yaml.YAMLError as e:
        raise ConfigError([f"<file>: not valid YAML/JSON: {e}"]) from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(["<root>: expected a mapping at the top level"])
    return parse_config(data, seed)
