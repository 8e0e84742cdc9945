"""Sensor-window datasets: CSV ingestion, splitting, synthetic clients, attack scenarios."""

from .corpus import (
    CorpusSpec,
    load_corpus,
    shipped_corpus_spec,
    shipped_corpus_specs,
    window_segment,
    window_starts,
    zscore_from_train,
)
from .convert import uci_har_to_csv
from .dataset import WindowedDataset, concat, load_corpus_container, save_corpus
from .scenario import AttackScenario, build_scenario
from .split import split, split_clients
from .synth import ClientSignature, SynthSpec, client_signatures, generate_synthetic

__all__ = [
    "AttackScenario",
    "ClientSignature",
    "CorpusSpec",
    "SynthSpec",
    "WindowedDataset",
    "build_scenario",
    "client_signatures",
    "concat",
    "generate_synthetic",
    "load_corpus",
    "load_corpus_container",
    "save_corpus",
    "shipped_corpus_spec",
    "shipped_corpus_specs",
    "split",
    "split_clients",
    "uci_har_to_csv",
    "window_segment",
    "window_starts",
    "zscore_from_train",
]
