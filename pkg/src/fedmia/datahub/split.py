"""Deterministic, label-stratified train/test splitting."""

from __future__ import annotations

import numpy as np

from ..exceptions import DataError
from .dataset import WindowedDataset


def _largest_remainder(counts: np.ndarray, fraction: float, total: int) -> np.ndarray:
    exact = counts * fraction
    alloc = np.floor(exact).astype(np.int64)
    short = total - alloc.sum()
    if short > 0:
        # stable order: larger remainder first, then lower class id
        order = np.lexsort((np.arange(len(counts)), -(exact - alloc)))
        alloc[order[:short]] += 1
    return alloc


def split(
    dataset: WindowedDataset, train_fraction: float, seed: int = 0
) -> tuple[WindowedDataset, WindowedDataset]:
    """Split windows into disjoint (train, test) parts.

    The train size is ``round(train_fraction * N)`` clamped to [1, N-1]. When
    every class has at least two windows the split is stratified so each class
    contributes within one window of its proportional share.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(dataset)
    if n < 2:
        raise DataError(f"need at least 2 windows to split, got {n}")
    n_train = int(min(max(np.floor(train_fraction * n + 0.5), 1), n - 1))
    rng = np.random.default_rng(seed)

    classes, counts = np.unique(dataset.labels, return_counts=True)
    if counts.min() >= 2:
        alloc = _largest_remainder(counts, train_fraction, n_train)
        train_idx = []
        for cls, take in zip(classes, alloc):
            members = np.flatnonzero(dataset.labels == cls)
            train_idx.append(rng.permutation(members)[:take])
        train_idx = np.concatenate(train_idx)
    else:
        train_idx = rng.permutation(n)[:n_train]
    mask = np.zeros(n, dtype=bool)
    mask[train_idx] = True
    return dataset.subset(np.flatnonzero(mask)), dataset.subset(np.flatnonzero(~mask))


def split_clients(clients: dict, train_fraction: float, seed: int = 0):
    """Split every client; returns (train_map, test_map)."""
    train, test = {}, {}
    for cid in sorted(clients):
        train[cid], test[cid] = split(clients[cid], train_fraction, seed)
    return train, test
