"""Windowed sensor datasets and their on-disk container."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import DataError, ShapeError

FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class WindowedDataset:
    """Fixed-length multi-channel windows with labels and provenance.

    Attributes
    ----------
    windows : ndarray of shape (N, C, T), float64
    labels : ndarray of shape (N,), int64 activity class ids
    provenance : ndarray of shape (N,), int64 owning client id (-1 when withheld)
    ids : ndarray of shape (N,), int64 corpus-unique window identifiers
    """

    windows: np.ndarray
    labels: np.ndarray
    provenance: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.windows, dtype=np.float64)
        if w.ndim != 3:
            raise ShapeError(f"windows must be 3-D (N, C, T), got shape {w.shape}")
        n = w.shape[0]
        fields = {}
        for name in ("labels", "provenance", "ids"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1)
            if arr.shape != (n,):
                raise ShapeError(f"{name} must have length {n}, got {arr.shape[0]}")
            fields[name] = arr
        object.__setattr__(self, "windows", w)
        for name, arr in fields.items():
            object.__setattr__(self, name, arr)

    @classmethod
    def from_arrays(cls, windows, labels, provenance=None, ids=None) -> WindowedDataset:
        windows = np.asarray(windows, dtype=np.float64)
        n = windows.shape[0]
        if provenance is None:
            provenance = np.zeros(n, dtype=np.int64)
        elif np.isscalar(provenance):
            provenance = np.full(n, provenance, dtype=np.int64)
        if ids is None:
            ids = np.arange(n, dtype=np.int64)
        return cls(windows, labels, provenance, ids)

    def __len__(self) -> int:
        return self.windows.shape[0]

    @property
    def n_channels(self) -> int:
        return self.windows.shape[1]

    @property
    def window_len(self) -> int:
        return self.windows.shape[2]

    def subset(self, index) -> WindowedDataset:
        index = np.asarray(index)
        return WindowedDataset(
            self.windows[index], self.labels[index], self.provenance[index], self.ids[index]
        )

    def require_nonempty(self, what: str = "dataset") -> None:
        if len(self) == 0:
            raise DataError(f"{what} is empty")

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            np.savez(
                fh,
                format_version=np.int64(FORMAT_VERSION),
                windows=self.windows,
                labels=self.labels,
                provenance=self.provenance,
                ids=self.ids,
            )

    @classmethod
    def load(cls, path: str | Path) -> WindowedDataset:
        with np.load(path, allow_pickle=False) as npz:
            version = int(npz["format_version"])
            if version != FORMAT_VERSION:
                raise DataError(f"unsupported container version {version}")
            return cls(npz["windows"], npz["labels"], npz["provenance"], npz["ids"])


def concat(datasets) -> WindowedDataset:
    datasets = list(datasets)
    if not datasets:
        raise DataError("nothing to concatenate")
    return WindowedDataset(
        np.concatenate([d.windows for d in datasets]),
        np.concatenate([d.labels for d in datasets]),
        np.concatenate([d.provenance for d in datasets]),
        np.concatenate([d.ids for d in datasets]),
    )


def save_corpus(clients: dict[int, WindowedDataset], path: str | Path) -> None:
    """Store a client map as one container; provenance carries the client id."""
    pooled = concat(clients[c] for c in sorted(clients))
    pooled.save(path)


def load_corpus_container(path: str | Path) -> dict[int, WindowedDataset]:
    pooled = WindowedDataset.load(path)
    return {int(c): pooled.subset(pooled.provenance == c) for c in np.unique(pooled.provenance)}
