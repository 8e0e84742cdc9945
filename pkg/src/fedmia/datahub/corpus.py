"""Delimited-text accelerometer corpora -> per-subject windowed client datasets."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from ..exceptions import ConfigurationError, DataError, IngestionError
from .dataset import WindowedDataset
from .split import split

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-8


@dataclass(frozen=True)
class CorpusSpec:
    """Schema and windowing parameters for one corpus.

    ``subject_column`` may be None, in which case every file is one subject
    named after its stem. ``column_names`` is required for header-less files.
    Rows whose label is in ``ignore_labels`` or whose channels contain NaN
    break the stream into separate contiguous segments.
    """

    name: str
    channels: tuple[str, ...]
    label_column: str
    label_map: dict[str, int]
    subject_column: str | None = None
    timestamp_column: str | None = None
    sampling_rate: float = 50.0
    window_len: int = 128
    overlap: float = 0.5
    normalization: str = "zscore"
    delimiter: str = ","
    has_header: bool = True
    column_names: tuple[str, ...] | None = None
    file_glob: str = "*.csv"
    ignore_labels: tuple[str, ...] = ()
    exclude_subjects: tuple[str, ...] = ()
    train_fraction: float = 0.8
    split_seed: int = 0
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        for name in ("channels", "ignore_labels", "exclude_subjects"):
            object.__setattr__(self, name, tuple(str(v) for v in getattr(self, name)))
        if self.column_names is not None:
            object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "label_map", {str(k): int(v) for k, v in self.label_map.items()})
        if self.window_len < 8:
            raise ConfigurationError(f"window_len must be >= 8, got {self.window_len}")
        if not 0.0 <= self.overlap < 1.0:
            raise ConfigurationError(f"overlap must lie in [0, 1), got {self.overlap}")
        if self.normalization not in ("zscore", "none"):
            raise ConfigurationError(f"normalization must be 'zscore' or 'none', got {self.normalization!r}")
        if not self.channels:
            raise ConfigurationError("at least one channel column is required")
        if not self.has_header and self.column_names is None:
            raise ConfigurationError("header-less files need column_names")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError("train_fraction must lie in (0, 1)")

    @property
    def stride(self) -> int:
        return max(1, int(self.window_len * (1.0 - self.overlap)))

    @property
    def classes(self) -> int:
        return max(self.label_map.values()) + 1

    @classmethod
    def from_dict(cls, d: dict) -> CorpusSpec:
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> CorpusSpec:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("channels", "ignore_labels", "exclude_subjects", "column_names"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


def shipped_corpus_specs() -> list[str]:
    pkg = resources.files("fedmia.corpora")
    return sorted(p.name[: -len(".json")] for p in pkg.iterdir() if p.name.endswith(".json"))


def shipped_corpus_spec(name: str) -> CorpusSpec:
    """Load one of the bundled per-dataset specs (``uci_har``, ``wisdm`` ...)."""
    res = resources.files("fedmia.corpora") / f"{name}.json"
    if not res.is_file():
        raise ConfigurationError(f"no shipped corpus spec {name!r}; have {shipped_corpus_specs()}")
    return CorpusSpec.from_dict(json.loads(res.read_text()))


def window_starts(n_samples: int, window_len: int, stride: int) -> np.ndarray:
    if n_samples < window_len:
        return np.zeros(0, dtype=np.int64)
    return np.arange(0, n_samples - window_len + 1, stride, dtype=np.int64)


def window_segment(values: np.ndarray, labels: np.ndarray, window_len: int, stride: int):
    """Slide windows over one contiguous segment.

    values: (n, C); labels: (n,) int. Returns (windows (N, C, T), labels (N,)).
    The window label is the most frequent label (ties to the smaller id);
    windows where it covers less than half the samples are dropped.
    """
    starts = window_starts(len(values), window_len, stride)
    wins, labs = [], []
    for s in starts:
        counts = np.bincount(labels[s : s + window_len])
        top = int(counts.argmax())
        if 2 * counts[top] >= window_len:
            wins.append(values[s : s + window_len].T)
            labs.append(top)
    if not wins:
        return np.zeros((0, values.shape[1], window_len)), np.zeros(0, dtype=np.int64)
    return np.stack(wins), np.asarray(labs, dtype=np.int64)


def _segments(keep: np.ndarray):
    """Yield (start, stop) of maximal runs where ``keep`` is True."""
    if keep.size == 0:
        return
    edges = np.flatnonzero(np.diff(np.concatenate([[0], keep.astype(np.int8), [0]])))
    for start, stop in zip(edges[::2], edges[1::2]):
        yield int(start), int(stop)


def _read_file(spec: CorpusSpec, path: Path) -> pd.DataFrame:
    # labels such as "null" must stay literal; channels are coerced below
    text_cols = {spec.label_column: str}
    if spec.subject_column:
        text_cols[spec.subject_column] = str
    kwargs = dict(
        sep=spec.delimiter,
        engine="python" if len(spec.delimiter) > 1 else "c",
        dtype=text_cols,
        keep_default_na=False,
    )
    if spec.has_header:
        df = pd.read_csv(path, **kwargs)
    else:
        df = pd.read_csv(path, header=None, names=list(spec.column_names), index_col=False, **kwargs)
    needed = list(spec.channels) + [spec.label_column]
    if spec.subject_column:
        needed.append(spec.subject_column)
    if spec.timestamp_column:
        needed.append(spec.timestamp_column)
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise IngestionError(f"{path}: missing columns {missing}")
    if spec.subject_column is None:
        df = df.assign(__subject=path.stem)
    else:
        df = df.assign(__subject=df[spec.subject_column].astype(str))
    for c in spec.channels:
        df[c] = pd.to_numeric(df[c].astype(str).str.rstrip(";"), errors="coerce")
    return df


def _label_key(value) -> str:
    text = str(value).strip()
    try:
        number = float(text)
    except ValueError:
        return text
    # "3", "3.0" and "3.000000" name the same activity
    return str(int(number)) if number.is_integer() else text


def _subject_sort_key(name: str):
    try:
        return (0, float(name), name)
    except ValueError:
        return (1, 0.0, name)


def load_corpus(spec: CorpusSpec, path: str | Path) -> dict[int, WindowedDataset]:
    """Parse, window and normalise a corpus; one client per subject.

    Client ids are assigned 0..n-1 over the non-empty subjects in natural
    order of subject name. Z-score statistics for each client come from its
    own training split, i.e. ``split(client, spec.train_fraction, spec.split_seed)[0]``,
    so callers must split with those same arguments.
    """
    path = Path(path)
    files = sorted(path.glob(spec.file_glob)) if path.is_dir() else [path]
    if not files:
        raise IngestionError(f"no files matching {spec.file_glob!r} under {path}")

    per_subject: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {}
    for f in files:
        df = _read_file(spec, f)
        keys = df[spec.label_column].map(_label_key)
        ignored = keys.isin(spec.ignore_labels).to_numpy()
        unknown = sorted(set(keys[~ignored]) - set(spec.label_map))
        if unknown:
            raise IngestionError(f"{f}: unknown label value(s) {unknown[:20]}")
        label_ids = keys.map(lambda k: spec.label_map.get(k, -1)).to_numpy(dtype=np.int64)
        values = df[list(spec.channels)].to_numpy(dtype=np.float64)
        subjects = df["__subject"].to_numpy()
        valid = ~ignored & np.isfinite(values).all(axis=1)
        # one segment = contiguous valid rows of the same subject
        boundaries = np.concatenate([[True], subjects[1:] != subjects[:-1]])
        for start, stop in _segments(valid):
            cuts = [start] + [i for i in np.flatnonzero(boundaries[start + 1 : stop]) + start + 1] + [stop]
            for a, b in zip(cuts[:-1], cuts[1:]):
                seg_vals, seg_labels = values[a:b], label_ids[a:b]
                if spec.timestamp_column:
                    order = np.argsort(df[spec.timestamp_column].to_numpy()[a:b], kind="stable")
                    seg_vals, seg_labels = seg_vals[order], seg_labels[order]
                w, lab = window_segment(seg_vals, seg_labels, spec.window_len, spec.stride)
                per_subject.setdefault(str(subjects[a]), []).append((w, lab))

    excluded = set(spec.exclude_subjects)
    names = sorted((s for s in per_subject if s not in excluded), key=_subject_sort_key)
    clients: dict[int, WindowedDataset] = {}
    skipped = 0
    next_id = 0
    for name in names:
        chunks = [c for c in per_subject[name] if len(c[1])]
        if not chunks:
            skipped += 1
            continue
        cid = len(clients)
        windows = np.concatenate([c[0] for c in chunks])
        labels = np.concatenate([c[1] for c in chunks])
        ids = np.arange(next_id, next_id + len(labels))
        next_id += len(labels)
        ds = WindowedDataset(windows, labels, np.full(len(labels), cid), ids)
        if spec.normalization == "zscore":
            ds = zscore_from_train(ds, spec.train_fraction, spec.split_seed)
        clients[cid] = ds
        logger.debug("subject %s -> client %d (%d windows)", name, cid, len(ds))
    if skipped:
        logger.warning("skipped %d subject(s) with no usable windows", skipped)
    if not clients:
        raise DataError(f"corpus {spec.name!r} produced no windows")
    return clients


def zscore_from_train(ds: WindowedDataset, train_fraction: float, seed: int) -> WindowedDataset:
    """Per-channel z-score using statistics of this dataset's own training split."""
    if len(ds) >= 2:
        train, _ = split(ds, train_fraction, seed)
    else:
        train = ds
    mean = train.windows.mean(axis=(0, 2), keepdims=True)
    std = train.windows.std(axis=(0, 2), keepdims=True)
    # degenerate channels map to exactly zero
    scaled = np.where(std > SIGMA_FLOOR, (ds.windows - mean) / np.maximum(std, SIGMA_FLOOR), 0.0)
    return WindowedDataset(scaled, ds.labels, ds.provenance, ds.ids)
