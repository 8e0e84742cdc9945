"""Converters from published dataset layouts to the flat CSV the loader reads."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

from ..exceptions import IngestionError

__all__ = ["uci_har_to_csv"]


def _read_matrix(path: Path) -> np.ndarray:
    if not path.exists():
        raise IngestionError(f"expected file not found: {path}")
    return np.loadtxt(path, ndmin=2)


def uci_har_to_csv(root, out_path, window_len: int = 128) -> Path:
    """Rebuild a per-sample stream from the UCI HAR inertial-signal files.

    The published windows overlap by half, so the first ``window_len // 2``
    samples of each row are kept and rows are concatenated in file order.
    Train and test partitions are merged; the loader re-splits per client.

    Parameters
    ----------
    root : path-like
        The extracted ``UCI HAR Dataset`` directory.
    out_path : path-like
        Destination CSV with columns subject, activity, acc_x, acc_y, acc_z.
    window_len : int
        Row length of the inertial-signal files.

    Returns
    -------
    Path
        ``out_path``.
    """
    root = Path(root)
    hop = window_len // 2
    frames = []
    for part in ("train", "test"):
        base = root / part
        subjects = _read_matrix(base / f"subject_{part}.txt")[:, 0].astype(int)
        labels = _read_matrix(base / f"y_{part}.txt")[:, 0].astype(int)
        axes = []
        for axis in "xyz":
            m = _read_matrix(base / "Inertial Signals" / f"total_acc_{axis}_{part}.txt")
            if m.shape != (len(subjects), window_len):
                raise IngestionError(
                    f"{part}/total_acc_{axis}: shape {m.shape}, expected ({len(subjects)}, {window_len})"
                )
            axes.append(m[:, :hop].reshape(-1))
        frames.append(
            pd.DataFrame(
                {
                    "subject": np.repeat(subjects, hop),
                    "activity": np.repeat(labels, hop),
                    "acc_x": axes[0],
                    "acc_y": axes[1],
                    "acc_z": axes[2],
                }
            )
        )
    df = pd.concat(frames, ignore_index=True)
    # stable sort keeps each subject's rows in recording order
    df = df.sort_values("subject", kind="stable")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out_path, index=False, float_format="%.9g")
    return out_path
