"""Binary attack metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ShapeError


@dataclass(frozen=True)
class AttackReport:
    """Confusion counts for a member (1) / non-member (0) decision."""

    tp: int
    fp: int
    tn: int
    fn: int

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> AttackReport:
        y_true = np.asarray(y_true).astype(bool)
        y_pred = np.asarray(y_pred).astype(bool)
        if y_true.shape != y_pred.shape:
            raise ShapeError(f"shape mismatch {y_true.shape} vs {y_pred.shape}")
        return cls(
            tp=int(np.sum(y_true & y_pred)),
            fp=int(np.sum(~y_true & y_pred)),
            tn=int(np.sum(~y_true & ~y_pred)),
            fn=int(np.sum(y_true & ~y_pred)),
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else float("nan")

    @property
    def recall(self) -> float:
        """TP / (TP + FN); 0.0 when there are no positives."""
        pos = self.tp + self.fn
        return self.tp / pos if pos else 0.0

    @property
    def precision(self) -> float:
        pred = self.tp + self.fp
        return self.tp / pred if pred else 0.0

    def __add__(self, other: AttackReport) -> AttackReport:
        """Pooled confusion counts, e.g. over repeated trials."""
        if not isinstance(other, AttackReport):
            return NotImplemented
        return AttackReport(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {**asdict(self), "accuracy": self.accuracy, "recall": self.recall}
