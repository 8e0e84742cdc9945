"""Named parameter collections and their binary serialization."""

from __future__ import annotations

import io
import struct
from collections.abc import Iterable, Iterator, Mapping
from pathlib import Path

import numpy as np

from .exceptions import ShapeError

_MAGIC = b"FMPARAM1"


class ModelParams:
    """Ordered mapping of parameter name to float64 array.

    Names are unique and their order is part of the layout: two instances
    are shape-compatible only if names, order and shapes all agree.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[str, np.ndarray] | Iterable[tuple[str, np.ndarray]] = ()):
        items = entries.items() if isinstance(entries, Mapping) else entries
        self._entries: dict[str, np.ndarray] = {}
        for name, value in items:
            if name in self._entries:
                raise ShapeError(f"duplicate parameter name {name!r}")
            self._entries[name] = np.array(value, dtype=np.float64)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._entries[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def items(self):
        return self._entries.items()

    def names(self) -> list[str]:
        return list(self._entries)

    def layout(self) -> list[tuple[str, tuple[int, ...]]]:
        return [(k, v.shape) for k, v in self._entries.items()]

    @property
    def size(self) -> int:
        return sum(v.size for v in self._entries.values())

    def __repr__(self) -> str:
        body = ", ".join(f"{k}{list(v.shape)}" for k, v in self._entries.items())
        return f"ModelParams({body})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.layout() == other.layout() and all(
            np.array_equal(v, other[k]) for k, v in self.items()
        )

    def copy(self) -> ModelParams:
        return ModelParams((k, v.copy()) for k, v in self.items())

    def is_compatible(self, other: ModelParams) -> bool:
        return self.layout() == other.layout()

    def check_compatible(self, other: ModelParams) -> None:
        if not self.is_compatible(other):
            raise ShapeError(f"incompatible parameter layouts: {self.layout()} vs {other.layout()}")

    def flatten(self) -> np.ndarray:
        if not self._entries:
            return np.zeros(0)
        return np.concatenate([v.ravel() for v in self._entries.values()])

    def unflatten(self, flat: np.ndarray) -> ModelParams:
        """Return a new instance with this layout, filled from ``flat``."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.size,):
            raise ShapeError(f"expected flat vector of length {self.size}, got {flat.shape}")
        out, pos = [], 0
        for name, value in self.items():
            out.append((name, flat[pos : pos + value.size].reshape(value.shape)))
            pos += value.size
        return ModelParams(out)

    def zeros_like(self) -> ModelParams:
        return ModelParams((k, np.zeros_like(v)) for k, v in self.items())

    def sq_norm(self) -> float:
        return float(sum(np.sum(v * v) for v in self._entries.values()))

    def axpy(self, alpha: float, other: ModelParams) -> ModelParams:
        """``self + alpha * other``, elementwise."""
        self.check_compatible(other)
        return ModelParams((k, v + alpha * other[k]) for k, v in self.items())

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self._entries.values())

    # serialization ---------------------------------------------------
    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(_MAGIC)
        buf.write(struct.pack("<I", len(self)))
        for name, value in self.items():
            raw = name.encode("utf-8")
            buf.write(struct.pack("<I", len(raw)))
            buf.write(raw)
            buf.write(struct.pack("<I", value.ndim))
            buf.write(struct.pack(f"<{value.ndim}Q", *value.shape))
            buf.write(np.ascontiguousarray(value, dtype="<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> ModelParams:
        view = memoryview(data)
        if bytes(view[:8]) != _MAGIC:
            raise ShapeError("not a serialized ModelParams blob")
        pos = 8

        def take(fmt: str):
            nonlocal pos
            size = struct.calcsize(fmt)
            vals = struct.unpack_from(fmt, view, pos)
            pos += size
            return vals

        (count,) = take("<I")
        entries = []
        for _ in range(count):
            (nlen,) = take("<I")
            name = bytes(view[pos : pos + nlen]).decode("utf-8")
            pos += nlen
            (ndim,) = take("<I")
            shape = take(f"<{ndim}Q") if ndim else ()
            n = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            arr = np.frombuffer(view, dtype="<f8", count=n, offset=pos).reshape(shape)
            pos += 8 * n
            entries.append((name, arr.astype(np.float64)))
        if pos != len(view):
            raise ShapeError("trailing bytes after ModelParams payload")
        return cls(entries)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> ModelParams:
        return cls.from_bytes(Path(path).read_bytes())


def mean_params(uploads: list[ModelParams]) -> ModelParams:
    """Unweighted elementwise mean of shape-compatible parameter sets."""
    if not uploads:
        raise ShapeError("cannot average an empty list of parameters")
    first = uploads[0]
    for other in uploads[1:]:
        first.check_compatible(other)
    return ModelParams(
        (name, np.mean(np.stack([u[name] for u in uploads]), axis=0)) for name in first
    )
