"""The two-block 1-D CNN used as the HAR classifier, with hand-derived gradients.

Architecture (per block): conv1d (valid, stride 1) -> ReLU -> max-pool.
Head: flatten -> dense -> ReLU -> dropout -> dense(classes).
All parameters are float64; dense weights are stored as (fan_in, fan_out).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..exceptions import ConfigurationError, ShapeError
from ..params import ModelParams
from . import layers


@dataclass(frozen=True)
class ConvNetSpec:
    in_channels: int = 3
    window_len: int = 128
    classes: int = 6
    conv_blocks: tuple[tuple[int, int, int], ...] = ((32, 5, 2), (64, 5, 2))
    dense_hidden: int = 64
    dropout_rate: float = 0.0
    l2_lambda: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "conv_blocks", tuple(tuple(int(v) for v in b) for b in self.conv_blocks))
        self.validate()

    def validate(self) -> None:
        if self.in_channels < 1 or self.window_len < 1 or self.dense_hidden < 1:
            raise ConfigurationError("in_channels, window_len and dense_hidden must be >= 1")
        if self.classes < 2:
            raise ConfigurationError(f"classes must be >= 2, got {self.classes}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.l2_lambda < 0:
            raise ConfigurationError(f"l2_lambda must be nonnegative, got {self.l2_lambda}")
        for filters, kernel, pool in self.conv_blocks:
            if filters < 1 or kernel < 1 or pool < 1:
                raise ConfigurationError(f"invalid conv block {(filters, kernel, pool)}")
        dims = self.temporal_dims()
        if min(dims) < 1:
            raise ConfigurationError(
                f"conv/pool chain reduces the temporal dimension below 1: {dims}"
            )

    def temporal_dims(self) -> list[int]:
        """Temporal length after each conv and each pool, in order."""
        t, dims = self.window_len, []
        for _, kernel, pool in self.conv_blocks:
            t = t - kernel + 1
            dims.append(t)
            t = t // pool if t > 0 else t
            dims.append(t)
        return dims

    @property
    def flat_dim(self) -> int:
        channels = self.conv_blocks[-1][0] if self.conv_blocks else self.in_channels
        t = self.temporal_dims()[-1] if self.conv_blocks else self.window_len
        return channels * t

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_blocks"] = [list(b) for b in self.conv_blocks]
        return d


def init_params(spec: ConvNetSpec, seed: int = 0) -> ModelParams:
    """He-uniform weights ``U(-sqrt(6/fan_in), sqrt(6/fan_in))`` and zero biases."""
    spec.validate()
    rng = np.random.default_rng(seed)

    def he_uniform(shape, fan_in):
        bound = np.sqrt(6.0 / fan_in)
        return rng.uniform(-bound, bound, size=shape)

    entries = []
    in_ch = spec.in_channels
    for i, (filters, kernel, _) in enumerate(spec.conv_blocks):
        entries.append((f"conv{i}.weight", he_uniform((filters, in_ch, kernel), in_ch * kernel)))
        entries.append((f"conv{i}.bias", np.zeros(filters)))
        in_ch = filters
    entries.append(("dense.weight", he_uniform((spec.flat_dim, spec.dense_hidden), spec.flat_dim)))
    entries.append(("dense.bias", np.zeros(spec.dense_hidden)))
    entries.append(("out.weight", he_uniform((spec.dense_hidden, spec.classes), spec.dense_hidden)))
    entries.append(("out.bias", np.zeros(spec.classes)))
    return ModelParams(entries)


def param_layout(spec: ConvNetSpec) -> list[tuple[str, tuple[int, ...]]]:
    layout = []
    in_ch = spec.in_channels
    for i, (filters, kernel, _) in enumerate(spec.conv_blocks):
        layout += [(f"conv{i}.weight", (filters, in_ch, kernel)), (f"conv{i}.bias", (filters,))]
        in_ch = filters
    layout += [
        ("dense.weight", (spec.flat_dim, spec.dense_hidden)),
        ("dense.bias", (spec.dense_hidden,)),
        ("out.weight", (spec.dense_hidden, spec.classes)),
        ("out.bias", (spec.classes,)),
    ]
    return layout


def _check_inputs(params: ModelParams, spec: ConvNetSpec, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 3 or batch.shape[1:] != (spec.in_channels, spec.window_len):
        raise ShapeError(
            f"batch must have shape (B, {spec.in_channels}, {spec.window_len}), got {batch.shape}"
        )
    if params.layout() != param_layout(spec):
        raise ShapeError("parameters do not match the network spec")
    return batch


def _dropout_mask(shape, rate: float, seed: int) -> np.ndarray:
    keep = np.random.default_rng(seed).random(shape) >= rate
    return keep / (1.0 - rate)


def _forward(params, spec, x, train, dropout_seed):
    cache = {"blocks": []}
    a = x
    for i, (_, _, pool) in enumerate(spec.conv_blocks):
        z, cols = layers.conv1d_forward(a, params[f"conv{i}.weight"], params[f"conv{i}.bias"])
        r = np.maximum(z, 0.0)
        p, arg = layers.maxpool1d_forward(r, pool)
        cache["blocks"].append((a.shape, cols, z, r.shape, arg))
        a = p
    cache["pooled_shape"] = a.shape
    flat = a.reshape(a.shape[0], -1)
    hz = flat @ params["dense.weight"] + params["dense.bias"]
    h = np.maximum(hz, 0.0)
    mask = None
    if train and spec.dropout_rate > 0:
        mask = _dropout_mask(h.shape, spec.dropout_rate, dropout_seed)
        h = h * mask
    logits = h @ params["out.weight"] + params["out.bias"]
    cache.update(flat=flat, hz=hz, h=h, mask=mask)
    return logits, cache


def forward(
    params: ModelParams,
    spec: ConvNetSpec,
    batch: np.ndarray,
    mode: str = "eval",
    dropout_seed: int = 0,
) -> np.ndarray:
    """Logits of shape (B, classes). Dropout is active only when ``mode == "train"``."""
    if mode not in ("train", "eval"):
        raise ConfigurationError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = _check_inputs(params, spec, batch)
    logits, _ = _forward(params, spec, x, mode == "train", dropout_seed)
    return logits


def predict_proba(params: ModelParams, spec: ConvNetSpec, batch: np.ndarray) -> np.ndarray:
    return layers.softmax(forward(params, spec, batch, mode="eval"))


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    logp = layers.log_softmax(logits)
    return float(-logp[np.arange(len(labels)), labels].mean())


def loss_and_grads(
    params: ModelParams,
    spec: ConvNetSpec,
    batch: np.ndarray,
    labels: np.ndarray,
    prox_mu: float = 0.0,
    global_ref: ModelParams | None = None,
    dropout_seed: int = 0,
    mode: str = "train",
) -> tuple[float, ModelParams]:
    """Total loss and its exact gradient.

    loss = mean CE + (l2_lambda / 2) ||params||^2 + (prox_mu / 2) ||params - global_ref||^2

    The L2 term covers every parameter, biases included. The proximal branch
    is skipped entirely when ``prox_mu == 0``.
    """
    x = _check_inputs(params, spec, batch)
    labels = np.asarray(labels)
    if labels.shape != (x.shape[0],):
        raise ShapeError(f"expected {x.shape[0]} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= spec.classes):
        raise ShapeError(f"labels must lie in [0, {spec.classes})")
    if prox_mu < 0:
        raise ConfigurationError("prox_mu must be nonnegative")
    if prox_mu > 0:
        if global_ref is None:
            raise ConfigurationError("prox_mu > 0 requires a global reference model")
        params.check_compatible(global_ref)

    logits, cache = _forward(params, spec, x, mode == "train", dropout_seed)
    n = x.shape[0]
    logp = layers.log_softmax(logits)
    loss = float(-logp[np.arange(n), labels].mean())

    dlogits = np.exp(logp)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n

    grads: dict[str, np.ndarray] = {}
    grads["out.weight"] = cache["h"].T @ dlogits
    grads["out.bias"] = dlogits.sum(axis=0)
    dh = dlogits @ params["out.weight"].T
    if cache["mask"] is not None:
        dh = dh * cache["mask"]
    dhz = dh * (cache["hz"] > 0)
    grads["dense.weight"] = cache["flat"].T @ dhz
    grads["dense.bias"] = dhz.sum(axis=0)
    da = (dhz @ params["dense.weight"].T).reshape(cache["pooled_shape"])

    for i in reversed(range(len(spec.conv_blocks))):
        pool = spec.conv_blocks[i][2]
        in_shape, cols, z, r_shape, arg = cache["blocks"][i]
        dr = layers.maxpool1d_backward(da, arg, r_shape, pool)
        dz = dr * (z > 0)
        da, dw, db = layers.conv1d_backward(dz, cols, in_shape, params[f"conv{i}.weight"])
        grads[f"conv{i}.weight"] = dw
        grads[f"conv{i}.bias"] = db

    grads_p = ModelParams((name, grads[name]) for name in params)
    if spec.l2_lambda > 0:
        loss += 0.5 * spec.l2_lambda * params.sq_norm()
        grads_p = grads_p.axpy(spec.l2_lambda, params)
    if prox_mu > 0:
        diff = params.axpy(-1.0, global_ref)
        loss += 0.5 * prox_mu * diff.sq_norm()
        grads_p = grads_p.axpy(prox_mu, diff)
    return loss, grads_p
