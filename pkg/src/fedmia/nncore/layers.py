"""Forward/backward primitives for 1-D convolutional nets on (batch, channels, time) arrays."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv1d_forward(x, weight, bias):
    """Valid (no padding), stride-1 cross-correlation.

    x: (B, C, T), weight: (F, C, K), bias: (F,) -> out (B, F, T - K + 1), cols
    """
    n_filters, _, kernel = weight.shape
    batch = x.shape[0]
    # (B, C, T', K) -> (B, T', C, K) -> (B*T', C*K)
    cols = sliding_window_view(x, kernel, axis=2).transpose(0, 2, 1, 3)
    t_out = cols.shape[1]
    cols = cols.reshape(batch * t_out, -1)
    out = cols @ weight.reshape(n_filters, -1).T + bias
    return out.reshape(batch, t_out, n_filters).transpose(0, 2, 1), cols


def conv1d_backward(dout, cols, x_shape, weight):
    batch, channels, t_in = x_shape
    n_filters, _, kernel = weight.shape
    t_out = dout.shape[2]
    d2 = dout.transpose(0, 2, 1).reshape(batch * t_out, n_filters)
    dweight = (d2.T @ cols).reshape(weight.shape)
    dbias = d2.sum(axis=0)
    dcols = (d2 @ weight.reshape(n_filters, -1)).reshape(batch, t_out, channels, kernel)
    dx = np.zeros(x_shape)
    for k in range(kernel):
        dx[:, :, k : k + t_out] += dcols[:, :, :, k].transpose(0, 2, 1)
    return dx, dweight, dbias


def maxpool1d_forward(x, size):
    """Non-overlapping max pooling; a trailing remainder shorter than ``size`` is dropped."""
    if size == 1:
        return x, None
    batch, ch, t_in = x.shape
    t_out = t_in // size
    blocks = x[:, :, : t_out * size].reshape(batch, ch, t_out, size)
    arg = blocks.argmax(axis=3)
    out = np.take_along_axis(blocks, arg[..., None], axis=3)[..., 0]
    return out, arg


def maxpool1d_backward(dout, arg, x_shape, size):
    if size == 1:
        return dout
    batch, ch, t_out = dout.shape
    blocks = np.zeros((batch, ch, t_out, size))
    np.put_along_axis(blocks, arg[..., None], dout[..., None], axis=3)
    dx = np.zeros(x_shape)
    dx[:, :, : t_out * size] = blocks.reshape(batch, ch, t_out * size)
    return dx


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))
