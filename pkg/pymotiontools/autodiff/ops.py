"""Differentiable operations on rank-4 tensors"""

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import ShapeError
from .tensor import Tensor, common_tape

LEAKY_SLOPE = 0.2


def _finish(data, inputs, vjp):
    """Record the result on the tape of the inputs, or return a constant if none is tracked."""
    tape = common_tape(*inputs)
    if tape is None:
        return Tensor(data)
    return tape.record(data, inputs, vjp)


def _check_same(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: operand dims differ, {a.shape} and {b.shape}")


def conv_same(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """
    Stride 1 cross-correlation with zero padding that keeps the spatial dims.

    Parameters
    ----------
    x : ndarray
        Input of shape (batch, in_channels, joint, coordinate).
    w : ndarray
        Kernel of shape (out_channels, in_channels, k, k) with k odd.

    Returns
    -------
    ndarray
        Output of shape (batch, out_channels, joint, coordinate).
    """

    return _correlate(_windows(x, w.shape[-1]), w)


def _windows(x: np.ndarray, k: int) -> np.ndarray:
    """Zero pad by (k-1)/2 and view every k x k patch, shape (B, C, J, K, k, k)."""
    p = k // 2
    if p > 0:
        x = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    return sliding_window_view(x, (k, k), axis=(2, 3))


def _correlate(windows: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """
    Convolution with "same" zero padding and stride 1.

    Parameters
    ----------
    x : Tensor
        Input of dims (batch, in_channels, joint, coordinate).
    weight : Tensor
        Kernel of dims (out_channels, in_channels, k, k), k odd.
    bias : Tensor
        Bias of dims (1, out_channels, 1, 1).

    Returns
    -------
    Tensor
        Output of dims (batch, out_channels, joint, coordinate).

    Raises
    ------
    ShapeError
        If the kernel does not match the input channels, is not square and odd,
        or the bias does not match the output channels.
    """

    out_c, in_c, kh, kw = weight.shape
    if in_c != x.shape[1]:
        raise ShapeError(
            f"conv2d: weight {weight.shape} expects {in_c} input channels, input has shape {x.shape}"
        )
    if kh != kw or kh % 2 == 0:
        raise ShapeError(f"conv2d: kernel must be square with odd size, got weight {weight.shape}")
    if bias.shape != (1, out_c, 1, 1):
        raise ShapeError(f"conv2d: bias {bias.shape} does not match weight {weight.shape}")

    windows = _windows(x.data, kh)
    out = _correlate(windows, weight.data) + bias.data

    def vjp(g):
        dx = None
        if x.tracked:
            flipped = np.ascontiguousarray(weight.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
            dx = conv_same(g, flipped)
        dw = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3])) if weight.tracked else None
        db = g.sum(axis=(0, 2, 3)).reshape(bias.shape) if bias.tracked else None
        return dx, dw, db

    return _finish(out, (x, weight, bias), vjp)


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    """Elementwise max(x, slope*x) for slope in (0, 1)."""

    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must be in (0, 1), got {slope}")

    positive = x.data > 0
    out = np.where(positive, x.data, x.data * x.dtype.type(slope))

    def vjp(g):
        return (np.where(positive, g, g * g.dtype.type(slope)),)

    return _finish(out, (x,), vjp)


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function, clipped so that the output stays strictly inside (0, 1)."""

    finfo = np.finfo(x.dtype)
    out = np.clip(expit(x.data), finfo.tiny, 1 - finfo.epsneg).astype(x.dtype, copy=False)

    def vjp(g):
        return (g * out * (1 - out),)

    return _finish(out, (x,), vjp)


def fully_connected(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """
    Dense layer on flat vectors.

    Parameters
    ----------
    x : Tensor
        Vectors of dims (batch, in_features, 1, 1).
    weight : Tensor
        Matrix of dims (out_features, in_features, 1, 1).
    bias : Tensor
        Bias of dims (1, out_features, 1, 1).

    Returns
    -------
    Tensor
        Vectors of dims (batch, out_features, 1, 1).
    """

    if x.shape[2:] != (1, 1):
        raise ShapeError(f"fully_connected: input must be flat (batch, features, 1, 1), got {x.shape}")
    if weight.shape[2:] != (1, 1) or weight.shape[1] != x.shape[1]:
        raise ShapeError(f"fully_connected: weight {weight.shape} does not match input {x.shape}")
    if bias.shape != (1, weight.shape[0], 1, 1):
        raise ShapeError(f"fully_connected: bias {bias.shape} does not match weight {weight.shape}")

    x2 = x.data[:, :, 0, 0]
    w2 = weight.data[:, :, 0, 0]
    out = (x2 @ w2.T)[:, :, None, None] + bias.data

    def vjp(g):
        g2 = g[:, :, 0, 0]
        dx = (g2 @ w2)[:, :, None, None] if x.tracked else None
        dw = (g2.T @ x2)[:, :, None, None] if weight.tracked else None
        db = g.sum(axis=0, keepdims=True) if bias.tracked else None
        return dx, dw, db

    return _finish(out, (x, weight, bias), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "add")
    return _finish(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "sub")
    return _finish(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product."""
    _check_same(a, b, "mul")
    return _finish(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(x: Tensor, factor: float) -> Tensor:
    factor = x.dtype.type(factor)
    return _finish(x.data * factor, (x,), lambda g: (g * factor,))


def add_n(tensors: Sequence[Tensor]) -> Tensor:
    """Sum of a non-empty list of tensors with equal dims."""

    if len(tensors) == 0:
        raise ShapeError("add_n needs at least one operand")
    for t in tensors[1:]:
        _check_same(tensors[0], t, "add_n")

    out = tensors[0].data.copy()
    for t in tensors[1:]:
        out += t.data

    return _finish(out, tuple(tensors), lambda g: tuple(g for _ in tensors))


def concat_channels(tensors: Sequence[Tensor]) -> Tensor:
    """
    Concatenate along the channel axis.

    All operands must agree on batch, joint and coordinate dims.
    """

    if len(tensors) == 0:
        raise ShapeError("concat_channels needs at least one operand")
    ref = tensors[0].shape
    for t in tensors[1:]:
        if (t.shape[0],) + t.shape[2:] != (ref[0],) + ref[2:]:
            raise ShapeError(f"concat_channels: operand dims {ref} and {t.shape} differ outside the channel axis")

    out = np.concatenate([t.data for t in tensors], axis=1)
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])

    def vjp(g):
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(tensors)))

    return _finish(out, tuple(tensors), vjp)


def flatten(x: Tensor) -> Tensor:
    """Reshape (B, C, J, K) into flat vectors (B, C*J*K, 1, 1)."""

    shape = x.shape
    out = x.data.reshape(shape[0], -1, 1, 1)
    return _finish(out, (x,), lambda g: (g.reshape(shape),))


def sum_all(x: Tensor) -> Tensor:
    """Sum of every element, as a (1, 1, 1, 1) tensor."""

    shape = x.shape
    out = x.data.sum(dtype=x.dtype).reshape(1, 1, 1, 1)
    return _finish(out, (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


def weight_by(x: Tensor, alpha: Tensor, index: int) -> Tensor:
    """
    Multiply each batch entry of x by its own weight alpha[:, index].

    Parameters
    ----------
    x : Tensor
        Tensor of dims (B, C, J, K).
    alpha : Tensor
        Weights of dims (B, L, 1, 1).
    index : int
        Which weight to use, 0 <= index < L.
    """

    if alpha.shape[0] != x.shape[0] or alpha.shape[2:] != (1, 1):
        raise ShapeError(f"weight_by: weights {alpha.shape} do not match tensor {x.shape}")
    if not 0 <= index < alpha.shape[1]:
        raise ShapeError(f"weight_by: index {index} out of range for weights {alpha.shape}")

    a = alpha.data[:, index : index + 1]
    out = x.data * a

    def vjp(g):
        dx = g * a if x.tracked else None
        dalpha = None
        if alpha.tracked:
            dalpha = np.zeros_like(alpha.data)
            dalpha[:, index, 0, 0] = (g * x.data).sum(axis=(1, 2, 3))
        return dx, dalpha

    return _finish(out, (x, alpha), vjp)
