"""
Differentiable operations used by the transformer and the discriminator.

Each function takes and returns Tensors and records a closed-form backward
rule on the tape.
"""

import math

import numpy as np

from ..exceptions import ConfigurationError, DimensionError
from .tensor import Tensor, as_tensor, unbroadcast

# Additive bias applied to masked attention logits before the softmax.
MASK_BIAS = -1e9

GELU_COEFF = math.sqrt(2.0 / math.pi)


def _sigmoid(x):
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    exp_x = np.exp(x[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return out


def matmul(a, b):
    """
    Matrix product over the two trailing axes.

    ``a`` is (..., m, k) or a single (k,) vector; ``b`` is (k, n) or
    (..., k, n) with matching leading axes. A vector ``a`` yields (..., n).

    Raises:
        DimensionError: If the inner dimensions disagree
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 1 and b.ndim >= 2:
        out = matmul(a.reshape(1, a.shape[0]), b)
        return out.reshape(tuple(out.shape[:-2]) + (out.shape[-1],))
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    x, y = a.data, b.data

    def backward(grad):
        grad_a = grad @ np.swapaxes(y, -1, -2)
        grad_b = np.swapaxes(x, -1, -2) @ grad
        return unbroadcast(grad_a, x.shape), unbroadcast(grad_b, y.shape)

    return Tensor.from_op(x @ y, (a, b), backward, "matmul")


def linear(x, weight, bias=None):
    """Affine map over the last axis: ``x @ weight + bias``."""
    out = matmul(x, weight)
    if bias is not None:
        out = out + bias
    return out


def concat(tensors, axis=0):
    """Concatenate tensors along ``axis``; gradients are split back."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis
        ):
            raise DimensionError(
                f"concat shape mismatch along axis {axis}: {[t.shape for t in tensors]}"
            )
    boundaries = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(grad):
        return tuple(np.split(grad, boundaries, axis=axis))

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor.from_op(data, tuple(tensors), backward, "concat")


def layer_norm(x, scale=None, shift=None, eps=1e-5):
    """
    Normalize each token over its last axis, then apply an optional affine.

    Args:
        x (Tensor): (..., D) input
        scale (Tensor | None): (D,) multiplier, identity when None
        shift (Tensor | None): (D,) offset, zero when None
        eps (float): added to the variance

    Raises:
        DimensionError: If the last axis is empty or the affine does not match it
    """
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise DimensionError(f"layer_norm needs a non-empty last dimension, got shape {x.shape}")
    width = x.shape[-1]
    parents = [x]
    for param in (scale, shift):
        if param is not None:
            if param.shape != (width,):
                raise DimensionError(f"layer_norm affine shape {param.shape} does not match D={width}")
            parents.append(param)

    data = x.data
    mean = data.mean(axis=-1, keepdims=True)
    centered = data - mean
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    normalized = centered * inv_std
    out = normalized
    if scale is not None:
        out = out * scale.data
    if shift is not None:
        out = out + shift.data

    def backward(grad):
        grad_norm = grad * scale.data if scale is not None else grad
        grad_x = inv_std * (
            grad_norm
            - grad_norm.mean(axis=-1, keepdims=True)
            - normalized * (grad_norm * normalized).mean(axis=-1, keepdims=True)
        )
        grads = [grad_x]
        lead = tuple(range(grad.ndim - 1))
        if scale is not None:
            grads.append((grad * normalized).sum(axis=lead))
        if shift is not None:
            grads.append(grad.sum(axis=lead))
        return tuple(grads)

    return Tensor.from_op(out, tuple(parents), backward, "layer_norm")


def masked_attention(q, k, v, mask, return_weights=False):
    """
    Scaled dot-product attention restricted by a visibility mask.

    Computes softmax(q kᵀ / √D + bias) v where bias is 0 for visible pairs and
    a large negative constant for hidden ones. Hidden pairs are re-zeroed after
    the softmax, so they receive exactly zero weight.

    Args:
        q, k, v (Tensor): (..., n, D) queries, keys and values
        mask: AttentionMask or (n, n) boolean array, query rows by key columns
        return_weights (bool): Also return the attention weights as an array

    Raises:
        DimensionError: On shape disagreement
        ConfigurationError: If a query row has no visible key
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    visible = np.asarray(getattr(mask, "visible", mask), dtype=bool)
    n, width = q.shape[-2], q.shape[-1]
    if k.shape != q.shape or v.shape[:-1] != q.shape[:-1]:
        raise DimensionError(f"attention shape mismatch: q {q.shape}, k {k.shape}, v {v.shape}")
    if visible.shape != (n, n):
        raise DimensionError(f"attention mask shape {visible.shape} does not match {n} tokens")
    empty_rows = np.flatnonzero(~visible.any(axis=1))
    if empty_rows.size:
        raise ConfigurationError(
            f"attention mask leaves query rows {empty_rows.tolist()} without a visible key"
        )

    scale = 1.0 / math.sqrt(width)
    logits = (q.data @ np.swapaxes(k.data, -1, -2)) * scale
    logits = logits + np.where(visible, 0.0, MASK_BIAS).astype(logits.dtype)
    logits = logits - logits.max(axis=-1, keepdims=True)
    weights = np.exp(logits)
    weights = np.where(visible, weights, 0.0).astype(logits.dtype)
    weights = weights / weights.sum(axis=-1, keepdims=True)
    out_data = weights @ v.data
    qd, kd, vd = q.data, k.data, v.data

    def backward(grad):
        grad_v = np.swapaxes(weights, -1, -2) @ grad
        grad_w = grad @ np.swapaxes(vd, -1, -2)
        grad_logits = weights * (grad_w - (grad_w * weights).sum(axis=-1, keepdims=True))
        grad_logits = grad_logits * scale
        grad_q = grad_logits @ kd
        grad_k = np.swapaxes(grad_logits, -1, -2) @ qd
        return grad_q, grad_k, grad_v

    out = Tensor.from_op(out_data, (q, k, v), backward, "masked_attention")
    if return_weights:
        return out, weights
    return out


def gelu(x):
    """GELU with the tanh approximation."""
    x = as_tensor(x)
    data = x.data
    inner = GELU_COEFF * (data + 0.044715 * data ** 3)
    t = np.tanh(inner)
    out = 0.5 * data * (1.0 + t)

    def backward(grad):
        d_inner = GELU_COEFF * (1.0 + 3 * 0.044715 * data * data)
        return (grad * (0.5 * (1.0 + t) + 0.5 * data * (1.0 - t * t) * d_inner),)

    return Tensor.from_op(out, (x,), backward, "gelu")


def silu(x):
    x = as_tensor(x)
    sig = _sigmoid(x.data)

    def backward(grad):
        return (grad * sig * (1.0 + x.data * (1.0 - sig)),)

    return Tensor.from_op(x.data * sig, (x,), backward, "silu")


def leaky_relu(x, slope=0.2):
    x = as_tensor(x)
    factor = np.where(x.data >= 0, 1.0, slope).astype(x.dtype)
    return Tensor.from_op(x.data * factor, (x,), lambda grad: (grad * factor,), "leaky_relu")


def softplus(x):
    """log(1 + exp(x)), evaluated without overflow."""
    x = as_tensor(x)
    data = x.data
    out = np.maximum(data, 0.0) + np.log1p(np.exp(-np.abs(data)))
    sig = _sigmoid(data)
    return Tensor.from_op(out, (x,), lambda grad: (grad * sig,), "softplus")


def sigmoid(x):
    x = as_tensor(x)
    y = _sigmoid(x.data)
    return Tensor.from_op(y, (x,), lambda grad: (grad * y * (1.0 - y),), "sigmoid")
