"""
Finite-difference oracle for verifying analytic gradients.

Intended for float64 runs (see ``precision``); float32 lacks the headroom.
"""

import numpy as np

from .tensor import backward, no_grad

RELATIVE_FLOOR = 1e-5


def numerical_gradient(loss_fn, tensor, h=1e-5, indices=None):
    """
    Central-difference estimate of d loss_fn() / d tensor.

    Args:
        loss_fn (callable): Re-evaluates the scalar loss from current tensor values
        tensor (Tensor): Tensor whose entries are perturbed in place
        h (float): Step size
        indices (iterable | None): Flat indices to estimate; all entries when None

    Returns:
        np.ndarray: Estimates for the chosen entries, in ``indices`` order
    """
    if not tensor.data.flags.c_contiguous:
        tensor.data = np.ascontiguousarray(tensor.data)
    flat = tensor.data.reshape(-1)
    if indices is None:
        indices = range(flat.size)
    estimates = []
    with no_grad():
        for index in indices:
            original = flat[index]
            flat[index] = original + h
            upper = float(loss_fn().item())
            flat[index] = original - h
            lower = float(loss_fn().item())
            flat[index] = original
            estimates.append((upper - lower) / (2.0 * h))
    return np.asarray(estimates)


def max_relative_error(analytic, numeric, floor=RELATIVE_FLOOR):
    """Largest |a - n| / max(|a|, |n|, floor) over all entries."""
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)
    numeric = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if analytic.size == 0:
        return 0.0
    denominator = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denominator))


def check_gradients(loss_fn, named_tensors, h=1e-5, max_entries=None, rng=None):
    """
    Compare analytic and numerical gradients for several tensors.

    Args:
        loss_fn (callable): Builds the scalar loss from the current values
        named_tensors (iterable): (name, Tensor) pairs with requires_grad set
        max_entries (int | None): Check at most this many random entries per tensor
        rng (np.random.Generator | None): Chooses the checked entries

    Returns:
        dict: name → max relative error
    """
    named_tensors = list(named_tensors)
    for _, tensor in named_tensors:
        tensor.grad = None
    backward(loss_fn())
    rng = rng if rng is not None else np.random.default_rng(0)
    errors = {}
    for name, tensor in named_tensors:
        analytic = (
            tensor.grad.reshape(-1) if tensor.grad is not None else np.zeros(tensor.size)
        )
        if max_entries is not None and tensor.size > max_entries:
            indices = np.sort(rng.choice(tensor.size, size=max_entries, replace=False))
        else:
            indices = np.arange(tensor.size)
        numeric = numerical_gradient(loss_fn, tensor, h=h, indices=indices)
        errors[name] = max_relative_error(analytic[indices], numeric)
    return errors
