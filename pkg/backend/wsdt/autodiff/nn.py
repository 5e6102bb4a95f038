"""
Parameter containers for learned components.
"""

import numpy as np

from ..exceptions import DimensionError
from .functional import linear
from .tensor import Tensor


class Parameter(Tensor):
    """A leaf tensor that always requires gradients."""

    def __init__(self, data, name=None):
        super().__init__(data, requires_grad=True, name=name)


class Module:
    """
    Base class for anything that owns parameters.

    Parameters are discovered from instance attributes in assignment order:
    Parameters directly, Modules recursively, and lists/dicts of Modules by
    index/key. Names are dotted paths, e.g. ``ledec.0.attn.qkv.weight``.
    """

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix=""):
        for attr, value in vars(self).items():
            yield from _walk(value, f"{prefix}{attr}")

    def parameters(self):
        return [param for _, param in self.named_parameters()]

    def zero_grad(self):
        for param in self.parameters():
            param.grad = None

    def num_parameters(self):
        return sum(param.size for param in self.parameters())

    def state_dict(self):
        """Map every parameter name to a copy of its values."""
        return {name: param.data.copy() for name, param in self.named_parameters()}

    def load_state_dict(self, state):
        """
        Replace parameter values from a name → array mapping.

        Raises:
            DimensionError: If names are missing/unexpected or a shape differs
        """
        named = dict(self.named_parameters())
        missing = sorted(set(named) - set(state))
        unexpected = sorted(set(state) - set(named))
        if missing or unexpected:
            raise DimensionError(
                f"state does not match module: missing {missing[:5]}, unexpected {unexpected[:5]}"
            )
        for name, param in named.items():
            values = np.asarray(state[name])
            if values.shape != param.shape:
                raise DimensionError(
                    f"parameter '{name}' has shape {param.shape}, state holds {values.shape}"
                )
            param.data = values.astype(param.dtype, copy=True)


def _walk(value, name):
    if isinstance(value, Parameter):
        yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(prefix=f"{name}.")
    elif isinstance(value, (list, tuple)):
        for index, item in enumerate(value):
            if isinstance(item, (Module, Parameter)):
                yield from _walk(item, f"{name}.{index}")
    elif isinstance(value, dict):
        for key, item in value.items():
            if isinstance(item, (Module, Parameter)):
                yield from _walk(item, f"{name}.{key}")


def xavier_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear(Module):
    """
    y = x W + b over the last axis.

    Weights are Xavier-uniform with zero bias, or all zeros when ``zero`` is set
    (used for AdaLN-Zero modulation and output heads).
    """

    def __init__(self, in_features, out_features, rng, bias=True, zero=False):
        self.in_features = in_features
        self.out_features = out_features
        if zero:
            weight = np.zeros((in_features, out_features))
        else:
            weight = xavier_uniform(rng, in_features, out_features)
        self.weight = Parameter(weight)
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x):
        return linear(x, self.weight, self.bias)
