from .tensor import (
    Tape,
    Tensor,
    as_tensor,
    backward,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    precision,
)
from .functional import (
    concat,
    gelu,
    layer_norm,
    leaky_relu,
    linear,
    masked_attention,
    matmul,
    sigmoid,
    silu,
    softplus,
)
from .nn import Linear, Module, Parameter
from .optim import Adam

__all__ = [
    "Tape",
    "Tensor",
    "as_tensor",
    "backward",
    "get_default_dtype",
    "is_grad_enabled",
    "no_grad",
    "precision",
    "concat",
    "gelu",
    "layer_norm",
    "leaky_relu",
    "linear",
    "masked_attention",
    "matmul",
    "sigmoid",
    "silu",
    "softplus",
    "Linear",
    "Module",
    "Parameter",
    "Adam",
]
