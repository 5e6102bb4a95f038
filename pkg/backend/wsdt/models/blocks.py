"""
Transformer building blocks with adaptive layer norm zero (AdaLN-Zero)
conditioning on the diffusion timestep.
"""

import math

import numpy as np

from ..autodiff import Module, gelu, layer_norm, masked_attention, silu
from ..autodiff.nn import Linear
from ..exceptions import ContractError

LN_EPS = 1e-5


def modulate(x, shift, scale):
    """
    Apply a per-sample shift and scale to every token.

    Args:
        x (Tensor): (..., n, D) tokens
        shift, scale (Tensor): (..., D) conditioning vectors

    Returns:
        Tensor: x · (1 + scale) + shift
    """
    return x * (_per_token(scale) + 1.0) + _per_token(shift)


def _per_token(vector):
    # (..., D) → (..., 1, D) so it broadcasts over the token axis
    return vector.reshape(tuple(vector.shape[:-1]) + (1, vector.shape[-1]))


def _chunks(tensor, count):
    width = tensor.shape[-1] // count
    return [tensor[..., i * width:(i + 1) * width] for i in range(count)]


def timestep_frequencies(t, dim, max_period=10000):
    """
    Sinusoidal embedding of integer timesteps, sines first.

    Args:
        t (array-like): scalar or (B,) timesteps
        dim (int): output width (even)

    Returns:
        np.ndarray: (..., dim) with sin(t·f_i) followed by cos(t·f_i)
    """
    half = dim // 2
    freqs = np.exp(-math.log(max_period) * np.arange(half, dtype=np.float64) / half)
    args = np.asarray(t, dtype=np.float64)[..., None] * freqs
    return np.concatenate([np.sin(args), np.cos(args)], axis=-1)


class TimestepEmbedder(Module):
    """
    Embeds integer timesteps into D-vectors: sinusoid, then Linear → SiLU → Linear.
    """

    def __init__(self, dim, timesteps, rng, frequency_dim=None):
        self.dim = dim
        self.timesteps = timesteps
        self.frequency_dim = frequency_dim or dim
        self.fc1 = Linear(self.frequency_dim, dim, rng)
        self.fc2 = Linear(dim, dim, rng)

    def check(self, t):
        values = np.asarray(t)
        if values.dtype.kind not in "iu" and not np.all(np.equal(np.mod(values, 1), 0)):
            raise ContractError(f"timesteps must be integers, got {t}")
        if np.any(values < 0) or np.any(values >= self.timesteps):
            raise ContractError(f"timestep {t} outside [0, {self.timesteps})")
        return values.astype(np.int64)

    def frequencies(self, t):
        return timestep_frequencies(self.check(t), self.frequency_dim)

    def forward(self, t):
        return self.fc2(silu(self.fc1(self.frequencies(t))))


class Attention(Module):
    """Multi-head masked self-attention with a fused qkv projection."""

    def __init__(self, dim, n_heads, rng):
        self.dim = dim
        self.n_heads = n_heads
        self.qkv = Linear(dim, 3 * dim, rng)
        self.proj = Linear(dim, dim, rng)

    def _split_heads(self, x):
        *lead, n, _ = x.shape
        head_dim = self.dim // self.n_heads
        k = len(lead)
        x = x.reshape(tuple(lead) + (n, self.n_heads, head_dim))
        return x.transpose(tuple(range(k)) + (k + 1, k, k + 2))

    def _merge_heads(self, x):
        *lead, heads, n, head_dim = x.shape
        k = len(lead)
        x = x.transpose(tuple(range(k)) + (k + 1, k, k + 2))
        return x.reshape(tuple(lead) + (n, heads * head_dim))

    def forward(self, x, mask):
        q, k, v = _chunks(self.qkv(x), 3)
        out = masked_attention(self._split_heads(q), self._split_heads(k), self._split_heads(v), mask)
        return self.proj(self._merge_heads(out))


class Mlp(Module):
    def __init__(self, dim, hidden, rng):
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def forward(self, x):
        return self.fc2(gelu(self.fc1(x)))


class TransBlock(Module):
    """
    Pre-LN transformer block with AdaLN-Zero conditioning.

    The modulation Linear produces shift/scale/gate for the attention and MLP
    branches. It starts at zero, so every gate is zero and the block is the
    identity until training moves it.
    """

    def __init__(self, dim, n_heads, mlp_ratio, rng):
        self.attn = Attention(dim, n_heads, rng)
        self.mlp = Mlp(dim, int(dim * mlp_ratio), rng)
        self.modulation = Linear(dim, 6 * dim, rng, zero=True)

    def forward(self, x, mask, temb):
        shift_a, scale_a, gate_a, shift_m, scale_m, gate_m = _chunks(self.modulation(silu(temb)), 6)
        x = x + _per_token(gate_a) * self.attn(modulate(layer_norm(x, eps=LN_EPS), shift_a, scale_a), mask)
        x = x + _per_token(gate_m) * self.mlp(modulate(layer_norm(x, eps=LN_EPS), shift_m, scale_m))
        return x


class OutputHead(Module):
    """
    Final AdaLN (shift and scale, no gate) and a linear map to patch values.

    Both Linears start at zero, so a fresh head decodes every token to zeros.
    """

    def __init__(self, dim, out_features, rng):
        self.modulation = Linear(dim, 2 * dim, rng, zero=True)
        self.linear = Linear(dim, out_features, rng, zero=True)

    def forward(self, tokens, temb):
        shift, scale = _chunks(self.modulation(silu(temb)), 2)
        return self.linear(modulate(layer_norm(tokens, eps=LN_EPS), shift, scale))
