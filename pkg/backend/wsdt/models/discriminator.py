"""
Time-dependent discriminator over (candidate I_{t−1}, context I_t) pairs.
"""

import numpy as np

from ..autodiff import Module, as_tensor, concat, leaky_relu
from ..autodiff.nn import Linear
from ..exceptions import DimensionError
from ..tokenizer import patchify
from .blocks import TimestepEmbedder

MIN_SPATIAL = 8
MAX_WIDTH = 256


class DownBlock(Module):
    """Stride-2 patch convolution (kernel = stride = 2) plus a timestep bias."""

    def __init__(self, in_channels, out_channels, t_dim, rng):
        self.conv = Linear(4 * in_channels, out_channels, rng)
        self.time = Linear(t_dim, out_channels, rng)

    def forward(self, x, temb):
        *lead, height, width, _ = x.shape
        h = self.conv(patchify(x, 2))
        bias = self.time(temb)
        h = h + bias.reshape(tuple(bias.shape[:-1]) + (1, bias.shape[-1]))
        h = leaky_relu(h, 0.2)
        return h.reshape(tuple(lead) + (height // 2, width // 2, h.shape[-1]))


class Discriminator(Module):
    """
    Small strided stack over the channel concatenation of a pair.

    Halves the resolution until it is at most 8 pixels, mean-pools the
    features and maps them to one logit per pair. The logit layer starts at
    zero, so a fresh discriminator scores every pair 0.

    Args:
        image_size (int): HR height and width
        channels (int): image channels
        timesteps (int): diffusion steps T
        width (int): features of the first block; doubles per block up to 256
        seed (int): initialisation seed
    """

    def __init__(self, image_size, channels, timesteps, width=64, seed=0):
        rng = np.random.default_rng(seed)
        if image_size % 2:
            raise DimensionError(f"discriminator needs an even image size, got {image_size}")
        self.image_size = image_size
        self.channels = channels
        t_dim = max(8, width // 2)
        self.t_embedder = TimestepEmbedder(t_dim, timesteps, rng)
        self.blocks = []
        size, in_channels, out_channels = image_size, 2 * channels, width
        while not self.blocks or size > MIN_SPATIAL:
            if size % 2:
                break
            self.blocks.append(DownBlock(in_channels, out_channels, t_dim, rng))
            size //= 2
            in_channels, out_channels = out_channels, min(2 * out_channels, MAX_WIDTH)
        self.logit = Linear(in_channels, 1, rng, zero=True)

    def forward(self, candidate, context, t):
        """
        Score (candidate, context) pairs.

        Args:
            candidate, context: (B, H, W, C) images, arrays or Tensors
            t (int | array): timestep

        Returns:
            Tensor: (B,) logits
        """
        candidate, context = as_tensor(candidate), as_tensor(context)
        if candidate.shape != context.shape or candidate.ndim != 4:
            raise DimensionError(
                f"discriminator needs two (B, H, W, C) images of one shape, got {candidate.shape} and {context.shape}"
            )
        temb = self.t_embedder(t)
        h = concat([candidate, context], axis=-1)
        for block in self.blocks:
            h = block(h, temb)
        pooled = h.mean(axis=(1, 2))
        return self.logit(pooled).reshape(candidate.shape[0])
