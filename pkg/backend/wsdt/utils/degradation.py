"""
Resolution change operators: the LR degradation and upsampling baselines.
"""

import numpy as np
from PIL import Image

from ..exceptions import ConfigurationError, DimensionError

DEGRADATIONS = ("box", "bicubic")


def _check(image, method):
    if method not in DEGRADATIONS:
        raise ConfigurationError(f"unknown degradation '{method}', expected one of {DEGRADATIONS}")
    image = np.asarray(image)
    if image.ndim < 3:
        raise DimensionError(f"image must be (..., H, W, C), got shape {image.shape}")
    return image


def _resize_planes(image, height, width):
    """Bicubic resize of every (H, W) plane through Pillow's float mode."""
    *lead, old_h, old_w, channels = image.shape
    planes = np.moveaxis(image, -1, -3).reshape(-1, old_h, old_w).astype(np.float32)
    resized = np.stack([
        np.asarray(Image.fromarray(plane).resize((width, height), Image.Resampling.BICUBIC))
        for plane in planes
    ])
    resized = resized.reshape(tuple(lead) + (channels, height, width))
    return np.moveaxis(resized, -3, -1)


def downsample(image, scale, method="box"):
    """
    Reduce H and W by ``scale``.

    ``box`` is the exact scale×scale block mean; ``bicubic`` uses Pillow.

    Raises:
        DimensionError: If H or W is not divisible by ``scale``
    """
    image = _check(image, method)
    *lead, height, width, channels = image.shape
    if height % scale or width % scale:
        raise DimensionError(f"{height}x{width} image is not divisible by scale {scale}")
    if method == "box":
        blocks = image.reshape(tuple(lead) + (height // scale, scale, width // scale, scale, channels))
        return blocks.mean(axis=(-4, -2)).astype(image.dtype, copy=False)
    return _resize_planes(image, height // scale, width // scale).astype(image.dtype, copy=False)


def upsample(image, scale, method="box"):
    """
    Enlarge H and W by ``scale``: pixel replication for ``box``, Pillow bicubic otherwise.

    Box upsampling is an exact right inverse of box downsampling.
    """
    image = _check(image, method)
    if method == "box":
        return np.repeat(np.repeat(image, scale, axis=-3), scale, axis=-2)
    height, width = image.shape[-3], image.shape[-2]
    return _resize_planes(image, height * scale, width * scale).astype(image.dtype, copy=False)
