"""
Orthonormal Haar wavelet transforms and the packed multi-level spectrum.

Conventions (the literature is not consistent about them):

* For each 2×2 block [[a, b], [c, d]] one analysis step yields
  x_L = (a+b+c+d)/2, x_V = (a-b+c-d)/2, x_H = (a+b-c-d)/2, x_D = (a-b-c+d)/2.
  x_V holds differences along the horizontal axis (vertical edges), x_H
  differences along the vertical axis.
* Packed layout: inside the (H/2^{j-1})×(W/2^{j-1}) region of level j, the
  top-left quadrant holds the next level (or x_L^J at j = J), x_V^j the
  top-right, x_H^j the bottom-left and x_D^j the bottom-right quadrant.

Images are (..., H, W, C) arrays; leading axes are batch axes.
"""

from dataclasses import dataclass
from enum import IntEnum
from typing import Any

import numpy as np

from .autodiff import Tensor, get_default_dtype
from .exceptions import ContractError, DimensionError


class SubBand(IntEnum):
    """Sub-band index d used in 4D token positions."""

    L = 0
    V = 1
    D = 2
    H = 3


# Order in which the detail sub-bands of a level are enumerated.
DETAIL_BANDS = (SubBand.V, SubBand.H, SubBand.D)


def _check_image(array, name="image"):
    if array.ndim < 3:
        raise DimensionError(f"{name} must be (..., H, W, C), got shape {array.shape}")


def _as_float(array):
    # Integer input is computed in the default float dtype.
    array = np.asarray(array)
    if array.dtype.kind != "f":
        array = array.astype(get_default_dtype())
    return array


def dwt2d(image):
    """
    One level of the orthonormal Haar analysis.

    Args:
        image (np.ndarray): (..., H, W, C) with even H and W

    Returns:
        tuple: (x_L, x_V, x_H, x_D), each (..., H/2, W/2, C)

    Raises:
        DimensionError: If H or W is odd
    """
    image = _as_float(image)
    _check_image(image)
    height, width = image.shape[-3], image.shape[-2]
    if height % 2 or width % 2:
        raise DimensionError(f"dwt2d needs even dims, got {height}x{width}")
    a = image[..., 0::2, 0::2, :]
    b = image[..., 0::2, 1::2, :]
    c = image[..., 1::2, 0::2, :]
    d = image[..., 1::2, 1::2, :]
    low = (a + b + c + d) / 2
    vertical = (a - b + c - d) / 2
    horizontal = (a + b - c - d) / 2
    diagonal = (a - b - c + d) / 2
    return low, vertical, horizontal, diagonal


def idwt2d(low, vertical, horizontal, diagonal):
    """
    Exact inverse of ``dwt2d``.

    Raises:
        DimensionError: If the four sub-bands differ in shape
    """
    bands = [_as_float(band) for band in (low, vertical, horizontal, diagonal)]
    shapes = {band.shape for band in bands}
    if len(shapes) != 1:
        raise DimensionError(f"idwt2d sub-band shapes differ: {[band.shape for band in bands]}")
    low, vertical, horizontal, diagonal = bands
    _check_image(low, "sub-band")
    *lead, height, width, channels = low.shape
    dtype = np.result_type(*bands)
    image = np.empty((*lead, 2 * height, 2 * width, channels), dtype=dtype)
    image[..., 0::2, 0::2, :] = (low + vertical + horizontal + diagonal) / 2
    image[..., 0::2, 1::2, :] = (low - vertical + horizontal - diagonal) / 2
    image[..., 1::2, 0::2, :] = (low + vertical - horizontal - diagonal) / 2
    image[..., 1::2, 1::2, :] = (low - vertical - horizontal + diagonal) / 2
    return image


def check_divisible(height, width, levels):
    """Raise DimensionError unless both dims are divisible by 2^levels."""
    if levels < 1:
        raise ContractError(f"wavelet levels must be >= 1, got {levels}")
    factor = 2 ** levels
    if height % factor or width % factor:
        raise DimensionError(
            f"dims not divisible by 2^{levels}={factor}: {height}x{width}"
        )


def _pack(image, levels):
    check_divisible(image.shape[-3], image.shape[-2], levels)
    packed = np.array(_as_float(image), copy=True)
    height, width = image.shape[-3], image.shape[-2]
    for _ in range(levels):
        low, vertical, horizontal, diagonal = dwt2d(packed[..., :height, :width, :])
        half_h, half_w = height // 2, width // 2
        packed[..., :half_h, :half_w, :] = low
        packed[..., :half_h, half_w:width, :] = vertical
        packed[..., half_h:height, :half_w, :] = horizontal
        packed[..., half_h:height, half_w:width, :] = diagonal
        height, width = half_h, half_w
    return packed


def _unpack(packed, levels):
    check_divisible(packed.shape[-3], packed.shape[-2], levels)
    image = np.array(_as_float(packed), copy=True)
    full_h, full_w = packed.shape[-3], packed.shape[-2]
    for level in range(levels, 0, -1):
        height, width = full_h >> (level - 1), full_w >> (level - 1)
        half_h, half_w = height // 2, width // 2
        image[..., :height, :width, :] = idwt2d(
            image[..., :half_h, :half_w, :],
            image[..., :half_h, half_w:width, :],
            image[..., half_h:height, :half_w, :],
            image[..., half_h:height, half_w:width, :],
        )
    return image


@dataclass(frozen=True)
class WaveletSpectrum:
    """
    Packed J-level Mallat decomposition of one image (or a batch).

    ``data`` is a numpy array, or a Tensor when the spectrum takes part in
    gradient computation.
    """

    data: Any
    levels: int

    def __post_init__(self):
        shape = self.data.shape
        if len(shape) < 3:
            raise DimensionError(f"spectrum must be (..., H, W, C), got shape {shape}")
        check_divisible(shape[-3], shape[-2], self.levels)

    @property
    def height(self):
        return self.data.shape[-3]

    @property
    def width(self):
        return self.data.shape[-2]

    @property
    def channels(self):
        return self.data.shape[-1]

    def lowpass(self):
        """x_L^J, the top-left (H/2^J)×(W/2^J) block."""
        h, w = self.height >> self.levels, self.width >> self.levels
        return self.data[..., :h, :w, :]

    def band(self, level, subband):
        """
        Detail sub-band x_d^j as a view of the packed data.

        Args:
            level (int): 1..J, 1 being the finest
            subband (SubBand): V, H or D
        """
        if not 1 <= level <= self.levels:
            raise ContractError(f"level must be in 1..{self.levels}, got {level}")
        h, w = self.height >> level, self.width >> level
        if subband == SubBand.V:
            return self.data[..., :h, w:2 * w, :]
        if subband == SubBand.H:
            return self.data[..., h:2 * h, :w, :]
        if subband == SubBand.D:
            return self.data[..., h:2 * h, w:2 * w, :]
        raise ContractError(f"band() takes a detail sub-band, got {subband!r}")


def mdwt(image, levels):
    """
    J-level Mallat decomposition packed into a WaveletSpectrum.

    Accepts a numpy array or a Tensor; a Tensor input yields a differentiable
    spectrum whose backward rule is the inverse transform (the transform is
    orthonormal, so its adjoint is its inverse).

    Raises:
        DimensionError: If H or W is not divisible by 2^J
    """
    if isinstance(image, Tensor):
        _check_image(image.data)

        def backward(grad):
            return (_unpack(grad, levels),)

        data = Tensor.from_op(_pack(image.data, levels), (image,), backward, "mdwt")
        return WaveletSpectrum(data, levels)
    image = np.asarray(image)
    _check_image(image)
    return WaveletSpectrum(_pack(image, levels), levels)


def imdwt(spectrum):
    """
    Inverse of ``mdwt``: rebuild the pixel image from a packed spectrum.

    Returns a Tensor when the spectrum data is a Tensor, else a numpy array.
    """
    levels = spectrum.levels
    data = spectrum.data
    if isinstance(data, Tensor):

        def backward(grad):
            return (_pack(grad, levels),)

        return Tensor.from_op(_unpack(data.data, levels), (data,), backward, "imdwt")
    return _unpack(np.asarray(data), levels)


def level_for_scale(scale):
    """
    Number of wavelet levels for an upscale factor: the smallest J with 2^J >= N.

    Raises:
        ContractError: If N is not an integer >= 2
    """
    if isinstance(scale, bool) or not isinstance(scale, (int, np.integer)) or scale < 2:
        raise ContractError(f"upscale factor must be an integer >= 2, got {scale}")
    return (int(scale) - 1).bit_length()


def _stretch_lowpass(block):
    low, high = float(block.min()), float(block.max())
    if high == low:
        return np.full(block.shape, 127.5)
    return (block - low) * (255.0 / (high - low))


def _stretch_detail(block):
    peak = float(np.abs(block).max())
    if peak == 0.0:
        return np.full(block.shape, 127.5)
    return 127.5 + block * (127.5 / peak)


def visualize_spectrum(spectrum):
    """
    Render a packed spectrum as an 8-bit image of the same size.

    Each sub-band is stretched independently: the lowpass block min–max to
    [0, 255], detail bands symmetrically so that zero maps to mid-gray.

    Returns:
        np.ndarray: uint8 array shaped like ``spectrum.data``
    """
    source = WaveletSpectrum(np.asarray(spectrum.data, dtype=np.float64), spectrum.levels)
    view = WaveletSpectrum(np.empty_like(source.data), source.levels)
    h, w = source.height >> source.levels, source.width >> source.levels
    view.data[..., :h, :w, :] = _stretch_lowpass(source.lowpass())
    for level in range(1, source.levels + 1):
        for subband in DETAIL_BANDS:
            view.band(level, subband)[...] = _stretch_detail(source.band(level, subband))
    return np.clip(np.rint(view.data), 0, 255).astype(np.uint8)
