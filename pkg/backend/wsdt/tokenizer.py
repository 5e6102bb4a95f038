"""
Pyramid tokenization of a wavelet spectrum plus its LR condition image.

Token order is fixed by the PatchPlan: the LR block, then the LF block
(x_L^J), then the HF blocks by level j = J..1 and sub-band V, H, D. Inside a
block, patches enumerate the grid row-major. Every token carries a 4D position
[j, d, Pos_h, Pos_w]; LR tokens use level 0.
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
import logging

import numpy as np

from .autodiff import Module, Tensor, as_tensor, concat
from .autodiff.nn import Linear
from .exceptions import ConfigurationError, DimensionError
from .wavelet import DETAIL_BANDS, SubBand, WaveletSpectrum

logger = logging.getLogger(__name__)

POSITION_BASE = 10000.0


class Segment(Enum):
    LR = "LR"
    LF = "LF"
    HF = "HF"


@dataclass(frozen=True)
class Stream:
    """
    One token stream: a single image region cut into equal patches.

    ``top``/``left`` locate the region inside the packed spectrum (or the LR
    image for the LR stream); ``offset`` is the index of its first token.
    """

    segment: Segment
    level: int
    subband: SubBand
    patch: int
    grid_h: int
    grid_w: int
    top: int
    left: int
    offset: int

    @property
    def key(self):
        if self.segment is Segment.LR:
            return "lr"
        if self.segment is Segment.LF:
            return "lf"
        return f"hf{self.level}{self.subband.name.lower()}"

    @property
    def count(self):
        return self.grid_h * self.grid_w

    @property
    def features(self):
        return self.patch * self.patch

    def region(self, array):
        """Slice this stream's region out of a (..., H, W, C) array or Tensor."""
        height, width = self.grid_h * self.patch, self.grid_w * self.patch
        return array[..., self.top:self.top + height, self.left:self.left + width, :]


@dataclass(frozen=True)
class PatchPlan:
    """
    Geometry of one tokenization: sizes, levels, patch sizes and token order.

    In pyramid mode the level-j patch size is p_min·2^{J−j}, so every
    sub-band splits into the same g_h×g_w grid and each token covers the same
    (p_min·2^J)² pixel footprint. With ``pyramid=False`` every spectrum stream
    uses p_min and the HF grids grow towards the fine levels.
    """

    height: int
    width: int
    levels: int
    p_min: int
    lr_height: int
    lr_width: int
    lr_patch: int
    dim: int
    channels: int = 3
    pyramid: bool = True

    def __post_init__(self):
        if self.levels < 1:
            raise ConfigurationError(f"levels must be >= 1, got {self.levels}")
        for name in ("p_min", "lr_patch", "channels", "dim"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.dim % 8:
            raise ConfigurationError(f"dim {self.dim} is not divisible by 8")
        factor = self.p_min * 2 ** self.levels
        for name in ("height", "width"):
            if getattr(self, name) % factor:
                raise ConfigurationError(
                    f"{name} {getattr(self, name)} is not divisible by p_min·2^J = {factor}"
                )
        for name in ("lr_height", "lr_width"):
            if getattr(self, name) < 1 or getattr(self, name) % self.lr_patch:
                raise ConfigurationError(
                    f"{name} {getattr(self, name)} is not divisible by lr_patch = {self.lr_patch}"
                )

    def patch_size(self, level):
        """Patch size for sub-bands of ``level`` (1 is the finest)."""
        if self.pyramid:
            return self.p_min * 2 ** (self.levels - level)
        return self.p_min

    @property
    def patch_sizes(self):
        return [self.patch_size(level) for level in range(1, self.levels + 1)]

    @property
    def grid(self):
        """(g_h, g_w) of the LF sub-band."""
        return (
            (self.height >> self.levels) // self.p_min,
            (self.width >> self.levels) // self.p_min,
        )

    @cached_property
    def streams(self):
        streams = []
        offset = 0

        def add(**fields):
            nonlocal offset
            stream = Stream(offset=offset, **fields)
            streams.append(stream)
            offset += stream.count

        add(
            segment=Segment.LR, level=0, subband=SubBand.L, patch=self.lr_patch,
            grid_h=self.lr_height // self.lr_patch, grid_w=self.lr_width // self.lr_patch,
            top=0, left=0,
        )
        grid_h, grid_w = self.grid
        add(
            segment=Segment.LF, level=self.levels, subband=SubBand.L, patch=self.p_min,
            grid_h=grid_h, grid_w=grid_w, top=0, left=0,
        )
        for level in range(self.levels, 0, -1):
            patch = self.patch_size(level)
            band_h, band_w = self.height >> level, self.width >> level
            corners = {
                SubBand.V: (0, band_w),
                SubBand.H: (band_h, 0),
                SubBand.D: (band_h, band_w),
            }
            for subband in DETAIL_BANDS:
                top, left = corners[subband]
                add(
                    segment=Segment.HF, level=level, subband=subband, patch=patch,
                    grid_h=band_h // patch, grid_w=band_w // patch, top=top, left=left,
                )
        return tuple(streams)

    @property
    def token_count(self):
        return sum(stream.count for stream in self.streams)

    def count(self, segment):
        return sum(stream.count for stream in self.streams if stream.segment is segment)

    def stream(self, key):
        for stream in self.streams:
            if stream.key == key:
                return stream
        raise KeyError(key)

    @cached_property
    def segments(self):
        """Segment label of every token, in sequence order."""
        labels = []
        for stream in self.streams:
            labels.extend([stream.segment] * stream.count)
        return tuple(labels)

    @cached_property
    def positions(self):
        """(n, 4) integer array of [j, d, Pos_h, Pos_w] per token."""
        rows = []
        for stream in self.streams:
            pos_h, pos_w = np.meshgrid(
                np.arange(stream.grid_h), np.arange(stream.grid_w), indexing="ij"
            )
            block = np.empty((stream.count, 4), dtype=np.int64)
            block[:, 0] = stream.level
            block[:, 1] = int(stream.subband)
            block[:, 2] = pos_h.reshape(-1)
            block[:, 3] = pos_w.reshape(-1)
            rows.append(block)
        positions = np.concatenate(rows, axis=0)
        positions.flags.writeable = False
        return positions

    @property
    def token_levels(self):
        """Wavelet level of every token (0 for LR)."""
        return self.positions[:, 0]

    def footprint(self, stream, row, col):
        """
        Pixel rectangle (top, left, height, width) of the HR image a token covers.

        Args:
            stream (Stream | str): the stream or its key
            row, col (int): patch coordinates inside the stream's grid
        """
        if isinstance(stream, str):
            stream = self.stream(stream)
        if stream.segment is Segment.LR:
            scale = self.height // self.lr_height
        else:
            scale = 2 ** stream.level
        size = stream.patch * scale
        return (row * size, col * size, size, size)

    def brute_force_count(self):
        """Count patches by walking every stream's region patch by patch."""
        total = 0
        for stream in self.streams:
            if stream.segment is Segment.LR:
                height, width = self.lr_height, self.lr_width
            else:
                height, width = self.height >> stream.level, self.width >> stream.level
            for _top in range(0, height - stream.patch + 1, stream.patch):
                for _left in range(0, width - stream.patch + 1, stream.patch):
                    total += 1
        return total


def plan_patches(height, width, levels, p_min, lr_size, dim, lr_patch=2, channels=3, pyramid=True):
    """
    Build the PatchPlan for an HR geometry.

    Args:
        height, width (int): HR image size
        levels (int): wavelet levels J
        p_min (int): LF patch size
        lr_size (int | tuple): LR image size, square when an int
        dim (int): embedding width D
        lr_patch (int): LR patch size
        channels (int): image channels C
        pyramid (bool): pyramid patch sizes, or one patch size for all streams

    Raises:
        ConfigurationError: naming the first dimension that does not divide
    """
    if isinstance(lr_size, int):
        lr_height = lr_width = lr_size
    else:
        lr_height, lr_width = lr_size
    return PatchPlan(
        height=height, width=width, levels=levels, p_min=p_min,
        lr_height=lr_height, lr_width=lr_width, lr_patch=lr_patch,
        dim=dim, channels=channels, pyramid=pyramid,
    )


def encode_position(positions, dim):
    """
    Fixed sine-cosine encoding of 4D token positions.

    Each of the four components [j, d, Pos_h, Pos_w] gets D/4 dimensions:
    D/8 sines followed by D/8 cosines at frequencies 1/10000^(i/(D/8)).

    Args:
        positions (array-like): (..., 4) integer positions
        dim (int): D, divisible by 8

    Returns:
        np.ndarray: (..., D) float64 encodings
    """
    if dim % 8:
        raise ConfigurationError(f"positional encoding dim {dim} is not divisible by 8")
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape[-1] != 4:
        raise DimensionError(f"positions must end in 4 components, got shape {positions.shape}")
    half = dim // 8
    omega = 1.0 / POSITION_BASE ** (np.arange(half, dtype=np.float64) / half)
    parts = []
    for component in range(4):
        angles = positions[..., component:component + 1] * omega
        parts.append(np.sin(angles))
        parts.append(np.cos(angles))
    return np.concatenate(parts, axis=-1)


def patchify(array, patch):
    """
    (..., g_h·p, g_w·p, C) → (..., g_h·g_w, p·p·C), grid row-major.

    Works on numpy arrays and Tensors alike.
    """
    *lead, height, width, channels = array.shape
    if height % patch or width % patch:
        raise DimensionError(f"cannot cut {height}x{width} into {patch}x{patch} patches")
    grid_h, grid_w = height // patch, width // patch
    n = len(lead)
    out = array.reshape(tuple(lead) + (grid_h, patch, grid_w, patch, channels))
    out = out.transpose(tuple(range(n)) + (n, n + 2, n + 1, n + 3, n + 4))
    return out.reshape(tuple(lead) + (grid_h * grid_w, patch * patch * channels))


def unpatchify(tokens, grid_h, grid_w, patch, channels):
    """Inverse of ``patchify``."""
    *lead, count, features = tokens.shape
    if count != grid_h * grid_w or features != patch * patch * channels:
        raise DimensionError(
            f"{count} tokens of width {features} do not fill a {grid_h}x{grid_w} grid "
            f"of {patch}x{patch}x{channels} patches"
        )
    n = len(lead)
    out = tokens.reshape(tuple(lead) + (grid_h, grid_w, patch, patch, channels))
    out = out.transpose(tuple(range(n)) + (n, n + 2, n + 1, n + 3, n + 4))
    return out.reshape(tuple(lead) + (grid_h * patch, grid_w * patch, channels))


class PyramidEmbedding(Module):
    """
    Stream-specific patch projections (kernel = stride = patch size).

    One Linear per stream: LR, LF and each (level, sub-band) HF stream.
    """

    def __init__(self, plan, rng):
        self.plan = plan
        self.projections = {
            stream.key: Linear(stream.features * plan.channels, plan.dim, rng)
            for stream in plan.streams
        }
        self.position_table = encode_position(plan.positions, plan.dim)

    def embed_stream(self, stream, source):
        patches = patchify(stream.region(source), stream.patch)
        return self.projections[stream.key](patches)


@dataclass(frozen=True)
class TokenSequence:
    """Token embeddings (..., n, D) with their plan-derived positions and segments."""

    embeddings: Tensor
    plan: PatchPlan

    @property
    def positions(self):
        return self.plan.positions

    @property
    def segments(self):
        return self.plan.segments

    def block(self, segment):
        """Embeddings of one segment, as a contiguous slice of the sequence."""
        start = 0
        for label in Segment:
            count = self.plan.count(label)
            if label is segment:
                return self.embeddings[..., start:start + count, :]
            start += count
        raise KeyError(segment)


def tokenize(spectrum, lr, plan, embedding):
    """
    Embed a packed spectrum and its LR image into one token sequence.

    Args:
        spectrum (WaveletSpectrum): (..., H, W, C) packed spectrum
        lr: (..., h, w, C) LR condition image, array or Tensor
        plan (PatchPlan): geometry
        embedding (PyramidEmbedding): per-stream projections

    Returns:
        TokenSequence: embeddings plus the fixed positional encodings

    Raises:
        DimensionError: If spectrum or LR dims do not match the plan
    """
    data = as_tensor(spectrum.data)
    lr = as_tensor(lr)
    expected = (plan.height, plan.width, plan.channels)
    if tuple(data.shape[-3:]) != expected or spectrum.levels != plan.levels:
        raise DimensionError(
            f"spectrum {data.shape} with J={spectrum.levels} does not match plan "
            f"{expected} with J={plan.levels}"
        )
    expected_lr = (plan.lr_height, plan.lr_width, plan.channels)
    if tuple(lr.shape[-3:]) != expected_lr:
        raise DimensionError(f"LR image {lr.shape} does not match plan {expected_lr}")
    if lr.shape[:-3] != data.shape[:-3]:
        raise DimensionError(f"batch axes differ: spectrum {data.shape}, LR {lr.shape}")

    blocks = []
    for stream in plan.streams:
        source = lr if stream.segment is Segment.LR else data
        blocks.append(embedding.embed_stream(stream, source))
    tokens = concat(blocks, axis=-2) + embedding.position_table
    return TokenSequence(tokens, plan)


def detokenize(lf_tokens, hf_tokens, plan, heads, temb):
    """
    Decode LF and HF tokens back into a packed wavelet spectrum.

    Args:
        lf_tokens (Tensor): (..., n_LF, D), already f̃_Le + f̃_Lr when residuals are on
        hf_tokens (Tensor): (..., n_HF, D) in plan order
        plan (PatchPlan): geometry
        heads (dict): stream key → callable(tokens, temb) producing (..., count, p²C)
        temb (Tensor): timestep embedding passed to every head

    Returns:
        WaveletSpectrum: Tensor-backed spectrum with J = plan.levels

    Raises:
        DimensionError: If token counts do not match the plan
    """
    n_lf, n_hf = plan.count(Segment.LF), plan.count(Segment.HF)
    if lf_tokens.shape[-2] != n_lf or hf_tokens.shape[-2] != n_hf:
        raise DimensionError(
            f"expected {n_lf} LF and {n_hf} HF tokens, got {lf_tokens.shape[-2]} and {hf_tokens.shape[-2]}"
        )

    def decode(stream, tokens):
        values = heads[stream.key](tokens, temb)
        return unpatchify(values, stream.grid_h, stream.grid_w, stream.patch, plan.channels)

    hf_start = plan.count(Segment.LR) + n_lf
    bands = {}
    for stream in plan.streams:
        if stream.segment is Segment.HF:
            start = stream.offset - hf_start
            bands[(stream.level, stream.subband)] = decode(
                stream, hf_tokens[..., start:start + stream.count, :]
            )
    packed = decode(plan.stream("lf"), lf_tokens)
    for level in range(plan.levels, 0, -1):
        top = concat([packed, bands[(level, SubBand.V)]], axis=-2)
        bottom = concat([bands[(level, SubBand.H)], bands[(level, SubBand.D)]], axis=-2)
        packed = concat([top, bottom], axis=-3)
    return WaveletSpectrum(packed, plan.levels)
