"""
Deterministic synthetic HR/LR pairs for desk-scale experiments.
"""

from dataclasses import asdict, dataclass, field
import logging

import numpy as np
from scipy.ndimage import gaussian_filter

from ..exceptions import ConfigurationError
from ..utils.degradation import DEGRADATIONS, downsample

logger = logging.getLogger(__name__)

GENERATORS = ("gradient", "shapes", "texture", "noise")
SUPERSAMPLE = 4


@dataclass(frozen=True)
class SynthSpec:
    """
    Recipe for a synthetic dataset.

    Every image draws from its own generator seeded by (seed, index), so a
    dataset is reproducible and any prefix of it is stable.
    """

    seed: int
    count: int
    image_size: int
    scale: int
    channels: int = 3
    generators: tuple = field(default=GENERATORS)
    degradation: str = "box"

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if self.count < 1:
            raise ConfigurationError(f"count must be >= 1, got {self.count}")
        if self.scale < 2 or self.image_size < self.scale or self.image_size % self.scale:
            raise ConfigurationError(
                f"image_size {self.image_size} is not a multiple of scale {self.scale}"
            )
        if self.channels not in (1, 3):
            raise ConfigurationError(f"channels must be 1 or 3, got {self.channels}")
        unknown = [name for name in self.generators if name not in GENERATORS]
        if unknown or not self.generators:
            raise ConfigurationError(f"unknown generators {unknown}, expected some of {GENERATORS}")
        if self.degradation not in DEGRADATIONS:
            raise ConfigurationError(f"unknown degradation '{self.degradation}'")

    def to_dict(self):
        data = asdict(self)
        data["generators"] = list(self.generators)
        return data


def _grid(size):
    coords = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    return np.meshgrid(coords, coords, indexing="ij")


def _colors(rng, count, channels):
    return rng.uniform(-1.0, 1.0, size=(count, channels))


def linear_gradient(rng, size, channels):
    """Ramp along a random direction between two random colours."""
    y, x = _grid(size)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    ramp = (np.cos(angle) * x + np.sin(angle) * y) / np.sqrt(2.0)
    ramp = (ramp + 1.0) / 2.0
    start, end = _colors(rng, 2, channels)
    return start + ramp[..., None] * (end - start)


def shapes(rng, size, channels):
    """Anti-aliased ellipses and rectangles on a flat background (4× supersampled)."""
    fine = size * SUPERSAMPLE
    y, x = _grid(fine)
    image = np.broadcast_to(_colors(rng, 1, channels)[0], (fine, fine, channels)).copy()
    for _ in range(int(rng.integers(1, 4))):
        cy, cx = rng.uniform(-0.7, 0.7, size=2)
        ry, rx = rng.uniform(0.1, 0.5, size=2)
        if rng.random() < 0.5:
            inside = ((y - cy) / ry) ** 2 + ((x - cx) / rx) ** 2 <= 1.0
        else:
            inside = (np.abs(y - cy) <= ry) & (np.abs(x - cx) <= rx)
        image[inside] = _colors(rng, 1, channels)[0]
    return downsample(image[None], SUPERSAMPLE, "box")[0]


def texture(rng, size, channels):
    """Sum of two oriented sinusoids below half the Nyquist frequency."""
    y, x = _grid(size)
    image = np.zeros((size, size, channels))
    for _ in range(2):
        frequency = rng.uniform(1.0, size / 8.0)
        angle = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wave = np.sin(np.pi * frequency * (np.cos(angle) * x + np.sin(angle) * y) + phase)
        image += 0.5 * wave[..., None] * rng.uniform(0.2, 1.0, size=channels)
    return image


def band_limited_noise(rng, size, channels):
    """White noise smoothed by a Gaussian, rescaled to fill [−1, 1]."""
    sigma = rng.uniform(1.0, 3.0)
    image = gaussian_filter(rng.standard_normal((size, size, channels)), sigma=(sigma, sigma, 0), mode="wrap")
    peak = np.abs(image).max()
    return image / peak if peak > 0 else image


_BUILDERS = {
    "gradient": linear_gradient,
    "shapes": shapes,
    "texture": texture,
    "noise": band_limited_noise,
}


def generate_synth(spec):
    """
    Build the dataset described by ``spec``.

    Returns:
        list: (HR, LR) float32 pairs; HR is (S, S, C) in [−1, 1] and LR its
        degradation by ``spec.scale``
    """
    pairs = []
    for index in range(spec.count):
        rng = np.random.default_rng([spec.seed, index])
        name = spec.generators[int(rng.integers(len(spec.generators)))]
        hr = np.clip(_BUILDERS[name](rng, spec.image_size, spec.channels), -1.0, 1.0).astype(np.float32)
        lr = downsample(hr, spec.scale, spec.degradation)
        pairs.append((hr, np.clip(lr, -1.0, 1.0).astype(np.float32)))
    logger.info(f"Generated {len(pairs)} synthetic pairs at {spec.image_size}px, scale {spec.scale}")
    return pairs
