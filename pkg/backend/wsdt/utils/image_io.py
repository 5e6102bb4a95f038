"""
Image file I/O through Pillow.

PPM (P6) and PGM (P5) with maxval 255 are the interchange formats; PNG is
accepted when the ``WSDT_ENABLE_PNG`` capability flag is on.
"""

import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..exceptions import ConfigurationError

logger = logging.getLogger(__name__)

NETPBM_SUFFIXES = {".ppm": 3, ".pgm": 1}
PNG_SUFFIX = ".png"
SIDECAR_SUFFIX = ".spectrum.npz"


def png_enabled():
    """Whether the PNG capability flag is on (True outside a configured project)."""
    try:
        from django.conf import settings

        return bool(getattr(settings, "WSDT_ENABLE_PNG", True))
    except Exception:
        return True


def image_suffix(channels):
    """File suffix for an image with ``channels`` channels."""
    if channels == 3:
        return ".ppm"
    if channels == 1:
        return ".pgm"
    raise ConfigurationError(f"images must have 1 or 3 channels, got {channels}")


def read_image(path):
    """
    Read an 8-bit image into an (H, W, C) uint8 array.

    Args:
        path (str | Path): PPM, PGM or (when enabled) PNG file

    Returns:
        np.ndarray: (H, W, 3) for colour, (H, W, 1) for grayscale

    Raises:
        ConfigurationError: For missing files, unsupported formats or bit depths
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == PNG_SUFFIX and not png_enabled():
        raise ConfigurationError(f"unsupported image format: PNG support is disabled ({path})")
    if suffix not in NETPBM_SUFFIXES and suffix != PNG_SUFFIX:
        raise ConfigurationError(f"unsupported image format '{suffix}' for {path}")
    try:
        with Image.open(path) as image:
            image.load()
            mode = image.mode
            if mode not in ("RGB", "L"):
                if suffix == PNG_SUFFIX and mode in ("RGBA", "P", "LA"):
                    image = image.convert("RGB")
                    mode = "RGB"
                else:
                    raise ConfigurationError(f"unsupported image mode '{mode}' in {path}; need 8-bit RGB or gray")
            array = np.asarray(image, dtype=np.uint8)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"image not found: {path}") from exc
    except UnidentifiedImageError as exc:
        raise ConfigurationError(f"unsupported image format in {path}") from exc
    if array.ndim == 2:
        array = array[:, :, None]
    return array


def write_image(path, array):
    """
    Write an (H, W, C) uint8 array; the suffix picks PPM/PGM or PNG.

    Raises:
        ConfigurationError: On unsupported suffix or channel count
    """
    path = Path(path)
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise ConfigurationError(f"write_image expects uint8 pixels, got {array.dtype}")
    if array.ndim != 3 or array.shape[-1] not in (1, 3):
        raise ConfigurationError(f"write_image expects (H, W, 1|3), got shape {array.shape}")
    suffix = path.suffix.lower()
    if suffix == PNG_SUFFIX:
        if not png_enabled():
            raise ConfigurationError("PNG support is disabled")
        image_format = "PNG"
    elif suffix in NETPBM_SUFFIXES:
        if NETPBM_SUFFIXES[suffix] != array.shape[-1]:
            raise ConfigurationError(f"{suffix} cannot hold {array.shape[-1]}-channel images")
        image_format = "PPM"
    else:
        raise ConfigurationError(f"unsupported image format '{suffix}' for {path}")
    pixels = array[:, :, 0] if array.shape[-1] == 1 else array
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(pixels)).save(path, format=image_format)
    logger.debug(f"wrote {array.shape} image to {path}")


def to_model_range(pixels):
    """uint8 [0, 255] → float32 [−1, 1]."""
    return np.asarray(pixels, dtype=np.float32) / 127.5 - 1.0


def from_model_range(values):
    """float [−1, 1] → uint8 [0, 255], rounding to nearest."""
    values = np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0)
    return np.rint((values + 1.0) * 127.5).astype(np.uint8)


def to_unit_pixels(pixels):
    """uint8 [0, 255] → float64 [0, 1]."""
    return np.asarray(pixels, dtype=np.float64) / 255.0


def write_spectrum_sidecar(path, spectrum, source_suffix):
    """
    Store a packed spectrum as float32 next to its visualization.

    Args:
        path (str | Path): destination ``<stem>.spectrum.npz``
        spectrum (WaveletSpectrum): numpy-backed spectrum in model range
        source_suffix (str): suffix of the decomposed image, restored by idwt
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as handle:
        np.savez(
            handle,
            spectrum=np.asarray(spectrum.data, dtype=np.float32),
            levels=np.int64(spectrum.levels),
            suffix=np.str_(source_suffix),
        )


def read_spectrum_sidecar(path):
    """
    Load a sidecar written by ``write_spectrum_sidecar``.

    Returns:
        tuple: (float32 packed spectrum, levels, source suffix)
    """
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as archive:
            return archive["spectrum"], int(archive["levels"]), str(archive["suffix"])
    except FileNotFoundError as exc:
        raise ConfigurationError(f"spectrum sidecar not found: {path}") from exc
    except (KeyError, ValueError, OSError) as exc:
        raise ConfigurationError(f"{path} is not a spectrum sidecar: {exc}") from exc


def sidecar_stem(path):
    """Image stem a sidecar belongs to (``lena.spectrum.npz`` → ``lena``)."""
    name = Path(path).name
    if name.endswith(SIDECAR_SUFFIX):
        return name[: -len(SIDECAR_SUFFIX)]
    return Path(path).stem
