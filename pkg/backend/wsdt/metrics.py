"""
Distortion and consistency metrics: PSNR, SSIM and Cons.

All metrics take images in [0, 1]; ``to_unit_range`` converts model output.
"""

from dataclasses import asdict, dataclass
import json
import math

import numpy as np
from scipy.signal import convolve2d

from .exceptions import ContractError, DimensionError
from .utils.degradation import downsample

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
CONS_SCALE = 1e5


def to_unit_range(image):
    """Map model range [−1, 1] to [0, 1]."""
    return (np.asarray(image, dtype=np.float64) + 1.0) / 2.0


def _pair(a, b, name):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"{name} needs images of one shape, got {a.shape} and {b.shape}")
    return a, b


def psnr(a, b, cap=PSNR_CAP):
    """
    Peak signal-to-noise ratio in dB for images in [0, 1].

    Identical images report ``cap`` instead of infinity.
    """
    a, b = _pair(a, b, "psnr")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap
    return min(cap, 10.0 * math.log10(1.0 / mse))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """Normalized size×size Gaussian, as MATLAB's fspecial('gaussian')."""
    m = (size - 1.0) / 2.0
    y, x = np.ogrid[-m:m + 1, -m:m + 1]
    h = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    h[h < np.finfo(h.dtype).eps * h.max()] = 0
    return h / h.sum()


def _filter(x, window):
    return convolve2d(x, np.rot90(window, 2), mode="valid")


def _ssim_plane(a, b, window):
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2
    mu_a = _filter(a, window)
    mu_b = _filter(b, window)
    mu_a_sq, mu_b_sq, mu_ab = mu_a * mu_a, mu_b * mu_b, mu_a * mu_b
    sigma_a_sq = _filter(a * a, window) - mu_a_sq
    sigma_b_sq = _filter(b * b, window) - mu_b_sq
    sigma_ab = _filter(a * b, window) - mu_ab
    numerator = (2 * mu_ab + c1) * (2 * sigma_ab + c2)
    denominator = (mu_a_sq + mu_b_sq + c1) * (sigma_a_sq + sigma_b_sq + c2)
    return float(np.mean(numerator / denominator))


def ssim(a, b):
    """
    Single-scale SSIM (11×11 Gaussian window, σ=1.5, K1=0.01, K2=0.03, L=1).

    Accepts (H, W) or (H, W, C); colour images report the mean over channels.

    Raises:
        ContractError: If the image is smaller than the window
    """
    a, b = _pair(a, b, "ssim")
    if a.ndim == 2:
        a, b = a[:, :, None], b[:, :, None]
    if a.ndim != 3:
        raise DimensionError(f"ssim expects (H, W) or (H, W, C), got shape {a.shape}")
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ContractError(f"ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[:2]}")
    window = gaussian_window()
    return float(np.mean([_ssim_plane(a[:, :, c], b[:, :, c], window) for c in range(a.shape[2])]))


def consistency(sr, lr, scale, degradation="box"):
    """
    Cons.: MSE between the downsampled SR output and the LR input, × 10⁵.

    Raises:
        DimensionError: If the SR dims are not ``scale`` × the LR dims
    """
    sr = np.asarray(sr, dtype=np.float64)
    lr = np.asarray(lr, dtype=np.float64)
    expected = (lr.shape[0] * scale, lr.shape[1] * scale) + tuple(lr.shape[2:])
    if sr.shape != expected:
        raise DimensionError(f"SR {sr.shape} is not {scale}x the LR {lr.shape}")
    reduced = downsample(sr if sr.ndim == 3 else sr[:, :, None], scale, degradation)
    if sr.ndim == 2:
        reduced = reduced[:, :, 0]
    return float(np.mean((reduced - lr) ** 2)) * CONS_SCALE


@dataclass(frozen=True)
class MetricReport:
    psnr: float
    ssim: float
    cons: float
    degradation: str = "box"

    def to_dict(self):
        return asdict(self)

    def to_lines(self, prefix=""):
        return [f"{prefix}{key}={value}" for key, value in self.to_dict().items()]

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def mean(cls, reports, degradation="box"):
        if not reports:
            raise ContractError("cannot average an empty list of reports")
        return cls(
            psnr=float(np.mean([report.psnr for report in reports])),
            ssim=float(np.mean([report.ssim for report in reports])),
            cons=float(np.mean([report.cons for report in reports])),
            degradation=degradation,
        )


def evaluate(sr, hr, lr, scale, degradation="box", psnr_cap=PSNR_CAP):
    """
    Score one SR image against its HR reference and LR input, all in [0, 1].
    """
    return MetricReport(
        psnr=psnr(sr, hr, cap=psnr_cap),
        ssim=ssim(sr, hr),
        cons=consistency(sr, lr, scale, degradation),
        degradation=degradation,
    )
