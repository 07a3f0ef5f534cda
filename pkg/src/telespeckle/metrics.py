"""Image-quality and convergence metrics: MSE, PSNR, SSIM/MSSIM, speckle
index, and the relative error norm used as a stopping criterion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .image import INTENSITY_MAX
from .stencils import separable_filter


@dataclass(frozen=True)
class SsimConfig:
    """Window and stabilizer constants for local SSIM.

    Defaults are the common protocol: an 11x11 Gaussian window with
    sigma 1.5 and stabilizers (0.01*range)^2 and (0.03*range)^2.
    """

    window_radius: int = 5
    window_sigma: float = 1.5
    dynamic_range: float = INTENSITY_MAX
    d1: float | None = None
    d2: float | None = None

    def __post_init__(self):
        if self.d1 is None:
            object.__setattr__(self, "d1", (0.01 * self.dynamic_range) ** 2)
        if self.d2 is None:
            object.__setattr__(self, "d2", (0.03 * self.dynamic_range) ** 2)
        if self.d1 <= 0 or self.d2 <= 0:
            raise ValueError("SSIM stabilizers must be positive")
        if self.window_radius < 1 or self.window_sigma <= 0:
            raise ValueError("bad SSIM window")


@dataclass
class MetricsReport:
    """Quality numbers for one restoration run.

    psnr and mssim are None when no clean reference was available (the SAR
    case); psnr is math.inf for a perfect match.
    """

    speckle_index: float
    iterations: int
    wall_time: float
    psnr: float | None = None
    mssim: float | None = None
    relative_error: float | None = None


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared pixel difference."""
    a, b = _check_same_shape(a, b)
    diff = a - b
    return float(np.mean(diff * diff))


def psnr(a: np.ndarray, b: np.ndarray, max_val: float = INTENSITY_MAX) -> float:
    """10*log10(max_val^2 / MSE) in dB; inf when the images are equal."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / err)


def _window_weights(cfg: SsimConfig) -> np.ndarray:
    x = np.arange(-cfg.window_radius, cfg.window_radius + 1, dtype=np.float64)
    w = np.exp(-(x * x) / (2.0 * cfg.window_sigma ** 2))
    return w / w.sum()


def ssim_map(a: np.ndarray, b: np.ndarray, cfg: SsimConfig | None = None) -> np.ndarray:
    """Per-pixel structural similarity from Gaussian-weighted local moments.

    Local means, variances, and covariance are taken over a mirror-padded
    window, so the map has the same shape as the inputs.
    """
    cfg = cfg or SsimConfig()
    a, b = _check_same_shape(a, b)
    if a.ndim != 2:
        raise ValueError("ssim_map expects 2-D grids")
    if min(a.shape) < 2 * cfg.window_radius + 1:
        raise ValueError("image smaller than the SSIM window")
    w = _window_weights(cfg)
    mu_a = separable_filter(a, w)
    mu_b = separable_filter(b, w)
    var_a = separable_filter(a * a, w) - mu_a * mu_a
    var_b = separable_filter(b * b, w) - mu_b * mu_b
    cov = separable_filter(a * b, w) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + cfg.d1) * (2.0 * cov + cfg.d2)
    den = (mu_a * mu_a + mu_b * mu_b + cfg.d1) * (var_a + var_b + cfg.d2)
    return num / den


def mssim(a: np.ndarray, b: np.ndarray, cfg: SsimConfig | None = None) -> float:
    """Mean of the SSIM map over all window positions."""
    return float(np.mean(ssim_map(a, b, cfg)))


def rgb_psnr(a: np.ndarray, b: np.ndarray, max_val: float = INTENSITY_MAX) -> float:
    """PSNR with the MSE pooled over all channels."""
    return psnr(a, b, max_val)


def rgb_mssim(a: np.ndarray, b: np.ndarray, cfg: SsimConfig | None = None) -> float:
    """Mean of the per-channel MSSIM values."""
    a, b = _check_same_shape(a, b)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError("rgb_mssim expects (H, W, 3) images")
    return float(np.mean([mssim(a[:, :, c], b[:, :, c], cfg) for c in range(3)]))


def speckle_index(img: np.ndarray) -> float:
    """Population standard deviation over mean of the pixel intensities.

    Lower means smoother; a pure unit-mean speckle field with L looks has
    speckle index 1/sqrt(L).
    """
    arr = np.asarray(img, dtype=np.float64)
    mean = float(np.mean(arr))
    if mean == 0.0:
        raise ValueError("speckle index undefined for zero-mean image")
    if np.ptp(arr) == 0.0:
        return 0.0  # rounding in the mean would otherwise leave ~1e-16
    return float(np.std(arr) / mean)


def relative_error(new: np.ndarray, current: np.ndarray) -> float:
    """||new - current||_2 / ||current||_2."""
    new, current = _check_same_shape(new, current)
    denom = float(np.linalg.norm(current))
    if denom == 0.0:
        raise ValueError("relative error undefined for zero current iterate")
    return float(np.linalg.norm(new - current) / denom)
