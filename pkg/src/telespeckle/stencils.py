"""Finite-difference kernels and Gaussian pre-smoothing.

All stencils use second-order central differences on a uniform grid with
mirror-reflected boundaries. Sums are accumulated as symmetric pairs
(left+right, up+down) so that flipping the input flips the output bitwise;
the solver's equivariance contract depends on this.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .image import as_grid


class VectorField(NamedTuple):
    """Per-pixel 2-vector, e.g. a gradient: dx along columns, dy along rows."""

    dx: np.ndarray
    dy: np.ndarray


def reflect_pad(img: np.ndarray, margin: int) -> np.ndarray:
    """Mirror padding that folds repeatedly when margin exceeds the size."""
    if margin == 0:
        return img
    return np.pad(img, margin, mode="reflect")


def gradient_central(img: np.ndarray, h: float = 1.0) -> VectorField:
    """Central-difference gradient with spacing h.

    dx[i, j] = (I[i, j+1] - I[i, j-1]) / 2h, and likewise dy along rows.
    """
    arr = as_grid(img)
    if min(arr.shape) < 2:
        raise ValueError("gradient needs at least a 2x2 grid")
    p = reflect_pad(arr, 1)
    scale = 1.0 / (2.0 * h)
    dx = (p[1:-1, 2:] - p[1:-1, :-2]) * scale
    dy = (p[2:, 1:-1] - p[:-2, 1:-1]) * scale
    return VectorField(dx, dy)


def gradient_magnitude(field: VectorField) -> np.ndarray:
    """Euclidean length sqrt(dx^2 + dy^2) per pixel."""
    if field.dx.shape != field.dy.shape:
        raise ValueError("vector field components differ in shape")
    return np.hypot(field.dx, field.dy)


def axial_second_differences(img: np.ndarray, h: float = 1.0) -> VectorField:
    """Second differences along each axis: dx = (left + right - 2c) / h^2."""
    arr = as_grid(img)
    if min(arr.shape) < 2:
        raise ValueError("second differences need at least a 2x2 grid")
    p = reflect_pad(arr, 1)
    inv_h2 = 1.0 / (h * h)
    dxx = ((p[1:-1, 2:] + p[1:-1, :-2]) - 2.0 * arr) * inv_h2
    dyy = ((p[2:, 1:-1] + p[:-2, 1:-1]) - 2.0 * arr) * inv_h2
    return VectorField(dxx, dyy)


def laplacian(img: np.ndarray, h: float = 1.0) -> np.ndarray:
    """Five-point Laplacian: sum of the axial second differences."""
    d = axial_second_differences(img, h)
    return d.dx + d.dy


def laplacian_magnitude(img: np.ndarray, h: float = 1.0) -> np.ndarray:
    """sqrt(dxx^2 + dyy^2) of the axial second differences."""
    d = axial_second_differences(img, h)
    return np.hypot(d.dx, d.dy)


def max_abs(img: np.ndarray) -> float:
    """Largest absolute value over all pixels."""
    return float(np.max(np.abs(img)))


def gaussian_weights(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps, truncated at radius ceil(4*sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    radius = math.ceil(4.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Full 2-D kernel (outer product of the 1-D taps); sums to 1."""
    w = gaussian_weights(sigma)
    return np.outer(w, w)


def separable_filter(img: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Convolve with outer(weights, weights) under mirror padding.

    weights must be symmetric with odd length. Each 1-D pass accumulates
    center + sum_k w_k*(left_k + right_k) in fixed k order, which keeps the
    result bitwise flip-equivariant and equal to the direct 2-D convolution
    up to rounding.
    """
    arr = as_grid(img)
    weights = np.asarray(weights, dtype=np.float64)
    radius = (weights.size - 1) // 2
    if weights.size != 2 * radius + 1:
        raise ValueError("weights must have odd length")
    p = reflect_pad(arr, radius)

    def one_pass(a: np.ndarray, axis: int) -> np.ndarray:
        n = a.shape[axis] - 2 * radius
        sl = [slice(None), slice(None)]
        sl[axis] = slice(radius, radius + n)
        out = weights[radius] * a[tuple(sl)]
        for k in range(1, radius + 1):
            lo = [slice(None), slice(None)]
            hi = [slice(None), slice(None)]
            lo[axis] = slice(radius - k, radius - k + n)
            hi[axis] = slice(radius + k, radius + k + n)
            out += weights[radius + k] * (a[tuple(lo)] + a[tuple(hi)])
        return out

    return one_pass(one_pass(p, 1), 0)


def gaussian_smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur with a normalized, truncated kernel (radius ceil(4s)).

    Normalization means constants are exact fixed points, which the
    solvers' fixed-point contract relies on.
    """
    return separable_filter(img, gaussian_weights(sigma))
