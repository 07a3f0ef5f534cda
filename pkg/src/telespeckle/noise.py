"""Multiplicative gamma speckle synthesis.

A speckle field is an i.i.d. draw from Gamma(shape=L, scale=1/L), which has
mean 1 and variance 1/L; L is the number of looks. Noisy images are the
pixelwise product of a clean image with such a field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import INTENSITY_FLOOR, INTENSITY_MAX, as_grid, is_rgb


@dataclass(frozen=True)
class NoiseSpec:
    """Number of looks plus the seed that makes a field reproducible."""

    looks: int
    seed: int = 0

    def __post_init__(self):
        if self.looks < 1:
            raise ValueError(f"looks must be >= 1, got {self.looks}")


def _generator(seed: int) -> np.random.Generator:
    # Philox is counter-based: the stream is a pure function of the seed,
    # independent of platform threading.
    return np.random.Generator(np.random.Philox(seed))


def speckle_field(spec: NoiseSpec, width: int, height: int) -> np.ndarray:
    """Draw an (height, width) field of unit-mean gamma speckle.

    Sampling uses the Marsaglia-Tsang method (numpy's gamma generator)
    driven by a Philox counter stream, so identical (spec, dims) give a
    bit-identical field. All values are strictly positive.
    """
    if width < 1 or height < 1:
        raise ValueError("field dimensions must be >= 1")
    L = spec.looks
    field = _generator(spec.seed).gamma(shape=L, scale=1.0 / L, size=(height, width))
    return np.maximum(field, np.finfo(np.float64).tiny)


def apply_multiplicative(clean: np.ndarray, field: np.ndarray,
                         floor: float = INTENSITY_FLOOR) -> np.ndarray:
    """Pixelwise product clean * field, clamped to [floor, 255].

    The floor keeps later fidelity terms (which divide by the image) away
    from zero pixels.
    """
    clean = as_grid(clean)
    field = as_grid(field)
    if clean.shape != field.shape:
        raise ValueError(f"shape mismatch: {clean.shape} vs {field.shape}")
    return np.clip(clean * field, floor, INTENSITY_MAX)


def apply_speckle(img: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """Corrupt a gray or RGB image with speckle from `spec`.

    RGB channels get independent fields drawn from child seeds of
    spec.seed, so the result is still a pure function of (img, spec).
    """
    if is_rgb(img):
        child_seeds = np.random.SeedSequence(spec.seed).generate_state(3)
        channels = [
            apply_multiplicative(
                img[:, :, c],
                speckle_field(NoiseSpec(spec.looks, int(child_seeds[c])),
                              img.shape[1], img.shape[0]),
            )
            for c in range(3)
        ]
        return np.stack(channels, axis=2)
    arr = as_grid(img)
    field = speckle_field(spec, arr.shape[1], arr.shape[0])
    return apply_multiplicative(arr, field)
