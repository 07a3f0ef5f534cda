"""Deterministic synthetic test scenes.

The repository ships no photographs, so benchmark and acceptance runs use
procedural images with natural-image statistics: piecewise-smooth regions,
sharp edges, thin structures, and film-grain style fine texture. Every
generator is a pure function of its arguments (seeded numpy RNG), so
fixtures are bit-reproducible.
"""

from __future__ import annotations

import numpy as np

from .stencils import gaussian_smooth


def _unit_noise(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    """Smoothed white noise rescaled to unit standard deviation."""
    field = gaussian_smooth(rng.normal(0.0, 1.0, shape), sigma)
    return field / field.std()


def harbor_scene(size: int = 292, seed: int = 5) -> np.ndarray:
    """Grayscale sailing-scene composite: graded sky with soft clouds above
    textured water, a dark hull with cabin, thin masts and rigging lines,
    plus two-scale grain over everything.

    Contrast and texture amplitudes are balanced so despeckling behaves
    like it does on classic photographic test material of this size.
    """
    rng = np.random.default_rng(seed)
    H = W = size
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    y, x = yy / H, xx / W

    img = 120.0 + 45.0 * y
    water = y > 0.45
    waves = 5.0 * np.sin(2 * np.pi * (y * 60 + 0.15 * np.sin(2 * np.pi * x * 4)))
    img += waves * water
    ripple = _unit_noise(rng, (H, W), 0.7)
    img += 6.0 * ripple * water

    hull = (y > 0.52) & (y < 0.68) & (x > 0.25) & (x < 0.75) \
        & (y < 0.52 + 0.55 * (x - 0.1))
    img[hull] = 55.0 + 30.0 * (x[hull] - 0.25)
    cabin = (y > 0.44) & (y < 0.53) & (x > 0.40) & (x < 0.60)
    img[cabin] = 90.0

    n_masts = 12
    for i in range(n_masts):
        col = int((0.30 + 0.4 * i / (n_masts - 1)) * W)
        img[int(0.12 * H):int(0.53 * H), col] = 65.0 + 12.0 * (i % 3)
    for i in range(n_masts // 2):
        t = np.linspace(0.0, 1.0, 600)
        rows = ((0.12 + 0.4 * t) * H).astype(int).clip(0, H - 1)
        cols = ((0.30 + (0.08 + 0.06 * i) * t) * W).astype(int).clip(0, W - 1)
        img[rows, cols] = 75.0

    clouds = gaussian_smooth(rng.normal(0.0, 1.0, (H, W)), 9.0)
    img += 8.0 * clouds / np.abs(clouds).max() * (~water)

    img += 11.0 * _unit_noise(rng, (H, W), 1.2)
    img += 14.0 * _unit_noise(rng, (H, W), 2.5)
    return np.clip(img, 2.0, 253.0)


def produce_scene(size: int = 512, seed: int = 11, n_items: int = 12) -> np.ndarray:
    """RGB still life: smooth-shaded overlapping produce on a graded table.

    Large smooth color regions with glossy highlights and mild grain; the
    easy-to-restore statistics of classic color test images.
    """
    rng = np.random.default_rng(seed)
    H = W = size
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    y, x = yy / H, xx / W
    img = np.stack([70 + 30 * y + 10 * x, 55 + 25 * y + 8 * x, 45 + 20 * y], axis=2)

    palette = np.array([
        [180, 40, 35], [200, 60, 30], [170, 150, 40], [60, 130, 45],
        [150, 35, 40], [210, 120, 40], [80, 140, 50], [190, 50, 45],
    ], dtype=np.float64)
    for _ in range(n_items):
        cx, cy = rng.uniform(0.12, 0.88), rng.uniform(0.18, 0.88)
        ax, ay = rng.uniform(0.10, 0.22), rng.uniform(0.12, 0.26)
        theta = rng.uniform(0.0, np.pi)
        color = palette[rng.integers(0, len(palette))] * rng.uniform(0.85, 1.15)
        dx, dy = x - cx, y - cy
        u = (np.cos(theta) * dx + np.sin(theta) * dy) / ax
        v = (-np.sin(theta) * dx + np.cos(theta) * dy) / ay
        rho2 = u * u + v * v
        inside = rho2 < 1.0
        shade = 0.55 + 0.45 * np.sqrt(np.clip(1.0 - rho2, 0.0, 1.0))
        spec = 60.0 * np.exp(-((u + 0.35) ** 2 + (v + 0.3) ** 2) / 0.045)
        for c in range(3):
            plane = img[:, :, c]
            plane[inside] = (color[c] * shade + spec)[inside]

    img *= 1.3
    for c in range(3):
        img[:, :, c] = gaussian_smooth(img[:, :, c], 1.2)
        img[:, :, c] += 4.0 * _unit_noise(rng, (H, W), 1.0)
    return np.clip(img, 2.0, 253.0)


def textured_scene(size: int = 256, seed: int = 3) -> np.ndarray:
    """Grayscale texture collage: oriented sinusoid weave, blob field, and
    bright patches over a gradient, in the spirit of texture test charts.
    """
    rng = np.random.default_rng(seed)
    H = W = size
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)
    y, x = yy / H, xx / W
    img = 130.0 + 30.0 * x - 20.0 * y
    img += 18.0 * np.sin(2 * np.pi * (x * 22 + y * 9))
    img += 12.0 * np.sin(2 * np.pi * (y * 31 - x * 5))
    img += 15.0 * _unit_noise(rng, (H, W), 2.0)
    patch = (y > 0.55) & (y < 0.85) & (x > 0.15) & (x < 0.45)
    img[patch] += 35.0
    disc = (x - 0.7) ** 2 + (y - 0.3) ** 2 < 0.04
    img[disc] = 200.0
    return np.clip(img, 2.0, 253.0)
