"""Report figures for benchmark runs, rendered next to the CSV output.

Two kinds of files per benchmarked image: a metrics chart (PSNR and MSSIM
against the number of looks, one line per model) and a restoration panel
(noisy input beside each model's result) per noise level.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .image import load_image  # noqa: E402
from .models import MODEL_NAMES  # noqa: E402

# Keep PNG output byte-stable across environments.
_SAVE_OPTS = dict(dpi=110, metadata={"Software": None})
_MODEL_STYLE = {"proposed": "o-", "tdm": "s--", "shan": "^:"}


def metrics_chart(rows, image_name: str, path: Path) -> None:
    """Line chart of PSNR and MSSIM vs look for one image."""
    fig, (ax_psnr, ax_mssim) = plt.subplots(1, 2, figsize=(9, 3.6))
    for model in MODEL_NAMES:
        pts = sorted((r.look, r.psnr, r.mssim) for r in rows
                     if r.model == model and r.status == "ok")
        if not pts:
            continue
        looks = [p[0] for p in pts]
        ax_psnr.plot(looks, [p[1] for p in pts], _MODEL_STYLE[model], label=model)
        ax_mssim.plot(looks, [p[2] for p in pts], _MODEL_STYLE[model], label=model)
    for ax, ylabel in ((ax_psnr, "PSNR (dB)"), (ax_mssim, "MSSIM")):
        ax.set_xlabel("looks")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.suptitle(image_name)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def restoration_panel(image_name: str, look: int, out_dir: Path,
                      path: Path) -> None:
    """Noisy input and the three restorations side by side."""
    tiles = []
    for suffix in ("noisy",) + MODEL_NAMES:
        for ext in ("pgm", "ppm"):
            candidate = out_dir / f"{image_name}_L{look}_{suffix}.{ext}"
            if candidate.exists():
                tiles.append((suffix, load_image(candidate)))
                break
    if not tiles:
        return
    fig, axes = plt.subplots(1, len(tiles), figsize=(3.2 * len(tiles), 3.6))
    if len(tiles) == 1:
        axes = [axes]
    for ax, (title, img) in zip(axes, tiles):
        if img.ndim == 2:
            ax.imshow(img, cmap="gray", vmin=0, vmax=255, interpolation="nearest")
        else:
            ax.imshow(img.astype("uint8"), interpolation="nearest")
        ax.set_title(f"{title} (L={look})" if title == "noisy" else title)
        ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def benchmark_figures(rows, plan, out_dir: Path, stem: str) -> None:
    """Render all figures for a finished benchmark run."""
    out_dir = Path(out_dir)
    images = []
    for row in rows:
        if row.image not in images:
            images.append(row.image)
    for name in images:
        image_rows = [r for r in rows if r.image == name]
        metrics_chart(image_rows, name, out_dir / f"{stem}_{name}_metrics.png")
        for look in sorted({r.look for r in image_rows}):
            restoration_panel(name, look, out_dir,
                              out_dir / f"{stem}_{name}_L{look}_panel.png")
