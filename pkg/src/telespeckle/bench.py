"""Benchmark harness: run every (case, model) cell of a plan, write one CSV
row per cell plus the noisy/restored images, and optionally render figures.

Rows land in plan order regardless of execution order, and all artifacts
are byte-reproducible for a given plan and seeds; wall-clock timing is
opt-in because it would break that reproducibility.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .image import is_rgb, load_image, save_image
from .metrics import mssim, psnr, rgb_mssim, speckle_index
from .models import MODEL_NAMES, StoppingRule, denoise, denoise_rgb
from .config import BenchCase, BenchmarkPlan
from .noise import NoiseSpec, apply_speckle

CSV_HEADER = "image,look,model,psnr,mssim,si,iterations,seconds,status"


@dataclass
class BenchRow:
    image: str
    look: int
    model: str
    psnr: float | None = None
    mssim: float | None = None
    si: float | None = None
    iterations: int | None = None
    seconds: float = 0.0
    status: str = "ok"
    error: Exception | None = None

    def to_csv(self) -> str:
        def num(value, fmt):
            if value is None:
                return ""
            if value == float("inf"):
                return "inf"
            return fmt % value

        cells = [
            self.image, str(self.look), self.model,
            num(self.psnr, "%.2f"), num(self.mssim, "%.4f"), num(self.si, "%.4f"),
            "" if self.iterations is None else str(self.iterations),
            "%.3f" % self.seconds,
            self.status.replace(",", ";").replace("\n", " "),
        ]
        return ",".join(cells)


def _artifact_name(case: BenchCase, suffix: str, rgb: bool) -> str:
    ext = "ppm" if rgb else "pgm"
    return f"{case.image.stem}_L{case.looks}_{suffix}.{ext}"


def _stopping_rule(plan: BenchmarkPlan, reference: np.ndarray) -> StoppingRule:
    if plan.stop_kind == "psnr_peak":
        return StoppingRule.psnr_peak(reference, patience=plan.patience, cap=plan.cap)
    if plan.stop_kind == "relative_error":
        return StoppingRule.relative_error(plan.epsilon, cap=plan.cap)
    return StoppingRule.max_iters(plan.cap, cap=plan.cap)


def run_cell(case: BenchCase, model: str, clean: np.ndarray, noisy: np.ndarray,
             plan: BenchmarkPlan, out_dir: Path, timed: bool) -> BenchRow:
    """Denoise one (case, model) cell and save the restored image."""
    row = BenchRow(image=case.image.stem, look=case.looks, model=model)
    t0 = time.perf_counter()
    try:
        rgb = is_rgb(noisy)
        if rgb:
            rule = _stopping_rule(plan, clean)
            restored, reports = denoise_rgb(model, noisy, case.params[model], rule)
            row.psnr = psnr(restored, clean)
            row.mssim = rgb_mssim(restored, clean)
            row.iterations = max(rep.iterations for rep in reports)
        else:
            rule = _stopping_rule(plan, clean)
            restored, report = denoise(model, noisy, case.params[model], rule)
            row.psnr = psnr(restored, clean)
            row.mssim = mssim(restored, clean)
            row.iterations = report.iterations
        row.si = speckle_index(restored)
        save_image(restored, out_dir / _artifact_name(case, model, rgb))
    except Exception as exc:  # failures become status rows, the run continues
        row.status = f"error: {exc}"
        row.error = exc
    if timed:
        row.seconds = time.perf_counter() - t0
    return row


def run_benchmark(plan: BenchmarkPlan, out_dir=None, jobs: int = 1,
                  figures: bool = True, timed: bool = False) -> list[BenchRow]:
    """Execute a plan and write CSV, images, and (optionally) figures.

    Cells may run in parallel (jobs > 1); rows are still written in plan
    order. With timed=False the seconds column is 0.000 so that two runs
    of the same plan produce byte-identical artifacts.
    """
    out_dir = Path(out_dir) if out_dir is not None else plan.output.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    # One slot per (case, model) in plan order; cases whose image cannot
    # even be loaded become error rows for all three models.
    slots: list[BenchRow | None] = []
    cells = []
    for case in plan.cases:
        try:
            clean = load_image(case.image)
            noisy = apply_speckle(clean, NoiseSpec(case.looks, case.seed))
            save_image(noisy, out_dir / _artifact_name(case, "noisy", is_rgb(noisy)))
        except Exception as exc:
            for model in MODEL_NAMES:
                slots.append(BenchRow(image=case.image.stem, look=case.looks,
                                      model=model, status=f"error: {exc}",
                                      error=exc))
            continue
        for model in MODEL_NAMES:
            cells.append((len(slots), case, model, clean, noisy))
            slots.append(None)

    def execute(cell):
        index, case, model, clean, noisy = cell
        return index, run_cell(case, model, clean, noisy, plan, out_dir, timed)

    if jobs > 1 and cells:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(execute, cells))
    else:
        results = [execute(cell) for cell in cells]
    for index, row in results:
        slots[index] = row
    rows = slots

    csv_path = plan.output if plan.output.is_absolute() else out_dir / plan.output.name
    lines = [CSV_HEADER] + [row.to_csv() for row in rows]
    csv_path.write_text("\n".join(lines) + "\n")

    if figures:
        from . import figures as figmod

        figmod.benchmark_figures(rows, plan, out_dir, csv_path.stem)
    return rows
