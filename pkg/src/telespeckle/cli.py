"""Command-line front end.

Subcommands: add-noise, denoise, evaluate, benchmark. Exit codes: 0 on
success, 1 for usage or config errors, 2 for numerical divergence, 3 for
I/O and image-format errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .bench import run_benchmark
from .config import (BenchmarkPlan, ConfigError, PROFILES, build_run_config,
                     read_mapping, parse_config)
from .image import ImageFormatError, is_rgb, load_image, save_image
from .metrics import mssim, psnr, rgb_mssim, speckle_index
from .models import (DivergenceError, MODEL_NAMES, StoppingRule, denoise,
                     denoise_rgb)
from .noise import NoiseSpec, apply_speckle
from .synth import harbor_scene, produce_scene, textured_scene

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):
        raise ConfigError(message)


def _fmt(value, fmt: str) -> str:
    if value == float("inf"):
        return "inf"
    return fmt % value


_SCENES = {"harbor": harbor_scene, "produce": produce_scene,
           "textured": textured_scene}


def cmd_make_scene(args) -> int:
    kwargs = {}
    if args.size is not None:
        kwargs["size"] = args.size
    if args.seed is not None:
        kwargs["seed"] = args.seed
    save_image(_SCENES[args.kind](**kwargs), args.output)
    return EXIT_OK


def cmd_add_noise(args) -> int:
    if args.looks < 1:
        raise ConfigError("--looks must be >= 1")
    img = load_image(args.input)
    noisy = apply_speckle(img, NoiseSpec(args.looks, args.seed))
    save_image(noisy, args.output)
    print("si=%.4f" % speckle_index(noisy))
    return EXIT_OK


def _merged_run_config(args):
    mapping = read_mapping(args.config) if args.config else {}
    overrides = {
        "model": args.model, "input": args.input, "output": args.output,
        "reference": args.reference, "report": args.report,
        "profile": args.profile, "gamma": args.gamma, "alpha": args.alpha,
        "k": args.k, "nu": args.nu, "lambda": getattr(args, "lambda_"),
        "tau": args.tau, "xi": args.xi, "looks": args.looks,
        "seed": args.seed, "stop": args.stop, "epsilon": args.epsilon,
        "cap": args.cap, "patience": args.patience,
        "fidelity_form": args.fidelity_form,
    }
    for key, value in overrides.items():
        if value is not None:
            mapping[key] = str(value)
    return build_run_config(mapping)


def cmd_denoise(args) -> int:
    cfg = _merged_run_config(args)
    if cfg.input is None or cfg.output is None:
        raise ConfigError("denoise needs an input and an output image path")
    noisy = load_image(cfg.input)
    if cfg.noise is not None:
        noisy = apply_speckle(noisy, cfg.noise)

    reference = None
    if cfg.reference is not None:
        reference = load_image(cfg.reference)
        if reference.shape != noisy.shape:
            raise ConfigError("reference and input dimensions differ")

    if cfg.stop_kind == "psnr_peak":
        stop = StoppingRule.psnr_peak(reference, patience=cfg.patience, cap=cfg.cap)
    elif cfg.stop_kind == "relative_error":
        stop = StoppingRule(kind="relative_error", epsilon=cfg.epsilon,
                            cap=cfg.cap, reference=reference)
    else:
        stop = StoppingRule(kind="max_iters", n_iters=cfg.cap, cap=cfg.cap,
                            reference=reference)

    t0 = time.perf_counter()
    if is_rgb(noisy):
        restored, reports = denoise_rgb(cfg.model, noisy, cfg.params, stop)
        lines = {
            "model": cfg.model,
            "iterations": max(rep.iterations for rep in reports),
            "si": "%.4f" % speckle_index(restored),
        }
        if reference is not None:
            lines["psnr"] = _fmt(psnr(restored, reference), "%.2f")
            if min(restored.shape[:2]) >= 11:
                lines["mssim"] = "%.4f" % rgb_mssim(restored, reference)
    else:
        restored, report = denoise(cfg.model, noisy, cfg.params, stop)
        lines = {
            "model": cfg.model,
            "iterations": report.iterations,
            "relative_error": "%.3e" % report.relative_error,
            "si": "%.4f" % report.speckle_index,
        }
        if reference is not None:
            lines["psnr"] = _fmt(report.psnr, "%.2f")
            if report.mssim is not None:
                lines["mssim"] = "%.4f" % report.mssim
    lines["wall_time_s"] = "%.3f" % (time.perf_counter() - t0)

    save_image(restored, cfg.output)
    text = "\n".join(f"{key}={value}" for key, value in lines.items())
    print(text)
    if cfg.report is not None:
        Path(cfg.report).write_text(text + "\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    restored = load_image(args.restored)
    reference = load_image(args.reference)
    if restored.shape != reference.shape:
        raise ConfigError(
            f"dimension mismatch: {restored.shape} vs {reference.shape}")
    similarity = rgb_mssim(restored, reference) if is_rgb(restored) \
        else mssim(restored, reference)
    print("%s,%.4f,%.4f" % (_fmt(psnr(restored, reference), "%.2f"),
                            similarity, speckle_index(restored)))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    plan = parse_config(args.plan)
    if not isinstance(plan, BenchmarkPlan):
        raise ConfigError(f"{args.plan} is a run config, not a benchmark plan "
                          "(no caseN.* keys)")
    rows = run_benchmark(plan, out_dir=args.out_dir, jobs=args.jobs,
                         figures=not args.no_figures, timed=args.timed)
    for row in rows:
        print(row.to_csv())
    failures = [row.error for row in rows if row.error is not None]
    if not failures:
        return EXIT_OK
    if any(isinstance(exc, DivergenceError) for exc in failures):
        return EXIT_DIVERGED
    if any(isinstance(exc, (ImageFormatError, OSError)) for exc in failures):
        return EXIT_IO
    return EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="telespeckle",
                     description="PDE despeckling toolkit for multiplicative "
                                 "gamma noise")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-scene", help="write a deterministic synthetic "
                                          "test scene")
    p.add_argument("kind", choices=sorted(_SCENES))
    p.add_argument("output")
    p.add_argument("--size", type=int, help="square size (default per scene)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_make_scene)

    p = sub.add_parser("add-noise", help="corrupt an image with gamma speckle")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--looks", type=int, required=True,
                   help="number of looks L (variance 1/L)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_add_noise)

    p = sub.add_parser("denoise", help="restore a speckled image")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--model", choices=MODEL_NAMES)
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--reference", help="clean image (enables PSNR/MSSIM)")
    p.add_argument("--report", help="write the report lines to this file")
    p.add_argument("--profile", choices=sorted(PROFILES))
    for name in ("gamma", "alpha", "k", "nu", "tau", "xi", "epsilon"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--lambda", dest="lambda_", type=float,
                   help="fidelity weight")
    p.add_argument("--looks", type=int, help="add speckle before denoising")
    p.add_argument("--seed", type=int)
    p.add_argument("--stop", choices=("relative_error", "psnr_peak", "max_iters"))
    p.add_argument("--cap", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--fidelity-form", dest="fidelity_form",
                   choices=("signed", "squared"))
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("evaluate", help="print psnr,mssim,si for a restored "
                                        "image against a reference")
    p.add_argument("restored")
    p.add_argument("reference")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="run a benchmark plan")
    p.add_argument("plan")
    p.add_argument("--out-dir", help="artifact directory (default: CSV's)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-figures", action="store_true",
                   help="skip matplotlib chart/panel rendering")
    p.add_argument("--timed", action="store_true",
                   help="record wall-clock seconds (breaks byte-level "
                        "reproducibility of the CSV)")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ImageFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
