"""Flat key=value run configuration and benchmark plan files.

A run config drives one denoise invocation:

    model = proposed
    input = noisy.pgm
    output = restored.pgm
    reference = clean.pgm
    gamma = 4
    alpha = 1
    k = 2
    lambda = 0.03
    stop = psnr_peak

A benchmark plan lists cases with dotted keys; every case runs all three
models, with per-model parameter overrides:

    output = results.csv
    case1.image = scenes/harbor.pgm
    case1.looks = 1
    case1.seed = 101
    case1.proposed.gamma = 4
    case1.proposed.alpha = 1
    case1.tdm.alpha = 2

Unknown keys are rejected. Lines starting with '#' are comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .models import MODEL_NAMES, ModelParams
from .noise import NoiseSpec


class ConfigError(ValueError):
    """Bad key, value, or combination in a config or plan file."""


# Named parameter profiles (per model).
PROFILES: dict[str, dict[str, dict[str, float]]] = {
    "bsd68": {
        "proposed": {"gamma": 5.0, "alpha": 2.0, "k": 2.0, "lam": 0.08},
        "tdm": {"gamma": 5.0, "alpha": 1.0, "k": 2.0},
        "shan": {"alpha": 0.1, "nu": 1.0},
    },
}

# 'lambda' is the file-format spelling; ModelParams calls it lam.
_PARAM_KEYS = {"gamma": "gamma", "alpha": "alpha", "k": "k", "nu": "nu",
               "lambda": "lam", "tau": "tau", "xi": "xi",
               "fidelity_form": "fidelity_form"}
_RUN_KEYS = set(_PARAM_KEYS) | {
    "model", "profile", "input", "output", "reference", "report",
    "looks", "seed", "stop", "epsilon", "cap", "patience",
}
_PLAN_KEYS = {"output", "stop", "epsilon", "cap", "patience", "seed"}
_CASE_KEYS = {"image", "looks", "seed"}
_STOP_KINDS = ("relative_error", "psnr_peak", "max_iters")


@dataclass
class RunConfig:
    """One denoise invocation: model, parameters, optional noise synthesis,
    stopping rule settings, and file paths."""

    model: str
    params: ModelParams
    noise: NoiseSpec | None = None
    stop_kind: str = "relative_error"
    epsilon: float = 1e-4
    cap: int = 500
    patience: int = 5
    input: Path | None = None
    output: Path | None = None
    reference: Path | None = None
    report: Path | None = None


@dataclass
class BenchCase:
    image: Path
    looks: int
    seed: int
    params: dict[str, ModelParams]


@dataclass
class BenchmarkPlan:
    """Benchmark grid: each case is (image, looks, seed) and carries a
    parameter set for every model."""

    cases: list[BenchCase]
    output: Path
    stop_kind: str = "psnr_peak"
    epsilon: float = 1e-4
    cap: int = 500
    patience: int = 5


def read_mapping(path) -> dict[str, str]:
    """Parse key = value lines into an ordered mapping."""
    mapping: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = stripped.split("=", 1)
        key, value = key.strip().lower(), value.strip()
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        if key in mapping:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


def _to_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a number, got {value!r}")


def _to_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected an integer, got {value!r}")


def _build_params(entries: dict[str, str], model: str,
                  profile: str | None = None) -> ModelParams:
    kwargs: dict = {}
    if profile is not None:
        try:
            kwargs.update(PROFILES[profile][model])
        except KeyError:
            raise ConfigError(f"unknown profile {profile!r} for model {model!r}")
    for key, value in entries.items():
        attr = _PARAM_KEYS[key]
        kwargs[attr] = value if attr == "fidelity_form" else _to_float(key, value)
    try:
        return ModelParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_run_config(mapping: dict[str, str]) -> RunConfig:
    """Validate a flat mapping and assemble a RunConfig."""
    unknown = set(mapping) - _RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown key {sorted(unknown)[0]!r}")
    if "model" not in mapping:
        raise ConfigError("missing required key 'model'")
    model = mapping["model"]
    if model not in MODEL_NAMES:
        raise ConfigError(f"unknown model {model!r}; expected one of {MODEL_NAMES}")

    params = _build_params({k: v for k, v in mapping.items() if k in _PARAM_KEYS},
                           model, mapping.get("profile"))

    noise = None
    if "looks" in mapping:
        looks = _to_int("looks", mapping["looks"])
        if looks < 1:
            raise ConfigError("looks must be >= 1")
        noise = NoiseSpec(looks, _to_int("seed", mapping.get("seed", "0")))
    elif "seed" in mapping:
        raise ConfigError("key 'seed' is only meaningful together with 'looks'")

    stop_kind = mapping.get("stop", "relative_error")
    if stop_kind not in _STOP_KINDS:
        raise ConfigError(f"unknown stop rule {stop_kind!r}; expected {_STOP_KINDS}")
    cfg = RunConfig(
        model=model,
        params=params,
        noise=noise,
        stop_kind=stop_kind,
        epsilon=_to_float("epsilon", mapping.get("epsilon", "1e-4")),
        cap=_to_int("cap", mapping.get("cap", "500")),
        patience=_to_int("patience", mapping.get("patience", "5")),
        input=Path(mapping["input"]) if "input" in mapping else None,
        output=Path(mapping["output"]) if "output" in mapping else None,
        reference=Path(mapping["reference"]) if "reference" in mapping else None,
        report=Path(mapping["report"]) if "report" in mapping else None,
    )
    if cfg.epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    if cfg.cap < 1 or cfg.patience < 1:
        raise ConfigError("cap and patience must be >= 1")
    if cfg.stop_kind == "psnr_peak" and cfg.reference is None:
        raise ConfigError("stop = psnr_peak requires a reference image")
    return cfg


_CASE_RE = re.compile(r"^case(\d+)\.(.+)$")


def build_benchmark_plan(mapping: dict[str, str]) -> BenchmarkPlan:
    """Validate a flat mapping with caseN.* keys and assemble a plan."""
    plan_entries: dict[str, str] = {}
    cases: dict[int, dict[str, str]] = {}
    for key, value in mapping.items():
        m = _CASE_RE.match(key)
        if m:
            cases.setdefault(int(m.group(1)), {})[m.group(2)] = value
        elif key in _PLAN_KEYS:
            plan_entries[key] = value
        else:
            raise ConfigError(f"unknown key {key!r}")
    if "output" not in plan_entries:
        raise ConfigError("missing required key 'output' (CSV path)")
    if not cases:
        raise ConfigError("benchmark plan defines no cases")

    stop_kind = plan_entries.get("stop", "psnr_peak")
    if stop_kind not in _STOP_KINDS:
        raise ConfigError(f"unknown stop rule {stop_kind!r}")
    base_seed = _to_int("seed", plan_entries.get("seed", "0"))

    built: list[BenchCase] = []
    for index in sorted(cases):
        entries = cases[index]
        prefix = f"case{index}"
        if "image" not in entries:
            raise ConfigError(f"{prefix}.image is required")
        if "looks" not in entries:
            raise ConfigError(f"{prefix}.looks is required")
        looks = _to_int(f"{prefix}.looks", entries["looks"])
        if looks < 1:
            raise ConfigError(f"{prefix}.looks must be >= 1")
        seed = _to_int(f"{prefix}.seed", entries.get("seed", str(base_seed + index)))
        per_model: dict[str, dict[str, str]] = {m: {} for m in MODEL_NAMES}
        for key, value in entries.items():
            if key in _CASE_KEYS:
                continue
            parts = key.split(".", 1)
            if len(parts) != 2 or parts[0] not in MODEL_NAMES \
                    or parts[1] not in _PARAM_KEYS:
                raise ConfigError(f"unknown key {prefix}.{key!r}")
            per_model[parts[0]][parts[1]] = value
        params = {m: _build_params(per_model[m], m) for m in MODEL_NAMES}
        built.append(BenchCase(image=Path(entries["image"]), looks=looks,
                               seed=seed, params=params))
    return BenchmarkPlan(
        cases=built,
        output=Path(plan_entries["output"]),
        stop_kind=stop_kind,
        epsilon=_to_float("epsilon", plan_entries.get("epsilon", "1e-4")),
        cap=_to_int("cap", plan_entries.get("cap", "500")),
        patience=_to_int("patience", plan_entries.get("patience", "5")),
    )


def parse_config(path) -> RunConfig | BenchmarkPlan:
    """Load a config file, dispatching on the presence of caseN.* keys."""
    mapping = read_mapping(path)
    if any(_CASE_RE.match(key) for key in mapping):
        return build_benchmark_plan(mapping)
    return build_run_config(mapping)
