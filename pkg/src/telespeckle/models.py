"""Diffusion coefficients, explicit time-steppers, and the denoising loop.

Three models share one protocol: start from the noisy image f with a zero
initial time derivative, repeatedly apply an explicit update, and stop by a
relative-error tolerance, a PSNR peak against a reference, or a fixed
iteration budget.

* ``proposed`` - fourth-order telegraph diffusion. The flux is driven by
  the Laplacian instead of the gradient, with a gray-level indicator and a
  Laplacian-magnitude edge-stopper in the coefficient, plus a fidelity
  term tying the iterate to f.
* ``tdm`` - second-order telegraph diffusion with a gradient-based
  coefficient.
* ``shan`` - first-order (forward Euler) diffusion with a regularized
  gray-level coefficient.

The public unit is gray levels in [floor, 255], but each step evaluates
the right-hand side on intensities normalized to [0, 1]. The published
parameter values (edge threshold k ~ 2, fidelity weight ~ 0.03-0.1) only
produce useful diffusion rates at unit range: derivative magnitudes of a
[0, 255] image are hundreds, which would drive the edge-stopper to zero
everywhere.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .image import INTENSITY_FLOOR, INTENSITY_MAX, as_grid, clamp_intensity, \
    is_rgb, merge_channels, split_channels
from .metrics import MetricsReport, mssim, psnr, relative_error, speckle_index
from .stencils import gaussian_smooth, gradient_central, gradient_magnitude, \
    laplacian, laplacian_magnitude, max_abs

# An explicit step whose raw (pre-clamp) update leaves this band has blown
# up: stable runs overshoot [0, 255] by at most a few hundred gray levels,
# while a CFL-violating step lands orders of magnitude outside.
DIVERGENCE_LIMIT = 100.0 * INTENSITY_MAX

MODEL_NAMES = ("proposed", "tdm", "shan")


class DivergenceError(RuntimeError):
    """Explicit scheme blew up (time step too large for the grid)."""

    def __init__(self, iteration: int):
        super().__init__(
            f"solver diverged at iteration {iteration}: "
            f"time step violates the stability (CFL) bound"
        )
        self.iteration = iteration


@dataclass(frozen=True)
class ModelParams:
    """Scalar knobs of a solver run.

    gamma damps the wave part, alpha shapes the gray-level indicator, k is
    the edge threshold, nu the gradient exponent of the shan coefficient,
    lam the fidelity weight, tau the time step, xi the pre-smoothing sigma,
    and h the grid spacing (pixel units). Defaults are the general-purpose
    natural-image profile.
    """

    gamma: float = 5.0
    alpha: float = 2.0
    k: float = 2.0
    nu: float = 1.0
    lam: float = 0.08
    tau: float = 0.2
    xi: float = 2.0
    h: float = 1.0
    fidelity_form: str = "signed"

    def __post_init__(self):
        if self.tau <= 0 or self.xi <= 0 or self.h <= 0:
            raise ValueError("tau, xi, and h must be positive")
        if self.alpha <= 0 or self.k <= 0 or self.nu <= 0:
            raise ValueError("alpha, k, and nu must be positive")
        if self.gamma < 0 or self.lam < 0:
            raise ValueError("gamma and lam must be non-negative")
        if self.fidelity_form not in ("squared", "signed"):
            raise ValueError("fidelity_form must be 'squared' or 'signed'")


@dataclass(frozen=True)
class SolverState:
    """Two time levels plus the fixed observed image.

    current is I at step `iteration`, previous the level before it; at
    start both equal the observed image, which realizes a zero initial
    time derivative.
    """

    current: np.ndarray
    previous: np.ndarray
    observed: np.ndarray
    iteration: int = 0

    @classmethod
    def from_noisy(cls, noisy: np.ndarray) -> "SolverState":
        f = clamp_intensity(as_grid(noisy))
        return cls(current=f, previous=f, observed=f, iteration=0)


@dataclass(frozen=True)
class StoppingRule:
    """When to stop iterating; the hard cap is always active."""

    kind: str
    cap: int = 500
    epsilon: float | None = None
    reference: np.ndarray | None = None
    patience: int = 5
    n_iters: int | None = None

    def __post_init__(self):
        if self.cap < 1:
            raise ValueError("cap must be >= 1")
        if self.kind == "relative_error":
            if self.epsilon is None or self.epsilon <= 0:
                raise ValueError("relative_error stopping needs epsilon > 0")
        elif self.kind == "psnr_peak":
            if self.reference is None:
                raise ValueError("psnr_peak stopping needs a reference image")
            if self.patience < 1:
                raise ValueError("patience must be >= 1")
        elif self.kind == "max_iters":
            if self.n_iters is None or self.n_iters < 1:
                raise ValueError("max_iters stopping needs n_iters >= 1")
        else:
            raise ValueError(f"unknown stopping rule {self.kind!r}")

    @classmethod
    def relative_error(cls, epsilon: float = 1e-4, cap: int = 500) -> "StoppingRule":
        return cls(kind="relative_error", epsilon=epsilon, cap=cap)

    @classmethod
    def psnr_peak(cls, reference: np.ndarray, patience: int = 5,
                  cap: int = 500) -> "StoppingRule":
        return cls(kind="psnr_peak", reference=reference, patience=patience, cap=cap)

    @classmethod
    def max_iters(cls, n: int, cap: int = 500) -> "StoppingRule":
        return cls(kind="max_iters", n_iters=n, cap=cap)


# ---------------------------------------------------------------------------
# Diffusion coefficients. All three live in [0, 1]: the gray-level factor
# because |I_s| <= m, the edge-stopper because its denominator is >= 1.
# ---------------------------------------------------------------------------

def _gray_level_indicator(smoothed: np.ndarray, m: float, alpha: float) -> np.ndarray:
    # Evaluated on |I|/m (equal to 2|I|^a / (m^a + |I|^a)) so that |I| = m
    # gives exactly 1 and the factor never exceeds 1.
    q = np.abs(smoothed) / m
    p = q ** alpha
    return 2.0 * p / (1.0 + p)


def coeff_proposed(smoothed: np.ndarray, lap_mag: np.ndarray, m: float,
                   alpha: float, k: float) -> np.ndarray:
    """2|I_s|^a / (m^a + |I_s|^a) * 1 / (1 + (|lap|/k)^2)."""
    if m <= 0:
        raise ValueError("m must be positive")
    t = lap_mag / k
    return _gray_level_indicator(smoothed, m, alpha) / (1.0 + t * t)


def coeff_tdm(smoothed: np.ndarray, grad_mag: np.ndarray, m: float,
              alpha: float, k: float) -> np.ndarray:
    """Same as coeff_proposed with the gradient magnitude as edge signal."""
    if m <= 0:
        raise ValueError("m must be positive")
    t = grad_mag / k
    return _gray_level_indicator(smoothed, m, alpha) / (1.0 + t * t)


def coeff_shan(smoothed: np.ndarray, grad_mag: np.ndarray, m: float,
               alpha: float, nu: float) -> np.ndarray:
    """(I_s/m)^a / (1 + |grad|^nu); smoothed must be non-negative."""
    if m <= 0:
        raise ValueError("m must be positive")
    return (smoothed / m) ** alpha / (1.0 + grad_mag ** nu)


def fidelity_term(current: np.ndarray, observed: np.ndarray,
                  form: str = "signed") -> np.ndarray:
    """Data-attachment term; current must sit above the intensity floor.

    signed:  ((I - f) / I) * (f / I), a gradient-like restoring force
    (default: it pulls the iterate back toward f from either side, which
    is what makes long runs converge to a useful equilibrium).
    squared: ((I - f) / I)^2, one-signed - it only ever pushes intensity
    down, so long runs drift dark; kept as an option.
    """
    r = (current - observed) / current
    if form == "squared":
        return r * r
    if form == "signed":
        return r * (observed / current)
    raise ValueError(f"unknown fidelity form {form!r}")


def conservative_divergence(coeff: np.ndarray, img: np.ndarray,
                            h: float = 1.0) -> np.ndarray:
    """div(C grad I) in flux form with zero flux across the image border.

    Fluxes live on half-points with the coefficient averaged across each
    face, so the discrete total intensity is conserved exactly up to
    rounding; for a constant coefficient it reduces to that coefficient
    times the five-point Laplacian.
    """
    inv_h = 1.0 / h
    fx = (0.5 * (coeff[:, 1:] + coeff[:, :-1])) * ((img[:, 1:] - img[:, :-1]) * inv_h)
    fy = (0.5 * (coeff[1:, :] + coeff[:-1, :])) * ((img[1:, :] - img[:-1, :]) * inv_h)
    div = np.zeros_like(img)
    div[:, 0] += fx[:, 0]
    div[:, 1:-1] += fx[:, 1:] - fx[:, :-1]
    div[:, -1] += -fx[:, -1]
    div[0, :] += fy[0, :]
    div[1:-1, :] += fy[1:, :] - fy[:-1, :]
    div[-1, :] += -fy[-1, :]
    return div * inv_h


def cfl_bound(coeff_max: float, h: float, order: str, tau: float) -> tuple[float, bool]:
    """Advisory stability bound tau <= h / coeff_max.

    The bound is the same published formula for both 'second' and 'fourth'
    order schemes; it is a warning signal, not a hard rejection, and the
    steppers detect actual blow-up at run time regardless.
    """
    if coeff_max <= 0:
        raise ValueError("coeff_max must be positive")
    if order not in ("second", "fourth"):
        raise ValueError("order must be 'second' or 'fourth'")
    bound = h / coeff_max
    return bound, tau <= bound


# Steps are evaluated on unit-range intensities; see the module docstring.
_UNIT_SCALE = 1.0 / INTENSITY_MAX


def _unit_smoothed_and_max(unit: np.ndarray, xi: float) -> tuple[np.ndarray, float]:
    smoothed = gaussian_smooth(unit, xi)
    m = max(max_abs(smoothed), np.finfo(np.float64).tiny)
    return smoothed, m


def _advance(state: SolverState, rhs_unit: np.ndarray,
             params: ModelParams) -> SolverState:
    """Damped two-level update solved for the next iterate.

    Written as current + scaled increment so a zero right-hand side with
    equal time levels is an exact fixed point.
    """
    g = params.gamma * params.tau
    inc = ((state.current - state.previous) * _UNIT_SCALE
           + params.tau * params.tau * rhs_unit) / (1.0 + g)
    return _finish_step(state, state.current + INTENSITY_MAX * inc)


def _finish_step(state: SolverState, raw: np.ndarray) -> SolverState:
    iteration = state.iteration + 1
    if not np.isfinite(raw).all() or np.abs(raw).max() > DIVERGENCE_LIMIT:
        raise DivergenceError(iteration)
    return SolverState(
        current=clamp_intensity(raw),
        previous=state.current,
        observed=state.observed,
        iteration=iteration,
    )


def step_proposed(state: SolverState, params: ModelParams) -> SolverState:
    """One explicit step of the fourth-order telegraph model.

    On the unit-scaled iterate u and data f: smooth u, build the
    coefficient from the smoothed image and its Laplacian magnitude, then
    advance with rhs = -lap(C * lap(u)) - lam * fidelity(u, f).
    """
    u = state.current * _UNIT_SCALE
    smoothed, m = _unit_smoothed_and_max(u, params.xi)
    c = coeff_proposed(smoothed, laplacian_magnitude(smoothed, params.h), m,
                       params.alpha, params.k)
    rhs = -laplacian(c * laplacian(u, params.h), params.h)
    if params.lam != 0.0:
        rhs = rhs - params.lam * fidelity_term(u, state.observed * _UNIT_SCALE,
                                               params.fidelity_form)
    return _advance(state, rhs, params)


def step_tdm(state: SolverState, params: ModelParams) -> SolverState:
    """One explicit step of the second-order telegraph model."""
    u = state.current * _UNIT_SCALE
    smoothed, m = _unit_smoothed_and_max(u, params.xi)
    c = coeff_tdm(smoothed, gradient_magnitude(gradient_central(smoothed, params.h)),
                  m, params.alpha, params.k)
    rhs = conservative_divergence(c, u, params.h)
    return _advance(state, rhs, params)


def step_shan(state: SolverState, params: ModelParams) -> SolverState:
    """One forward-Euler step of the regularized gray-level model."""
    u = state.current * _UNIT_SCALE
    smoothed, m = _unit_smoothed_and_max(u, params.xi)
    c = coeff_shan(smoothed, gradient_magnitude(gradient_central(smoothed, params.h)),
                   m, params.alpha, params.nu)
    raw = state.current + INTENSITY_MAX * (
        params.tau * conservative_divergence(c, u, params.h))
    return _finish_step(state, raw)


_STEPPERS = {"proposed": step_proposed, "tdm": step_tdm, "shan": step_shan}


def get_stepper(model: str):
    try:
        return _STEPPERS[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; expected one of {MODEL_NAMES}")


def denoise(model: str, noisy: np.ndarray, params: ModelParams,
            stop: StoppingRule) -> tuple[np.ndarray, MetricsReport]:
    """Iterate a model from the noisy image until the stopping rule fires.

    Under psnr_peak the returned image is the best-PSNR iterate seen along
    the trajectory (the noisy input counts as iteration 0), so the result
    is never worse than the input by that measure.

    Returns:
        (restored image, metrics report). The report's iteration count is
        the number of steps executed, not the index of the returned
        iterate.
    """
    step = get_stepper(model)
    t0 = time.perf_counter()
    state = SolverState.from_noisy(noisy)

    track_psnr = stop.kind == "psnr_peak"
    if track_psnr:
        best_psnr = psnr(state.current, stop.reference)
        best_image = state.current
        misses = 0

    last_rel = None
    while state.iteration < stop.cap:
        prev = state.current
        state = step(state, params)
        last_rel = relative_error(state.current, prev)
        if stop.kind == "relative_error" and last_rel <= stop.epsilon:
            break
        if track_psnr:
            p = psnr(state.current, stop.reference)
            if p > best_psnr:
                best_psnr, best_image, misses = p, state.current, 0
            else:
                misses += 1
                if misses >= stop.patience:
                    break
        if stop.kind == "max_iters" and state.iteration >= stop.n_iters:
            break

    restored = best_image if track_psnr else state.current
    report = MetricsReport(
        speckle_index=speckle_index(restored),
        iterations=state.iteration,
        wall_time=time.perf_counter() - t0,
        relative_error=last_rel,
    )
    if stop.reference is not None:
        report.psnr = psnr(restored, stop.reference)
        if min(restored.shape) >= 11:  # default SSIM window
            report.mssim = mssim(restored, stop.reference)
    return restored, report


def denoise_rgb(model: str, noisy: np.ndarray, params: ModelParams,
                stop: StoppingRule) -> tuple[np.ndarray, tuple[MetricsReport, ...]]:
    """Denoise each channel independently with identical parameters.

    A psnr_peak reference must be RGB of the same size; each channel is
    tracked against its own reference plane. Channel results are exactly
    what running `denoise` on the isolated channel would give.
    """
    if not is_rgb(noisy):
        raise ValueError("denoise_rgb expects an (H, W, 3) image")
    channels = split_channels(noisy)
    if stop.reference is not None:
        if not is_rgb(stop.reference) or stop.reference.shape != noisy.shape:
            raise ValueError("reference must be RGB with the noisy image's shape")
        refs = split_channels(stop.reference)
        rules = [replace(stop, reference=r) for r in refs]
    else:
        rules = [stop, stop, stop]
    results = [denoise(model, ch, params, rule)
               for ch, rule in zip(channels, rules)]
    restored = merge_channels(results[0][0], results[1][0], results[2][0])
    return restored, tuple(rep for _, rep in results)
