import numpy as np
import pytest

from telespeckle.image import INTENSITY_FLOOR, INTENSITY_MAX
from telespeckle.metrics import psnr
from telespeckle.models import (DivergenceError, MODEL_NAMES, ModelParams,
                                SolverState, StoppingRule, cfl_bound,
                                coeff_proposed, coeff_shan, coeff_tdm,
                                conservative_divergence, denoise, denoise_rgb,
                                fidelity_term, get_stepper, step_proposed,
                                step_shan, step_tdm)
from telespeckle.noise import NoiseSpec, apply_speckle
from telespeckle.stencils import gaussian_smooth
from telespeckle.synth import textured_scene
import oracles

UNIT = 1.0 / INTENSITY_MAX


def small_state(rng, shape=(9, 9), lo=30.0, hi=220.0):
    f = rng.uniform(lo, hi, size=shape)
    cur = rng.uniform(lo, hi, size=shape)
    prev = rng.uniform(lo, hi, size=shape)
    return SolverState(current=cur, previous=prev, observed=f, iteration=0)


# ---------------------------------------------------------------------------
# coefficients and fidelity
# ---------------------------------------------------------------------------

def test_coeff_proposed_anchor_values():
    m = 7.3
    one = coeff_proposed(np.array([[m]]), np.array([[0.0]]), m, 1.7, 2.0)
    assert one[0, 0] == 1.0
    zero = coeff_proposed(np.array([[0.0]]), np.array([[3.0]]), m, 1.7, 2.0)
    assert zero[0, 0] == 0.0
    half = coeff_proposed(np.array([[m]]), np.array([[2.0]]), m, 1.7, 2.0)
    assert half[0, 0] == 0.5


def test_coeff_tdm_anchor_values():
    m = 11.0
    assert coeff_tdm(np.array([[m]]), np.array([[0.0]]), m, 0.6, 3.0)[0, 0] == 1.0
    assert coeff_tdm(np.array([[0.0]]), np.array([[9.0]]), m, 0.6, 3.0)[0, 0] == 0.0
    assert coeff_tdm(np.array([[m]]), np.array([[3.0]]), m, 0.6, 3.0)[0, 0] == 0.5


def test_coeff_shan_anchor_values():
    m = 5.0
    assert coeff_shan(np.array([[m]]), np.array([[0.0]]), m, 1.1, 1.0)[0, 0] == 1.0
    assert coeff_shan(np.array([[0.0]]), np.array([[2.0]]), m, 1.1, 1.0)[0, 0] == 0.0
    got = coeff_shan(np.array([[m / 2]]), np.array([[1.0]]), m, 1.0, 1.0)
    assert got[0, 0] == 0.25


def test_coeff_bounds_random():
    rng = np.random.default_rng(40)
    for _ in range(300):
        m = rng.uniform(0.05, 400.0)
        smoothed = rng.uniform(0.0, m, size=17)
        mag = rng.uniform(0.0, 600.0, size=17)
        alpha = rng.uniform(0.05, 4.0)
        k = rng.uniform(0.1, 10.0)
        nu = rng.uniform(0.05, 3.0)
        for c in (coeff_proposed(smoothed, mag, m, alpha, k),
                  coeff_tdm(smoothed, mag, m, alpha, k),
                  coeff_shan(smoothed, mag, m, alpha, nu)):
            assert (c >= 0.0).all() and (c <= 1.0).all()


def test_fidelity_forms():
    f = np.full((4, 4), 80.0)
    assert not fidelity_term(f.copy(), f, "squared").any()
    assert not fidelity_term(f.copy(), f, "signed").any()
    assert np.allclose(fidelity_term(2 * f, f, "squared"), 0.25)
    got = fidelity_term(4 * f, f, "signed")
    assert np.allclose(got, 0.75 * 0.25)
    with pytest.raises(ValueError):
        fidelity_term(f, f, "cubic")


def test_fidelity_matches_loop_oracle():
    rng = np.random.default_rng(41)
    cur = rng.uniform(1, 255, size=(6, 6))
    obs = rng.uniform(1, 255, size=(6, 6))
    sq = np.array([[((cur[i, j] - obs[i, j]) / cur[i, j]) ** 2
                    for j in range(6)] for i in range(6)])
    sg = np.array([[((cur[i, j] - obs[i, j]) / cur[i, j]) * (obs[i, j] / cur[i, j])
                    for j in range(6)] for i in range(6)])
    assert oracles.rel_close(fidelity_term(cur, obs, "squared"), sq, 1e-14)
    assert oracles.rel_close(fidelity_term(cur, obs, "signed"), sg, 1e-14)


# ---------------------------------------------------------------------------
# steppers
# ---------------------------------------------------------------------------

def test_constant_state_is_exact_fixed_point():
    rng = np.random.default_rng(42)
    for _ in range(5):
        c = float(rng.uniform(INTENSITY_FLOOR, 255.0))
        params = ModelParams(gamma=float(rng.uniform(0, 8)),
                             alpha=float(rng.uniform(0.1, 3)),
                             k=float(rng.uniform(0.5, 5)),
                             nu=float(rng.uniform(0.1, 2)),
                             lam=float(rng.uniform(0, 0.2)))
        state = SolverState.from_noisy(np.full((12, 12), c))
        for model in MODEL_NAMES:
            out = get_stepper(model)(state, params)
            assert np.array_equal(out.current, state.current), model


def test_proposed_step_matches_oracle_recipe():
    # gamma=0, equal time levels: next = I + 255 * tau^2 * R(u), R built
    # from the loop stencils on u = I/255.
    rng = np.random.default_rng(43)
    cur = rng.uniform(30, 220, size=(3, 3))
    params = ModelParams(gamma=0.0, alpha=1.3, k=2.0, lam=0.0, tau=0.1, xi=1.0)
    state = SolverState(cur, cur.copy(), cur.copy(), 0)

    u = cur * UNIT
    sm = oracles.gaussian_smooth_loop(u, params.xi)
    m = np.abs(sm).max()
    lap_mag = oracles.laplacian_magnitude_loop(sm)
    coeff = (2 * np.abs(sm) ** params.alpha / (m ** params.alpha + np.abs(sm) ** params.alpha)
             / (1 + (lap_mag / params.k) ** 2))
    rhs = -oracles.laplacian_loop(coeff * oracles.laplacian_loop(u))
    expected = np.clip(cur + INTENSITY_MAX * params.tau ** 2 * rhs,
                       INTENSITY_FLOOR, INTENSITY_MAX)
    got = step_proposed(state, params).current
    assert oracles.rel_close(got, expected, 1e-12)


def test_proposed_step_with_fidelity_matches_oracle():
    rng = np.random.default_rng(44)
    cur = rng.uniform(30, 220, size=(5, 5))
    obs = rng.uniform(30, 220, size=(5, 5))
    params = ModelParams(gamma=2.0, alpha=1.0, k=2.0, lam=0.05, tau=0.2, xi=1.0)
    state = SolverState(cur, cur.copy(), obs, 0)

    u, f = cur * UNIT, obs * UNIT
    sm = oracles.gaussian_smooth_loop(u, params.xi)
    m = np.abs(sm).max()
    lap_mag = oracles.laplacian_magnitude_loop(sm)
    coeff = (2 * np.abs(sm) ** params.alpha / (m ** params.alpha + np.abs(sm) ** params.alpha)
             / (1 + (lap_mag / params.k) ** 2))
    rhs = -oracles.laplacian_loop(coeff * oracles.laplacian_loop(u))
    rhs = rhs - params.lam * ((u - f) / u) * (f / u)
    inc = params.tau ** 2 * rhs / (1 + params.gamma * params.tau)
    expected = np.clip(cur + INTENSITY_MAX * inc, INTENSITY_FLOOR, INTENSITY_MAX)
    got = step_proposed(state, params).current
    assert oracles.rel_close(got, expected, 1e-12)


def unit_coefficient_params(model):
    # alpha -> 0 sends the gray-level factor to 1; a huge k (or nu) kills
    # the edge-stopper's argument, so C == 1 exactly.
    if model == "shan":
        return ModelParams(gamma=0.0, alpha=1e-20, nu=300.0, tau=0.1, xi=1.0)
    return ModelParams(gamma=0.0, alpha=1e-20, k=1e12, lam=0.0, tau=0.1, xi=1.0)


@pytest.mark.parametrize("model", ["tdm", "shan"])
def test_second_order_step_with_unit_coefficient(model):
    rng = np.random.default_rng(45)
    cur = rng.uniform(80, 170, size=(3, 3))
    params = unit_coefficient_params(model)
    state = SolverState(cur, cur.copy(), cur.copy(), 0)

    u = cur * UNIT
    sm = gaussian_smooth(u, params.xi)
    m = np.abs(sm).max()
    from telespeckle.stencils import gradient_central, gradient_magnitude
    gm = gradient_magnitude(gradient_central(sm))
    if model == "shan":
        assert (coeff_shan(sm, gm, m, params.alpha, params.nu) == 1.0).all()
        factor = params.tau
    else:
        assert (coeff_tdm(sm, gm, m, params.alpha, params.k) == 1.0).all()
        factor = params.tau ** 2
    lap_center = oracles.laplacian_loop(u)[1, 1]
    expected_center = cur[1, 1] + INTENSITY_MAX * factor * lap_center
    got = get_stepper(model)(state, params).current
    assert abs(got[1, 1] - expected_center) < 1e-12 * 255


def test_steps_commute_with_flips_bitwise():
    rng = np.random.default_rng(46)
    state = small_state(rng, shape=(10, 13))
    params = ModelParams(gamma=4, alpha=1, k=2, lam=0.03)
    ops = (np.fliplr, np.flipud, lambda a: a[::-1, ::-1])
    for model in MODEL_NAMES:
        step = get_stepper(model)
        base = step(state, params).current
        for op in ops:
            flipped = SolverState(op(state.current).copy(),
                                  op(state.previous).copy(),
                                  op(state.observed).copy(), 0)
            assert np.array_equal(step(flipped, params).current, op(base)), \
                (model, op.__name__ if hasattr(op, "__name__") else "rot180")


def test_conservative_divergence_conserves_total():
    rng = np.random.default_rng(47)
    img = rng.uniform(20, 230, size=(16, 16))
    coeff = rng.uniform(0.0, 1.0, size=(16, 16))
    div = conservative_divergence(coeff, img)
    assert abs(div.sum()) < 1e-9 * np.abs(img).sum()


def test_shan_total_intensity_drift_tiny():
    rng = np.random.default_rng(48)
    state = SolverState.from_noisy(rng.uniform(30, 220, size=(16, 16)))
    params = ModelParams(alpha=1.0, nu=1.0)
    total = state.current.sum()
    for _ in range(10):
        state = step_shan(state, params)
    assert abs(state.current.sum() - total) <= 1e-9 * total


def test_divergence_detected_for_large_time_step():
    rng = np.random.default_rng(49)
    clean = rng.uniform(40, 220, size=(64, 64))
    noisy = apply_speckle(clean, NoiseSpec(1, 3))
    params = ModelParams(gamma=4, alpha=1, k=2, lam=0.03, tau=10.0)
    state = SolverState.from_noisy(noisy)
    with pytest.raises(DivergenceError, match="iteration") as info:
        for _ in range(50):
            state = step_proposed(state, params)
    assert 1 <= info.value.iteration <= 50


def test_cfl_bound_examples():
    bound, ok = cfl_bound(1.0, 1.0, "fourth", 0.2)
    assert bound == 1.0 and ok
    bound, ok = cfl_bound(2.0, 1.0, "second", 0.5)
    assert bound == 0.5 and ok  # boundary inclusive
    bound, ok = cfl_bound(5.0, 1.0, "second", 0.3)
    assert abs(bound - 0.2) < 1e-15 and not ok
    with pytest.raises(ValueError):
        cfl_bound(0.0, 1.0, "second", 0.1)
    with pytest.raises(ValueError):
        cfl_bound(1.0, 1.0, "sixth", 0.1)


# ---------------------------------------------------------------------------
# denoise loop
# ---------------------------------------------------------------------------

def test_unknown_model_rejected():
    with pytest.raises(ValueError, match="unknown model"):
        get_stepper("pm")


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(tau=0.0)
    with pytest.raises(ValueError):
        ModelParams(alpha=-1.0)
    with pytest.raises(ValueError):
        ModelParams(fidelity_form="other")


def test_stopping_rule_validation():
    with pytest.raises(ValueError):
        StoppingRule(kind="relative_error")
    with pytest.raises(ValueError):
        StoppingRule(kind="psnr_peak")
    with pytest.raises(ValueError):
        StoppingRule(kind="max_iters")
    with pytest.raises(ValueError):
        StoppingRule.relative_error(1e-4, cap=0)
    with pytest.raises(ValueError):
        StoppingRule(kind="nonsense", epsilon=1.0)


def test_constant_input_converges_immediately():
    const = np.full((16, 16), 128.0)
    for model in MODEL_NAMES:
        restored, report = denoise(model, const, ModelParams(),
                                   StoppingRule.relative_error(1e-4))
        assert report.iterations <= 2
        assert np.array_equal(restored, const)
        assert report.relative_error == 0.0


def test_huge_epsilon_stops_after_one_iteration():
    noisy = apply_speckle(textured_scene(32, 1), NoiseSpec(2, 4))
    _, report = denoise("proposed", noisy, ModelParams(gamma=4, alpha=1, k=2, lam=0.03),
                        StoppingRule.relative_error(1.0))
    assert report.iterations == 1


def test_relative_error_threshold_respected():
    noisy = apply_speckle(textured_scene(32, 2), NoiseSpec(4, 9))
    stop = StoppingRule.relative_error(2e-3, cap=400)
    _, report = denoise("shan", noisy, ModelParams(alpha=1, nu=1), stop)
    assert report.iterations < 400
    assert report.relative_error <= 2e-3


def test_cap_always_enforced():
    noisy = apply_speckle(textured_scene(32, 3), NoiseSpec(1, 1))
    stop = StoppingRule.relative_error(1e-30, cap=15)
    _, report = denoise("tdm", noisy, ModelParams(gamma=5, alpha=2, k=2), stop)
    assert report.iterations == 15


def test_max_iters_runs_exact_count():
    noisy = apply_speckle(textured_scene(32, 4), NoiseSpec(3, 2))
    _, report = denoise("proposed", noisy,
                        ModelParams(gamma=4, alpha=1, k=2, lam=0.03),
                        StoppingRule.max_iters(7))
    assert report.iterations == 7


def test_psnr_peak_returns_trajectory_argmax():
    clean = textured_scene(32, 5)
    noisy = apply_speckle(clean, NoiseSpec(2, 6))
    params = ModelParams(gamma=4, alpha=1, k=2, lam=0.03)
    stop = StoppingRule.psnr_peak(clean, patience=3, cap=40)
    restored, report = denoise("proposed", noisy, params, stop)

    state = SolverState.from_noisy(noisy)
    trajectory = [psnr(state.current, clean)]
    for _ in range(report.iterations):
        state = step_proposed(state, params)
        trajectory.append(psnr(state.current, clean))
    assert report.psnr == max(trajectory)
    assert psnr(restored, clean) == max(trajectory)


def test_psnr_peak_never_below_input():
    clean = textured_scene(32, 7)
    noisy = apply_speckle(clean, NoiseSpec(1, 8))
    stop = StoppingRule.psnr_peak(clean, patience=2, cap=30)
    restored, report = denoise("shan", noisy, ModelParams(alpha=1, nu=1), stop)
    assert report.psnr >= psnr(np.clip(noisy, INTENSITY_FLOOR, 255.0), clean)


def test_denoise_deterministic():
    noisy = apply_speckle(textured_scene(24, 9), NoiseSpec(2, 10))
    params = ModelParams(gamma=4, alpha=1, k=2, lam=0.03)
    a, _ = denoise("proposed", noisy, params, StoppingRule.max_iters(9))
    b, _ = denoise("proposed", noisy, params, StoppingRule.max_iters(9))
    assert np.array_equal(a, b)


def test_denoise_rgb_matches_per_channel_runs():
    rng = np.random.default_rng(50)
    clean = np.stack([textured_scene(24, s) for s in (1, 2, 3)], axis=2)
    noisy = apply_speckle(clean, NoiseSpec(2, 11))
    params = ModelParams(gamma=5, alpha=1, k=2, lam=0.1)
    stop = StoppingRule.psnr_peak(clean, patience=3, cap=25)
    restored, reports = denoise_rgb("proposed", noisy, params, stop)
    for c in range(3):
        rule = StoppingRule.psnr_peak(clean[:, :, c], patience=3, cap=25)
        alone, rep = denoise("proposed", noisy[:, :, c], params, rule)
        assert np.array_equal(restored[:, :, c], alone)
        assert reports[c].iterations == rep.iterations


def test_denoise_rgb_identical_channels_stay_identical():
    gray = textured_scene(24, 4)
    clean = np.stack([gray, gray, gray], axis=2)
    noisy_gray = apply_speckle(gray, NoiseSpec(2, 12))
    noisy = np.stack([noisy_gray] * 3, axis=2)
    restored, _ = denoise_rgb("tdm", noisy, ModelParams(gamma=5, alpha=2, k=2),
                              StoppingRule.psnr_peak(clean, patience=3, cap=20))
    assert np.array_equal(restored[:, :, 0], restored[:, :, 1])
    assert np.array_equal(restored[:, :, 0], restored[:, :, 2])


def test_denoise_rgb_requires_rgb_reference():
    clean = np.stack([textured_scene(16, s) for s in (5, 6, 7)], axis=2)
    noisy = apply_speckle(clean, NoiseSpec(2, 13))
    with pytest.raises(ValueError):
        denoise_rgb("shan", noisy, ModelParams(),
                    StoppingRule.psnr_peak(clean[:, :, 0], patience=2, cap=5))
