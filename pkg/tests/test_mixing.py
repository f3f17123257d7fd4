import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from similab.hermite import gaussian
from similab.mixing import (
    PipePair,
    evolve_pseudo_frame,
    frame_step,
    gaussian_release,
    mean_diff_transform,
    periodic_grid,
    run_mixing,
    second_moment,
    slaving_bins,
    slaving_deviation,
    spectral_derivative,
    spectral_shift,
    step_pipes,
)
from similab.sde import IntegrationError
from similab.stats import proportion_ci

X = periodic_grid(40.0, 512)
DX = X[1] - X[0]


def test_equal_pipes_keep_mass():
    g = gaussian_release(X, 2.0)
    pair = PipePair(0.0, X, g.copy(), g.copy())
    rng = np.random.default_rng(0)
    m0 = pair.total_mass
    for dw in rng.normal(0, 0.2, 50):
        pair = step_pipes(pair, 0.04, dw)
    assert pair.total_mass == pytest.approx(m0, rel=1e-13)


def test_exchange_without_advection():
    g = gaussian_release(X, 2.0)
    h = gaussian_release(X, 3.0, center=1.0)
    pair = PipePair(0.0, X, g, h)
    m0, d0 = pair.mean, pair.half_difference
    for _ in range(20):
        pair = step_pipes(pair, 0.05, 0.0)
    np.testing.assert_allclose(pair.mean, m0, atol=1e-15)
    np.testing.assert_allclose(pair.half_difference, d0 * math.exp(-1.0), atol=1e-15)


def test_shift_too_large_aborts():
    pair = PipePair(0.0, X, np.zeros_like(X), np.zeros_like(X))
    with pytest.raises(IntegrationError):
        step_pipes(pair, 0.1, 50.0)


@given(st.floats(-5, 5))
def test_shift_preserves_norms(s):
    f = gaussian_release(X, 1.5, center=0.3) * (1 + 0.2 * np.cos(X))
    g = spectral_shift(f, X, s)
    assert np.sum(g**2) == pytest.approx(np.sum(f**2), rel=1e-12)
    assert np.sum(np.abs(g)) == pytest.approx(np.sum(np.abs(f)), rel=1e-6)
    assert np.max(np.abs(g)) == pytest.approx(np.max(np.abs(f)), rel=1e-2)


def test_shift_and_derivative_are_exact_on_smooth_fields():
    f = gaussian_release(X, 2.0)
    np.testing.assert_allclose(spectral_shift(f, X, 1.25), gaussian_release(X, 2.0, center=1.25), atol=1e-13)
    np.testing.assert_allclose(spectral_derivative(f, X), -X / 2.0 * f, atol=1e-13)


def test_frame_without_noise():
    t = np.linspace(0, 3, 301)
    fr = evolve_pseudo_frame(t, seed=0, T0=2.0, eta0=0.7, increments=np.zeros((1, 300)))
    np.testing.assert_array_equal(fr.T, 2.0)
    np.testing.assert_allclose(fr.eta[0], 0.7 * np.exp(-t), rtol=1e-4)
    with pytest.raises(ValueError):
        evolve_pseudo_frame(t, seed=0, T0=0.0)


@pytest.fixture(scope="module")
def frame_ensemble():
    t = np.linspace(0, 50, 1001)
    return evolve_pseudo_frame(t, seed=7, n_paths=10_000)


def test_eta_stationary_variance(frame_ensemble):
    assert frame_ensemble.eta[:, -1].var(ddof=1) == pytest.approx(0.5, rel=0.05)


def test_mean_pseudotime_growth(frame_ensemble):
    assert np.mean(frame_ensemble.T[:, -1] - 1.0) == pytest.approx(25.0, rel=0.1)


def test_reversals_positive(frame_ensemble):
    frac = frame_ensemble.reversal_fraction
    steps = frame_ensemble.T.shape[1] - 1
    lo, _ = proportion_ci(int(round(frac.sum() * steps)), frac.size * steps)
    assert lo > 0


def test_frame_step_is_stratonovich_heun():
    T, eta = frame_step(np.array([1.0]), np.array([0.5]), 0.1, np.array([0.2]))
    eta_p = 0.5 - 0.05 + 0.2
    assert T[0] == pytest.approx(1.0 + 0.5 * (0.5 + eta_p) * 0.2)
    assert eta[0] == pytest.approx(0.5 - 0.5 * (0.5 + eta_p) * 0.1 + 0.2)


def test_mean_diff_transform_examples():
    T, mass = 3.0, 1.7
    g = mass * gaussian_release(X, 2 * T)
    xi, u, d = mean_diff_transform(PipePair(0.0, X, g, g), T)
    np.testing.assert_allclose(u, mass * gaussian(xi), atol=1e-14)
    np.testing.assert_array_equal(d, 0.0)
    _, u, _ = mean_diff_transform(PipePair(0.0, X, g, -g), T)
    np.testing.assert_array_equal(u, 0.0)
    with pytest.raises(ValueError):
        mean_diff_transform(PipePair(0.0, X, g, g), 0.0)


def test_slaving_consistency_without_noise():
    eta0, T0 = 0.5, 1.0
    m = gaussian_release(X, 3.0)
    d = -eta0 * spectral_derivative(m, X)
    pair = PipePair(0.0, X, m + d, m - d)
    T, eta = np.array([T0]), np.array([eta0])
    scale = np.sqrt(np.sum(spectral_derivative(m, X) ** 2) * DX)
    for _ in range(100):
        pair = step_pipes(pair, 0.01, 0.0)
        T, eta = frame_step(T, eta, 0.01, np.zeros(1))
        dev = slaving_deviation(PipePair(pair.t, X, pair.u1[None], pair.u2[None]), T, eta)
        # eta carries the O(dt^2) Heun error, the pipes are exact
        assert dev[0] < 1e-4 * scale * T0**0.75


def test_second_moment():
    assert second_moment(gaussian_release(X, 2.5), X) == pytest.approx(2.5, rel=1e-10)


@pytest.fixture(scope="module")
def small_run():
    return run_mixing(20, seed=3, t_end=50.0)


def test_variance_tracks_twice_pseudotime(small_run):
    ok = ~small_run.flagged
    gap = (small_run.sigma2 - small_run.sigma2[:, :1]) - 2 * (small_run.T - small_run.T[:, :1])
    assert np.max(np.abs(gap[ok])) < 0.05


def test_mass_conserved(small_run):
    assert np.max(np.abs(small_run.mass / small_run.mass[:, :1] - 1)) < 1e-8


def test_gaussian_emergence(small_run):
    late = small_run.t >= 40.0
    med = np.nanmedian(small_run.hermite_ratio[:, late].reshape(-1, 4), axis=0)
    assert np.all(med < 0.1)


def test_slaving_skips_small_eta(small_run):
    _, counts, skipped = slaving_bins(small_run)
    assert skipped > 0
    assert counts.sum() > 0


def test_batches_reproduce_whole_run():
    whole = run_mixing(4, seed=9, t_end=2.0, hermite_modes=0)
    tail = run_mixing(2, seed=9, t_end=2.0, hermite_modes=0, path_offset=2)
    np.testing.assert_array_equal(whole.sigma2[2:], tail.sigma2)
    np.testing.assert_array_equal(whole.T[2:], tail.T)


def test_initial_option_validated():
    with pytest.raises(ValueError):
        run_mixing(1, seed=0, t_end=0.5, initial="pipe3")
