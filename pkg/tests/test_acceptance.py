"""Exit-criteria suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -m acceptance``.  Tolerances are pinned here and must not be
loosened.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from golden import CUBIC_MONOMIALS, REFERENCE_CUBIC, S3PI
from similab.experiments import run, validate_config
from similab.galerkin import cubic_projection_tensor
from similab.hermite import BasisSpec, apply_similarity_operator, weighted_inner
from similab.noise import NoiseSpectrum
from similab.slow_manifold import (
    DRIFT_WEIGHT_FRACTIONS,
    DRIFT_WEIGHTS,
    VOL_WEIGHTS,
    residual_slope,
    simulate_transformed,
    slow_drift_exponent,
)

pytestmark = pytest.mark.acceptance

SEED = 20240


@pytest.fixture
def report(capsys):
    def _report(number, passed, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if passed else 'FAIL'}  criterion {number}: {detail}")
        assert passed, detail

    return _report


def _run(name, paths=None, **params):
    raw = {"experiment": name, "seed": SEED, "params": params}
    if paths is not None:
        raw["paths"] = paths
    return run(validate_config(raw), write=False).summary


def test_criterion_1_basis(report):
    spec = BasisSpec(10)
    vals = spec.evaluate(spec.rule.nodes)
    gram = np.array([[weighted_inner(vals[j], vals[k], spec.rule) for k in range(11)] for j in range(11)])
    ortho = float(np.max(np.abs(gram - np.eye(11))))
    eig = 0.0
    for k in range(11):
        unit = np.eye(11)[k]
        expect = np.zeros(13)
        expect[k] = -0.5 * k
        eig = max(eig, float(np.max(np.abs(apply_similarity_operator(unit) - expect))))
    report(1, ortho <= 1e-10 and eig <= 1e-8, f"orthonormality {ortho:.2e} (tol 1e-10), eigen-relation {eig:.2e} (tol 1e-8)")


def test_criterion_2_golden_coefficients(report):
    tensor = cubic_projection_tensor(BasisSpec(2))
    bad = []
    worst = 0.0
    for k in range(3):
        for powers in CUBIC_MONOMIALS:
            got = tensor.monomial_coefficient(k, powers)
            want = REFERENCE_CUBIC[k].get(powers, 0.0) / S3PI
            err = abs(got - want)
            worst = max(worst, err)
            if err > 1e-12:
                bad.append(f"d_{k}{powers}: quadrature {got * S3PI:+.15f}/s3pi, reference {want * S3PI:+.15f}/s3pi")
    weights_ok = all(float(f) == w for f, w in zip(DRIFT_WEIGHT_FRACTIONS, DRIFT_WEIGHTS)) and len(DRIFT_WEIGHTS) == 8
    reference_vol = (1 / math.sqrt(2), -1 / (2 * math.sqrt(6)), math.sqrt(5) / 27, -math.sqrt(70) / 216)
    vol_ok = len(VOL_WEIGHTS) == 4 and all(abs(a - b) < 1e-15 for a, b in zip(VOL_WEIGHTS, reference_vol))
    fractions_ok = DRIFT_WEIGHT_FRACTIONS[2:] == (
        Fraction(7, 54), Fraction(19, 216), Fraction(17, 270), Fraction(47, 972), Fraction(131, 3402), Fraction(41, 1296)
    )
    detail = (
        f"{30 - len(bad)}/30 monomials within 1e-12 (max error {worst:.2e}); "
        f"drift weights {'ok' if weights_ok and fractions_ok else 'MISMATCH'}, "
        f"volatility weights {'ok' if vol_ok else 'MISMATCH'}"
    )
    if bad:
        detail += "; mismatches: " + "; ".join(bad)
    report(2, not bad and weights_ok and vol_ok and fractions_ok, detail)


@pytest.mark.slow
def test_criterion_3_linear_self_similarity(report):
    b = [0.5, 1.0, 0.8, 0.6, 0.4]
    s = _run("modal-linear", paths=10_000, b=b, tau_end=12.0, dt=0.01)
    errs = [abs(s[f"rel_error_u{k}"]) for k in range(1, 5)]
    walk = s["mode0_walk_max_error"]
    report(
        3,
        max(errs) <= 0.05 and walk == 0.0,
        "stationary variance rel errors " + ", ".join(f"k={k}: {e:.3f}" for k, e in enumerate(errs, 1))
        + f" (tol 0.05); mode-0 walk max deviation {walk:.1e}",
    )


@pytest.mark.slow
def test_criterion_4_normal_form_residual(report):
    slope = residual_slope((0.05, 0.1, 0.2), transform="full")
    tp = simulate_transformed([0.3, 0.0, 0.0], NoiseSpectrum((0.3, 0.3, 0.3)), 1000, 0.01, seed=SEED, n_paths=100)
    inv = float(np.max(np.abs(tp.U[:, :, 1:])))
    report(4, slope >= 3.7 and inv <= 1e-12, f"residual slope {slope:.3f} (need >= 3.7); max |U_1|,|U_2| {inv:.1e} (tol 1e-12)")


@pytest.mark.slow
def test_criterion_5_noise_enhanced_decay(report):
    spectrum = NoiseSpectrum((0.0, 0.3))
    alpha = slow_drift_exponent(spectrum)
    formula = 0.3**2 / (2 * math.sqrt(3 * math.pi))
    s = _run("slow-model", paths=10_000, b=[0.0, 0.3], a0=0.1, tau_end=25.0, dt=0.02, fit_window=[5.0, 25.0])
    rate = s["decay_rate_mean_a"]
    rel = abs(rate - alpha) / alpha
    report(
        5,
        abs(alpha - formula) < 1e-15 and rel <= 0.20,
        f"fitted rate {rate:.5f} vs alpha = b1^2/(2 sqrt(3 pi)) = {alpha:.5f}, rel error {rel:.3f} (tol 0.20)",
    )


@pytest.mark.slow
def test_criterion_6_burgers_emergence(report):
    zero = _run("burgers-similarity", paths=1, b=[0.0])
    rate = zero["l2k_decay_rate"]
    noisy = _run("burgers-similarity", paths=100, b=[0.0, 0.1, 0.1, 0.1, 0.1])
    frac, mass = noisy["contraction_fraction"], noisy["mass_drift_max"]
    report(
        6,
        0.4 <= rate <= 0.6 and mass <= 1e-6 and frac >= 0.99,
        f"zero-noise L2(K) rate {rate:.3f} (need [0.4, 0.6]); conservative mass drift {mass:.1e} (tol 1e-6); "
        f"phi non-increasing in {frac:.4f} of increments (need >= 0.99)",
    )


@pytest.mark.slow
def test_criterion_7_physical_similarity_agreement(report):
    s = _run("burgers-physical", paths=1, t_end=20.0)
    err = s["max_rel_error"]
    report(7, err <= 1e-3, f"max relative difference over t in [1, 20]: {err:.2e} (tol 1e-3)")


@pytest.mark.slow
def test_criterion_8_pseudotime_moments(report):
    s = _run("pseudotime-moments", paths=10_000, t0=1.0, T_end=10.0)
    c = _run("origin-compensation", paths=1000)
    mean_err, var_err = s["max_rel_error_mean_t"], s["max_rel_error_var_integral"]
    comp = max(c["max_abs_u1"], c["max_abs_u2"])
    report(
        8,
        mean_err <= 0.03 and var_err <= 0.05 and comp < 1e-6,
        f"E[t] rel error {mean_err:.4f} (tol 0.03); Var integral rel error {var_err:.4f} (tol 0.05); "
        f"compensated max |u_1|,|u_2| {comp:.1e} (tol 1e-6)",
    )


@pytest.mark.slow
def test_criterion_9_mixing(report):
    spread = _run("mixing-spread", paths=1000, t_end=50.0)
    slaving = _run("mixing-slaving", paths=1000, t_end=50.0)
    d_eff = spread["effective_diffusivity"]
    dT, want = spread["mean_T_minus_T0_end"], spread["expected_T_minus_T0_end"]
    drop = slaving["slaving_drop_factor"]
    report(
        9,
        abs(d_eff - 1) <= 0.15 and abs(dT - want) / want <= 0.10 and drop >= 5,
        f"variance slope in T-units {d_eff:.4f} (need 1 +- 0.15); E[T]-T0 at t=50 {dT:.2f} vs {want:.1f} (tol 10%); "
        f"slaving drop {drop:.1f}x (need >= 5)",
    )
