"""Normal-form coordinates and slow-manifold amplitude models for the
three- and nine-mode projections of the cubic reaction-diffusion SPDE.

Three-mode transform (``s = sqrt(3 pi)``; ``z_1``, ``z_2`` are the OU
memories with decay rates 1/2 and 1)::

    u_0 = U_0 + (-U_0^2 U_2/sqrt2 + U_0 U_2^2/4 + U_0 U_1^2/2 - sqrt2 U_2^3/54) / s
    u_1 = U_1 + (U_1^3/6 + U_1 U_2^2/12) / s + b_1 z_1
    u_2 = U_2 + (sqrt2 U_0^3/6 - sqrt2 U_0 U_2^2/6 + 5 U_2^3/108 + U_1^2 U_2/6) / s + b_2 z_2

Nine-mode amplitude model::

    s da = [-a^3/2 - s alpha a] dtau + s b_0 dw_0 + a^2 sum_k v_k b_k dw_k

with the noise-induced decay exponent ``alpha = sum_k w_k b_k^2 / s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .galerkin import cubic_projection_tensor
from .hermite import BasisSpec
from .noise import NoiseSpectrum, ou_factors, spectral_increments
from .sde import check_finite, heun_step

S3PI = math.sqrt(3.0 * math.pi)
SQRT2 = math.sqrt(2.0)

DRIFT_WEIGHT_FRACTIONS = (
    Fraction(1, 2),
    Fraction(1, 4),
    Fraction(7, 54),
    Fraction(19, 216),
    Fraction(17, 270),
    Fraction(47, 972),
    Fraction(131, 3402),
    Fraction(41, 1296),
)
# applied to b_1^2 .. b_8^2
DRIFT_WEIGHTS = (0.5, 0.25, 7 / 54, 19 / 216, 17 / 270, 47 / 972, 131 / 3402, 41 / 1296)
# multiplicative-noise weights on modes 2, 4, 6, 8
VOL_MODES = (2, 4, 6, 8)
VOL_WEIGHTS = (1 / SQRT2, -1 / (2 * math.sqrt(6.0)), math.sqrt(5.0) / 27, -math.sqrt(70.0) / 216)

# OU decay rates of the fast-mode memories z_1, z_2
MEMORY_RATES = (0.5, 1.0)


class AmplitudeTooLarge(ValueError):
    """Fixed-point inversion of the normal-form transform did not converge."""


def _three_mode(spectrum: NoiseSpectrum) -> np.ndarray:
    b = spectrum.array
    if b.size > 3 and np.any(b[3:]):
        raise ValueError("three-mode normal form accepts b_0..b_2 only")
    out = np.zeros(3)
    out[: min(3, b.size)] = b[:3]
    return out


def _cubic_shift(U):
    """Polynomial part of the transform ``u - U - b z``."""
    U0, U1, U2 = U[..., 0], U[..., 1], U[..., 2]
    n0 = -U0**2 * U2 / SQRT2 + 0.25 * U0 * U2**2 + 0.5 * U0 * U1**2 - SQRT2 / 54 * U2**3
    n1 = U1**3 / 6 + U1 * U2**2 / 12
    n2 = SQRT2 / 6 * U0**3 - SQRT2 / 6 * U0 * U2**2 + 5 / 108 * U2**3 + U1**2 * U2 / 6
    return np.stack([n0, n1, n2], axis=-1) / S3PI


def _memory_shift(b, z):
    """``(0, b_1 z_1, b_2 z_2)`` from memory values ``z = (z_1, z_2)``."""
    z = np.asarray(z)
    shift = np.zeros(z.shape[:-1] + (3,), dtype=z.dtype)
    shift[..., 1] = b[1] * z[..., 0]
    shift[..., 2] = b[2] * z[..., 1]
    return shift


def transform_U_to_u(U, z, spectrum: NoiseSpectrum) -> np.ndarray:
    """Map normal-form coordinates and memories to modal amplitudes."""
    U = np.asarray(U)
    return U + _cubic_shift(U) + _memory_shift(_three_mode(spectrum), z)


@dataclass(frozen=True)
class NormalFormState:
    U: np.ndarray
    memory: np.ndarray = field(default_factory=lambda: np.zeros(2))


def transform_u_to_U(u, memory, spectrum: NoiseSpectrum, max_iter: int = 50, tol: float = 1e-15) -> NormalFormState:
    """Invert the near-identity transform by fixed-point iteration from ``U = u``."""
    u = np.asarray(u, dtype=float)
    memory = np.asarray(memory, dtype=float)
    base = u - _memory_shift(_three_mode(spectrum), memory)
    U = base.copy()
    for _ in range(max_iter):
        with np.errstate(over="ignore", invalid="ignore"):
            U_next = base - _cubic_shift(U)
        if not np.all(np.isfinite(U_next)):
            break
        if np.max(np.abs(U_next - U)) <= tol * max(1.0, np.max(np.abs(U_next))):
            return NormalFormState(U_next, memory)
        U = U_next
    raise AmplitudeTooLarge(f"normal-form inversion did not converge in {max_iter} iterations")


def transformed_rhs(U, b, memory, dw):
    """Drift and noise parts of the transformed three-mode system.

    ``dw`` holds the mode increments ``(dw_0, dw_1, dw_2)`` (or instantaneous
    noise rates), ``memory`` the OU values ``(z_1, z_2)`` that multiply them
    in the noise-memory products.  Returns ``(drift_per_time, noise)`` with
    ``noise`` linear in ``dw``.
    """
    U0, U1, U2 = U[..., 0], U[..., 1], U[..., 2]
    b0, b1, b2 = b
    z1, z2 = memory[..., 0], memory[..., 1]
    w0, w1, w2 = dw[..., 0], dw[..., 1], dw[..., 2]
    drift = np.stack(
        [
            -(U0**3) / (2 * S3PI),
            -0.5 * U1 - U0**2 * U1 / (2 * S3PI),
            -U2 - U0**2 * U2 / (2 * S3PI),
        ],
        axis=-1,
    )
    q1 = b1**2 * z1 * w1
    q2 = b2**2 * z2 * w2
    q0 = b0 * b2 * z2 * w0
    noise = np.stack(
        [
            b0 * w0 + U0**2 * b2 * w2 / (SQRT2 * S3PI) + U0 * (-q1 - 0.5 * q2 + SQRT2 * q0) / S3PI,
            U1 * (-q1 - q2 / 6) / S3PI,
            b2 * w2 * (-(U1**2) / 6 + SQRT2 / 3 * U0 * U1) / S3PI + U2 * (-q1 / 3 - 5 * q2 / 18 + q0 / 3) / S3PI,
        ],
        axis=-1,
    )
    return drift, noise


@dataclass
class TransformedPaths:
    tau: np.ndarray
    U: np.ndarray
    memory: np.ndarray


def simulate_transformed(
    U0,
    spectrum: NoiseSpectrum,
    n_steps: int,
    dt: float,
    seed: int | None = None,
    *,
    n_paths: int = 1,
    increments=None,
    memory: str = "left",
    record_every: int = 1,
    path_offset: int = 0,
) -> TransformedPaths:
    """Heun integration of the transformed three-mode system.

    The memories advance by the exact OU update on the same increments.
    ``memory="left"`` uses ``z(tau_n)`` as the coefficient of the
    noise-memory products; ``"midpoint"`` uses ``(z_n + z_{n+1})/2``.
    """
    if memory not in ("left", "midpoint"):
        raise ValueError("memory must be 'left' or 'midpoint'")
    b = _three_mode(spectrum)
    spec3 = NoiseSpectrum(tuple(b))
    if increments is None:
        increments = spectral_increments(spec3, n_paths, n_steps, dt, seed, path_offset)
    increments = np.asarray(increments, dtype=float)
    n_paths = increments.shape[0]
    U = np.broadcast_to(np.asarray(U0, dtype=float), (n_paths, 3)).copy()
    z = np.zeros((n_paths, 2))
    decay, scale = ou_factors(np.array(MEMORY_RATES), dt)

    n_rec = n_steps // record_every + 1
    U_out = np.empty((n_paths, n_rec, 3))
    z_out = np.empty((n_paths, n_rec, 2))
    U_out[:, 0], z_out[:, 0] = U, z
    for step in range(n_steps):
        dw = increments[:, :, step]
        z_next = decay * z + scale * dw[:, 1:3]
        zc = z if memory == "left" else 0.5 * (z + z_next)

        def incr(x):
            f, g = transformed_rhs(x, b, zc, dw)
            return f * dt + g

        U = heun_step(U, incr)
        z = z_next
        if (step + 1) % record_every == 0:
            check_finite(U, step + 1)
            U_out[:, (step + 1) // record_every] = U
            z_out[:, (step + 1) // record_every] = z
    return TransformedPaths(dt * record_every * np.arange(n_rec), U_out, z_out)


def slow_drift_exponent(spectrum: NoiseSpectrum) -> float:
    """Noise-induced decay exponent ``alpha`` of the slow amplitude."""
    b = spectrum.array
    if b.size > 9:
        raise ValueError("slow model supports b_0..b_8")
    b2 = np.zeros(9)
    b2[: b.size] = b**2
    return float(np.dot(DRIFT_WEIGHTS, b2[1:]) / S3PI)


@dataclass(frozen=True)
class SlowModel:
    spectrum: NoiseSpectrum
    drift_weights: tuple = DRIFT_WEIGHTS
    vol_weights: tuple = VOL_WEIGHTS

    def __post_init__(self):
        if self.spectrum.n_modes > 9:
            raise ValueError("slow model supports b_0..b_8")

    @property
    def alpha(self) -> float:
        return slow_drift_exponent(self.spectrum)

    @property
    def padded(self) -> np.ndarray:
        return self.spectrum.padded(9).array

    def volatility(self) -> np.ndarray:
        """Per-mode coefficients ``c_k`` of ``a^2 c_k dw_k`` (divided by s)."""
        c = np.zeros(9)
        b = self.padded
        for k, v in zip(VOL_MODES, VOL_WEIGHTS):
            c[k] = v * b[k] / S3PI
        return c


@dataclass
class AmplitudePaths:
    tau: np.ndarray
    a: np.ndarray


def cubic_decay(a0, tau):
    """Zero-noise amplitude ``a0 / sqrt(1 + a0^2 tau / s)``."""
    a0 = np.asarray(a0, dtype=float)
    return a0 / np.sqrt(1.0 + a0**2 * np.asarray(tau) / S3PI)


def simulate_slow(
    a0,
    spectrum: NoiseSpectrum,
    n_steps: int,
    dt: float,
    seed: int | None = None,
    *,
    n_paths: int = 1,
    increments=None,
    record_every: int = 1,
    path_offset: int = 0,
) -> AmplitudePaths:
    """Heun (Stratonovich) paths of the nine-mode slow amplitude model.

    ``increments`` (if given) has shape ``(paths, n_modes, steps)`` with the
    spectrum's mode layout, so a full modal run can share its noise.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    model = SlowModel(spectrum)
    if increments is None:
        increments = spectral_increments(spectrum, n_paths, n_steps, dt, seed, path_offset)
    increments = np.asarray(increments, dtype=float)
    n_paths = increments.shape[0]
    n = spectrum.n_modes
    b = spectrum.array
    vol = model.volatility()[:n]
    alpha = model.alpha
    a = np.broadcast_to(np.asarray(a0, dtype=float), (n_paths,)).copy()

    n_rec = n_steps // record_every + 1
    out = np.empty((n_paths, n_rec))
    out[:, 0] = a
    for step in range(n_steps):
        dw = increments[:, :, step]
        additive = b[0] * dw[:, 0]
        mult = dw @ vol

        def incr(x):
            return (-0.5 * x**3 / S3PI - alpha * x) * dt + additive + x**2 * mult

        a = heun_step(a, incr)
        if (step + 1) % record_every == 0:
            check_finite(a, step + 1)
            out[:, (step + 1) // record_every] = a
    return AmplitudePaths(dt * record_every * np.arange(n_rec), out)


def slow_manifold_shape(a, memory, spectrum: NoiseSpectrum) -> np.ndarray:
    """Modal amplitudes ``u_0..u_8`` on the nine-mode stochastic slow manifold.

    ``memory[..., k]`` holds ``z_k``, the OU convolution with decay ``k/2``
    of mode ``k`` (index 0 unused).  Diagnostic reconstruction only.
    """
    a = np.asarray(a, dtype=float)
    z = np.asarray(memory, dtype=float)
    b = spectrum.padded(9).array
    bz = b * z
    u = bz.copy()
    u[..., 0] = a + a**2 / S3PI * (
        -bz[..., 2] / SQRT2
        + bz[..., 4] / (2 * math.sqrt(6.0))
        - math.sqrt(5.0) / 27 * bz[..., 6]
        + math.sqrt(70.0) / 216 * bz[..., 8]
    )
    u[..., 2] += a**3 / (3 * math.sqrt(6 * math.pi))
    u[..., 4] -= a**3 / (18 * math.sqrt(2 * math.pi))
    u[..., 6] += math.sqrt(5.0) * a**3 / (81 * S3PI)
    u[..., 8] -= math.sqrt(70.0) * a**3 / (648 * S3PI)
    return u


# Reference point for the residual check; any O(1) values work.
RESIDUAL_U = (0.9, -0.7, 0.6)
RESIDUAL_B = (0.8, 0.7, -0.9)
RESIDUAL_Z = (0.5, -0.8)
RESIDUAL_WDOT = (0.6, -1.1, 0.9)


@lru_cache(maxsize=1)
def _three_mode_tensor():
    return cubic_projection_tensor(BasisSpec(2))


def _projected_drift(u):
    """Deterministic part of the three-mode projected system."""
    return -0.5 * np.arange(3) * u - _three_mode_tensor().apply(u)


def residual_order_check(
    eps: float,
    *,
    noise_exponent: int = 2,
    transform: str = "full",
    U_ref=RESIDUAL_U,
    b_ref=RESIDUAL_B,
    z_ref=RESIDUAL_Z,
    wdot_ref=RESIDUAL_WDOT,
) -> float:
    """Max mismatch when the transform and transformed SDEs are substituted
    into the projected system, at amplitudes ``U = eps U_ref`` and noise
    ``b = eps**noise_exponent b_ref`` with frozen memories and noise values.

    The time derivative of ``u = U + N(U) + b z`` is ``J_N(U) U' + b z'``
    with ``z' = -beta z + wdot``; the Jacobian-vector product is taken by
    complex step, which is exact to rounding for the polynomial ``N``.
    ``transform="linear"`` drops ``N`` (control case).
    """
    if transform not in ("full", "linear"):
        raise ValueError("transform must be 'full' or 'linear'")
    if eps == 0:
        return 0.0
    U = eps * np.asarray(U_ref, dtype=float)
    b = eps**noise_exponent * np.asarray(b_ref, dtype=float)
    z = np.asarray(z_ref, dtype=float)
    wdot = np.asarray(wdot_ref, dtype=float)

    drift, noise = transformed_rhs(U, b, z, wdot)
    Udot = drift + noise
    zdot = -np.asarray(MEMORY_RATES) * z + wdot[1:]
    if transform == "full":
        h = 1e-30
        dN = np.imag(_cubic_shift(U + 1j * h * Udot)) / h
        u = U + _cubic_shift(U) + _memory_shift(b, z)
    else:
        dN = np.zeros(3)
        u = U + _memory_shift(b, z)
    udot = Udot + dN + _memory_shift(b, zdot)
    target = _projected_drift(u) + b * wdot
    return float(np.max(np.abs(udot - target)))


def residual_slope(eps_values=(0.05, 0.1, 0.2), **kwargs) -> float:
    """Least-squares slope of ``log r`` against ``log eps``."""
    eps = np.asarray(eps_values, dtype=float)
    r = np.array([residual_order_check(e, **kwargs) for e in eps])
    return float(np.polyfit(np.log(eps), np.log(r), 1)[0])
