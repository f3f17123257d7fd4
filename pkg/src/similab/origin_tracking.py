"""Moving spatial origin ``X(T)`` and fluctuating real time ``t(T)`` that
remove the noise forcing of the first two fast modes of linear diffusion.

The linearised modal system (coefficients of the Hermite functions
``phi_k = He_k(xi/sqrt2) G``, for which the ladder relations are exact) is

    du_0 = b_0 dw_0
    du_1 = [-u_1/2 - X' sqrt(T) u_0 / sqrt2] dtau + b_1 dw_1
    du_2 = [-u_2 - X' sqrt(T) u_1 / sqrt2 + (t' - 1) u_0 / 2] dtau + b_2 dw_2

with ``tau = log T``, ``X' = dX/dT`` and ``t' = dt/dT``.  Choosing
``dX = (sqrt2 b_1 / a) sqrt(T) dw_1`` and ``d(t - T) = -(2 b_2 / a) T dw_2``
(increments in ``tau``) cancels the forcing of ``u_1`` and ``u_2`` when
``u_0 = a`` and ``u_1 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .noise import NoiseSpectrum, sample_wiener
from .sde import check_finite, heun_step

SQRT2 = math.sqrt(2.0)


class DegenerateAmplitude(ValueError):
    """Compensation divides by the slow amplitude, which is zero."""


def _check_amplitude(a):
    if a == 0:
        raise DegenerateAmplitude("slow amplitude a must be non-zero")


def _grid_normals(T_grid, n_paths, seed, mode, path_offset):
    T = np.asarray(T_grid, dtype=float)
    if T.ndim != 1 or T.size < 2 or np.any(np.diff(T) <= 0):
        raise ValueError("T grid must be strictly increasing")
    ens = sample_wiener(n_paths, T.size - 1, 1.0, seed, modes=(mode,), path_offset=path_offset)
    return T, ens.increments[:, 0, :]


@dataclass
class OriginPath:
    T: np.ndarray
    X: np.ndarray
    dw: np.ndarray
    a: float
    b1: float


def build_origin_path(a, b1, T_grid, seed, *, n_paths=1, X0=0.0, path_offset=0) -> OriginPath:
    """``X(T) = X0 + (sqrt2 b_1 / a) w_1(T)`` on the given pseudo-time grid."""
    _check_amplitude(a)
    T, z = _grid_normals(T_grid, n_paths, seed, 1, path_offset)
    dw = z * np.sqrt(np.diff(T))
    X = np.empty((n_paths, T.size))
    X[:, 0] = X0
    X[:, 1:] = X0 + (SQRT2 * b1 / a) * np.cumsum(dw, axis=1)
    return OriginPath(T=T, X=X, dw=dw, a=a, b1=b1)


@dataclass
class PseudoTimePath:
    T: np.ndarray
    t: np.ndarray
    dw: np.ndarray
    t0: float
    a: float
    b2: float

    @property
    def integral(self) -> np.ndarray:
        """``int_0^T sqrt(T_1) dw_2(T_1)`` on the grid."""
        scale = 2.0 * self.b2 / self.a
        if scale == 0:
            return np.zeros_like(self.t)
        return (self.t - self.t0 - self.T) / scale

    @property
    def reversals(self) -> np.ndarray:
        """Number of grid intervals with decreasing real time, per path."""
        return np.sum(np.diff(self.t, axis=-1) < 0, axis=-1)


def build_pseudotime_path(t0, a, b2, T_grid, seed, *, n_paths=1, path_offset=0) -> PseudoTimePath:
    """``t(T) = t0 + T + (2 b_2 / a) sum sqrt(T_mid) dw_2`` with ``T_grid[0] = 0``.

    The integrand is deterministic, so midpoint sampling gives variance
    ``sum T_mid dT = T^2 / 2`` exactly on any grid starting at 0.
    """
    _check_amplitude(a)
    T, z = _grid_normals(T_grid, n_paths, seed, 2, path_offset)
    if T[0] != 0:
        raise ValueError("pseudo-time grid must start at 0")
    dT = np.diff(T)
    dw = z * np.sqrt(dT)
    mid = 0.5 * (T[1:] + T[:-1])
    t = np.empty((n_paths, T.size))
    t[:, 0] = t0
    t[:, 1:] = t0 + T[1:] + (2.0 * b2 / a) * np.cumsum(np.sqrt(mid) * dw, axis=1)
    return PseudoTimePath(T=T, t=t, dw=dw, t0=t0, a=a, b2=b2)


@dataclass
class CompensatedPaths:
    """``u[path, sample, k]`` for k = 0, 1, 2 with frame paths ``X`` and ``t``."""

    tau: np.ndarray
    u: np.ndarray
    X: np.ndarray
    t: np.ndarray


def simulate_compensated_modes(
    a,
    spectrum: NoiseSpectrum,
    n_steps: int,
    dt: float,
    seed: int,
    *,
    compensation: bool = True,
    u_init=(0.0, 0.0),
    n_paths: int = 1,
    X0: float = 0.0,
    t_init: float = 1.0,
    record_every: int = 1,
    path_offset: int = 0,
) -> CompensatedPaths:
    """Heun paths of ``(u_0, u_1, u_2)`` with the frame either compensating
    or frozen (``X' = 0``, ``t' = 1``).

    Log-time starts at 0 (``T = 1``).  Frame increments are built from the
    same ``dw_1``, ``dw_2`` that force the modes, so the cancellation is
    exact per step.  The ``t``-compensation assumes ``u_1 = 0`` and so
    requires ``u_init[0] == 0``.
    """
    _check_amplitude(a)
    b = spectrum.padded(3).array
    if b[0] != 0:
        raise ValueError("origin compensation is formulated for b_0 = 0")
    if compensation and u_init[0] != 0:
        raise ValueError("t-compensation requires u_1(0) = 0")
    ens = sample_wiener(n_paths, n_steps, dt, seed, modes=(1, 2), path_offset=path_offset)
    dw1, dw2 = ens.increments[:, 0], ens.increments[:, 1]

    u = np.zeros((n_paths, 3))
    u[:, 0] = a
    u[:, 1:] = np.asarray(u_init, dtype=float)
    X = np.full(n_paths, float(X0))
    t = np.full(n_paths, float(t_init))
    n_rec = n_steps // record_every + 1
    u_out = np.empty((n_paths, n_rec, 3))
    X_out = np.empty((n_paths, n_rec))
    t_out = np.empty((n_paths, n_rec))
    u_out[:, 0], X_out[:, 0], t_out[:, 0] = u, X, t
    lam = np.array([0.0, 0.5, 1.0])
    for step in range(n_steps):
        # the frozen frame never needs T, and long frozen runs would overflow it
        T = math.exp(step * dt) if compensation else 1.0
        noise = np.zeros((n_paths, 3))
        noise[:, 1] = b[1] * dw1[:, step]
        noise[:, 2] = b[2] * dw2[:, step]
        if compensation:
            dX = (SQRT2 * b[1] / a) * math.sqrt(T) * dw1[:, step]
            dlag = -(2.0 * b[2] / a) * T * dw2[:, step]
        else:
            dX = np.zeros(n_paths)
            dlag = np.zeros(n_paths)
        # X' sqrt(T) dtau = dX / sqrt(T);  (t' - 1) dtau = d(t - T) / T
        shift = dX / math.sqrt(T)
        stretch = dlag / T

        def incr(x):
            out = -lam * x * dt + noise
            out[:, 1] -= shift * x[:, 0] / SQRT2
            out[:, 2] += -shift * x[:, 1] / SQRT2 + 0.5 * stretch * x[:, 0]
            return out

        u = heun_step(u, incr)
        X = X + dX
        if compensation:
            t = t + T * math.expm1(dt) + dlag
        if (step + 1) % record_every == 0:
            check_finite(u, step + 1)
            k = (step + 1) // record_every
            u_out[:, k], X_out[:, k], t_out[:, k] = u, X, t
    tau = dt * record_every * np.arange(n_rec)
    if not compensation:
        with np.errstate(over="ignore"):
            t_out[:] = t_init - 1.0 + np.exp(tau)
    return CompensatedPaths(tau, u_out, X_out, t_out)


def fluctuation_exponent(path: PseudoTimePath, T_min: float, T_max: float) -> float:
    """Log-log slope of the sample std of ``t - t0 - T`` against ``T``."""
    sel = (path.T >= T_min) & (path.T <= T_max)
    sd = np.std(path.t[:, sel] - path.t0 - path.T[sel], axis=0, ddof=1)
    return float(np.polyfit(np.log(path.T[sel]), np.log(sd), 1)[0])
