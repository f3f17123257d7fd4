"""Seeded Wiener increments, exact Ornstein-Uhlenbeck convolutions and
spectral Q-Wiener space-time noise.

Every Gaussian draw is a pure function of ``(seed, path, mode, step)``: each
``(path, mode)`` pair owns a Philox-4x64 stream keyed by ``(seed, path, mode)``
whose counter indexes the step, and uniforms are mapped to normals by the
inverse CDF.  Ensembles can therefore be generated in any batch order, or
resumed at any step, and still reproduce the same numbers bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtri

from .hermite import eigenfunctions

_MODE_BITS = 24
_TWO_M53 = 2.0**-53


@dataclass(frozen=True)
class NoiseSpectrum:
    """Mode amplitudes ``b_0..b_K`` of the noise ``sum_k b_k dw_k e_k``."""

    b: tuple[float, ...]
    conservative: bool = False

    def __post_init__(self):
        b = tuple(float(x) for x in np.atleast_1d(np.asarray(self.b, dtype=float)))
        object.__setattr__(self, "b", b)
        if not b:
            raise ValueError("spectrum needs at least one mode")
        if not all(math.isfinite(x) for x in b):
            raise ValueError("spectrum entries must be finite")
        if self.conservative and b[0] != 0.0:
            raise ValueError("conservative noise requires b_0 = 0")

    @classmethod
    def from_modes(cls, n_modes: int, conservative: bool = False, **amps) -> "NoiseSpectrum":
        """``from_modes(3, b1=0.3)`` style constructor."""
        b = np.zeros(n_modes)
        for key, val in amps.items():
            b[int(key.lstrip("b"))] = val
        return cls(tuple(b), conservative=conservative)

    @property
    def n_modes(self) -> int:
        return len(self.b)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.b)

    @property
    def active(self) -> np.ndarray:
        """Indices of modes with non-zero amplitude."""
        return np.flatnonzero(self.array)

    @property
    def trace(self) -> float:
        return float(np.sum(self.array**2))

    def padded(self, n_modes: int) -> "NoiseSpectrum":
        if n_modes < self.n_modes and np.any(self.array[n_modes:]):
            raise ValueError("cannot truncate non-zero noise modes")
        b = np.zeros(n_modes)
        m = min(n_modes, self.n_modes)
        b[:m] = self.array[:m]
        return NoiseSpectrum(tuple(b), self.conservative)


def _stream_key(seed: int, path: int, mode: int) -> list[int]:
    if not 0 <= mode < 2**_MODE_BITS:
        raise ValueError("mode index out of range for stream key")
    return [int(seed) % 2**64, (int(path) << _MODE_BITS) | int(mode)]


def standard_normals(seed: int, path: int, mode: int, n_steps: int, step_offset: int = 0) -> np.ndarray:
    """``N(0,1)`` draws for steps ``step_offset .. step_offset+n_steps-1``."""
    # Philox-4x64 yields four words per counter value.
    block, skip = divmod(step_offset, 4)
    bitgen = np.random.Philox(counter=[block, 0, 0, 0], key=_stream_key(seed, path, mode))
    raw = bitgen.random_raw(n_steps + skip)[skip:]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
    return ndtri(u)


@dataclass
class WienerEnsemble:
    """Gaussian increments ``dw[path, mode, step] ~ N(0, dt)``."""

    n_paths: int
    n_steps: int
    dt: float
    seed: int
    increments: np.ndarray = field(repr=False)
    modes: tuple[int, ...] = (0,)
    path_offset: int = 0

    def paths(self) -> np.ndarray:
        """Cumulative sums with ``w = 0`` at step 0; shape ``(paths, modes, steps+1)``."""
        w = np.zeros(self.increments.shape[:-1] + (self.n_steps + 1,))
        np.cumsum(self.increments, axis=-1, out=w[..., 1:])
        return w


def sample_wiener(
    n_paths: int,
    n_steps: int,
    dt: float,
    seed: int,
    modes=(0,),
    path_offset: int = 0,
    step_offset: int = 0,
) -> WienerEnsemble:
    """Draw increments for global path indices ``path_offset..+n_paths``.

    ``modes`` lists the (global) mode indices to draw; inactive modes can be
    skipped without changing the streams of the others.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_paths < 1 or n_steps < 1:
        raise ValueError("n_paths and n_steps must be >= 1")
    modes = tuple(int(m) for m in np.atleast_1d(modes))
    sq = math.sqrt(dt)
    inc = np.empty((n_paths, len(modes), n_steps))
    for p in range(n_paths):
        for j, m in enumerate(modes):
            inc[p, j] = sq * standard_normals(seed, path_offset + p, m, n_steps, step_offset)
    return WienerEnsemble(n_paths, n_steps, dt, seed, inc, modes, path_offset)


def mode_increments(spectrum_modes: int, ensemble: WienerEnsemble) -> np.ndarray:
    """Scatter an ensemble's drawn modes into a dense ``(paths, n_modes, steps)`` array."""
    dense = np.zeros((ensemble.n_paths, spectrum_modes, ensemble.n_steps))
    for j, m in enumerate(ensemble.modes):
        dense[:, m] = ensemble.increments[:, j]
    return dense


def spectral_increments(
    spectrum: NoiseSpectrum, n_paths: int, n_steps: int, dt: float, seed: int, path_offset: int = 0
) -> np.ndarray:
    """Dense per-mode increments for the active modes of ``spectrum``."""
    active = spectrum.active
    if active.size == 0:
        return np.zeros((n_paths, spectrum.n_modes, n_steps))
    ens = sample_wiener(n_paths, n_steps, dt, seed, modes=active, path_offset=path_offset)
    return mode_increments(spectrum.n_modes, ens)


@dataclass(frozen=True)
class OuPath:
    beta: float
    dt: float
    values: np.ndarray = field(repr=False)


def ou_factors(beta, dt: float):
    """Decay ``exp(-beta dt)`` and the ratio of the exact OU transition std to ``sqrt(dt)``."""
    beta = np.asarray(beta, dtype=float)
    decay = np.exp(-beta * dt)
    x = 2.0 * beta * dt
    safe = np.where(x > 0, x, 1.0)
    # (1 - exp(-x)) / x, with the beta -> 0 limit 1
    ratio = np.where(x > 0, -np.expm1(-safe) / safe, 1.0)
    return decay, np.sqrt(ratio)


def ou_convolve(dw, beta: float, dt: float, z0=0.0) -> OuPath:
    """Exact-transition OU path ``dz = -beta z dtau + dw`` driven by ``dw``.

    ``z_{n+1} = exp(-beta dt) z_n + s dw_n`` with ``s^2 dt`` the exact
    transition variance ``(1 - exp(-2 beta dt)) / (2 beta)``.  The step axis
    is the last axis of ``dw``; the result includes ``z_0``.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    dw = np.asarray(dw, dtype=float)
    decay, scale = ou_factors(beta, dt)
    z = np.empty(dw.shape[:-1] + (dw.shape[-1] + 1,))
    z0 = np.broadcast_to(np.asarray(z0, dtype=float), dw.shape[:-1])
    z[..., 0] = z0
    zi = (decay * z0)[..., None]
    z[..., 1:], _ = lfilter([scale], [1.0, -float(decay)], dw, axis=-1, zi=zi)
    return OuPath(beta=beta, dt=dt, values=z)


def ou_update(z, dw, beta, dt: float):
    """One exact OU transition; ``beta`` broadcasts against ``z``."""
    decay, scale = ou_factors(beta, dt)
    return decay * z + scale * dw


def qwiener_increment(spectrum: NoiseSpectrum, dw, basis_values) -> np.ndarray:
    """``Delta W(xi) = sum_k b_k dw_k e_k(xi)``.

    ``basis_values`` is ``e_k`` tabulated on the evaluation grid, shape
    ``(n_modes, n_xi)`` (see :func:`noise_basis`).  Leading axes of ``dw``
    (paths) are carried through.
    """
    dw = np.asarray(dw, dtype=float)
    n = spectrum.n_modes
    if dw.shape[-1] != n or basis_values.shape[0] != n:
        raise ValueError(
            f"mode count mismatch: spectrum {n}, increments {dw.shape[-1]}, basis {basis_values.shape[0]}"
        )
    return (dw * spectrum.array) @ basis_values


def noise_basis(spectrum: NoiseSpectrum, xi) -> np.ndarray:
    """Eigenfunctions tabulated on ``xi`` for every mode of ``spectrum``."""
    return eigenfunctions(spectrum.n_modes - 1, xi)


__all__ = [
    "NoiseSpectrum",
    "OuPath",
    "WienerEnsemble",
    "noise_basis",
    "ou_convolve",
    "ou_update",
    "qwiener_increment",
    "sample_wiener",
    "spectral_increments",
    "standard_normals",
]
