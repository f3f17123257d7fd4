"""Transforms between physical ``(t, x)`` and similarity ``(tau, xi)`` variables.

Static frame:  ``tau = log t``, ``xi = x / sqrt(t)``, ``u = sqrt(t) * uu``.
Moving frame:  ``tau = log T``, ``xi = (x - X(T)) / sqrt(T)``, ``u = sqrt(T) * uu``
with real time ``t = t(T)`` carried as a sampled path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator


class FrameRangeError(ValueError):
    """Requested time lies outside the sampled frame path."""


def _check_uniform(grid: np.ndarray, name: str):
    d = np.diff(grid)
    if grid.ndim != 1 or grid.size < 2 or np.any(d <= 0):
        raise ValueError(f"{name} must be a strictly increasing 1-D grid")
    if not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
        raise ValueError(f"{name} must be uniformly spaced")


@dataclass(frozen=True)
class PhysicalField:
    t: float
    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        _check_uniform(np.asarray(self.x), "x grid")

    @property
    def mass(self) -> float:
        return float(trapezoid(self.values, self.x))


@dataclass(frozen=True)
class SimilarityField:
    tau: float
    xi: np.ndarray
    values: np.ndarray
    origin: float = 0.0
    pseudo_time: float | None = None

    def __post_init__(self):
        _check_uniform(np.asarray(self.xi), "xi grid")

    @property
    def mass(self) -> float:
        return float(trapezoid(self.values, self.xi))


def resample(grid, values, new_grid) -> np.ndarray:
    """Monotone cubic (PCHIP) resampling; zero outside the source grid."""
    grid = np.asarray(grid, dtype=float)
    new_grid = np.asarray(new_grid, dtype=float)
    # PCHIP slope weights divide by secants that can underflow in far tails
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        interp = PchipInterpolator(grid, values, axis=-1, extrapolate=False)
        out = interp(new_grid)
    return np.nan_to_num(out, nan=0.0)


def to_similarity(phys: PhysicalField, xi=None) -> SimilarityField:
    """Static similarity transform.  Without ``xi`` the grid is ``x / sqrt(t)``."""
    if phys.t <= 0:
        raise ValueError(f"similarity transform needs t > 0, got {phys.t}")
    rt = math.sqrt(phys.t)
    native = np.asarray(phys.x) / rt
    vals = rt * np.asarray(phys.values)
    if xi is None:
        return SimilarityField(math.log(phys.t), native, vals)
    return SimilarityField(math.log(phys.t), np.asarray(xi, dtype=float), resample(native, vals, xi))


def from_similarity(sim: SimilarityField, t: float, x=None) -> PhysicalField:
    """Inverse of :func:`to_similarity` at time ``t``."""
    if t <= 0:
        raise ValueError(f"similarity transform needs t > 0, got {t}")
    rt = math.sqrt(t)
    native = np.asarray(sim.xi) * rt
    vals = np.asarray(sim.values) / rt
    if x is None:
        return PhysicalField(t, native, vals)
    return PhysicalField(t, np.asarray(x, dtype=float), resample(native, vals, x))


@dataclass
class MovingFrame:
    """Origin ``X`` and real time ``t`` sampled on a pseudo-time grid ``T``."""

    T: np.ndarray
    X: np.ndarray
    t: np.ndarray
    reversals: int = field(default=0, init=False)

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        self.X = np.broadcast_to(np.asarray(self.X, dtype=float), self.T.shape).copy()
        self.t = np.asarray(self.t, dtype=float)
        if np.any(np.diff(self.T) <= 0):
            raise ValueError("pseudo-time grid must be strictly increasing")
        self.reversals = int(np.sum(np.diff(self.t) < 0))

    @classmethod
    def static(cls, T) -> "MovingFrame":
        T = np.asarray(T, dtype=float)
        return cls(T=T, X=np.zeros_like(T), t=T.copy())

    def locate(self, t: float) -> tuple[float, float, bool]:
        """Pseudo-time and origin at real time ``t`` (last passage).

        Returns ``(T, X, reversed)`` where ``reversed`` flags that the
        matched segment of ``t(T)`` is decreasing or that ``t`` is crossed
        more than once.
        """
        tt = self.t
        if t < tt.min() or t > tt.max():
            raise FrameRangeError(f"t={t} outside frame range [{tt.min()}, {tt.max()}]")
        lo, hi = tt[:-1], tt[1:]
        # half-open segments so a crossing exactly at a node is counted once
        hit = np.flatnonzero(((lo < t) & (t <= hi)) | ((hi <= t) & (t < lo)))
        if hit.size == 0:
            hit = np.flatnonzero((lo == t) | (hi == t))[-1:]
        i = int(hit[-1])
        seg = hi[i] - lo[i]
        w = 0.0 if seg == 0 else (t - lo[i]) / seg
        T = self.T[i] + w * (self.T[i + 1] - self.T[i])
        X = self.X[i] + w * (self.X[i + 1] - self.X[i])
        return float(T), float(X), bool(seg < 0 or hit.size > 1)


def to_similarity_moving(phys: PhysicalField, frame: MovingFrame, xi=None) -> tuple[SimilarityField, bool]:
    """Moving-origin, pseudo-time similarity transform.

    Returns the field and a frame-reversal diagnostic flag for the lookup.
    """
    T, X, reversed_ = frame.locate(phys.t)
    if T <= 0:
        raise FrameRangeError(f"pseudo-time T={T} is not positive")
    rT = math.sqrt(T)
    native = (np.asarray(phys.x) - X) / rT
    vals = rT * np.asarray(phys.values)
    if xi is not None:
        vals = resample(native, vals, xi)
        native = np.asarray(xi, dtype=float)
    return SimilarityField(math.log(T), native, vals, origin=X, pseudo_time=T), reversed_


def gaussian_release(x, t: float, mass: float = 1.0, center: float = 0.0) -> np.ndarray:
    """Point-release diffusion profile ``a / (2 sqrt(pi t)) exp(-(x-c)^2 / (4t))``."""
    x = np.asarray(x, dtype=float)
    return mass / (2.0 * math.sqrt(math.pi * t)) * np.exp(-((x - center) ** 2) / (4.0 * t))
