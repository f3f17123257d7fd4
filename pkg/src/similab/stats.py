"""Rate fitting with bootstrap intervals and streaming ensemble moments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FitError(ValueError):
    """The series cannot be fitted (e.g. non-positive values in the window)."""


@dataclass(frozen=True)
class RateFit:
    rate: float
    ci_low: float
    ci_high: float
    n_points: int

    @property
    def ci(self) -> tuple[float, float]:
        return (self.ci_low, self.ci_high)


def fit_rate(tau, series, window=None, n_boot: int = 200, seed: int = 0, level: float = 0.95) -> RateFit:
    """Least-squares slope of ``log(series)`` against ``tau``.

    ``series = exp(-tau/2)`` gives ``rate = -0.5``.  The confidence interval
    is a percentile bootstrap over resampled ``(tau, log series)`` pairs.
    """
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(series, dtype=float)
    sel = np.ones(tau.shape, dtype=bool)
    if window is not None:
        sel = (tau >= window[0]) & (tau <= window[1])
    tau, y = tau[sel], y[sel]
    if tau.size < 3:
        raise FitError(f"need at least 3 points in the window, got {tau.size}")
    if np.any(~(y > 0)):
        bad = int(np.sum(~(y > 0)))
        raise FitError(f"{bad} non-positive or non-finite values in the fit window")
    logy = np.log(y)
    rate = float(np.polyfit(tau, logy, 1)[0])

    rng = np.random.default_rng(seed)
    idx = rng.integers(0, tau.size, size=(n_boot, tau.size))
    tb, yb = tau[idx], logy[idx]
    tc = tb - tb.mean(axis=1, keepdims=True)
    den = np.sum(tc * tc, axis=1)
    ok = den > 0
    slopes = np.sum(tc * (yb - yb.mean(axis=1, keepdims=True)), axis=1)[ok] / den[ok]
    alpha = 0.5 * (1.0 - level)
    lo, hi = np.quantile(slopes, [alpha, 1.0 - alpha])
    return RateFit(rate, float(lo), float(hi), int(tau.size))


class RunningMoments:
    """Streaming mean and variance over the leading axis of batches.

    Batches merge with the Chan et al. parallel update, so combining batch
    results in a fixed order is deterministic regardless of how they were
    computed.
    """

    def __init__(self):
        self.count = 0
        self._mean = None
        self._m2 = None

    def update(self, batch) -> "RunningMoments":
        batch = np.asarray(batch, dtype=float)
        n = batch.shape[0]
        if n == 0:
            return self
        mean = batch.mean(axis=0)
        m2 = np.sum((batch - mean) ** 2, axis=0)
        return self._merge(n, mean, m2)

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.count == 0:
            return self
        return self._merge(other.count, other._mean, other._m2)

    def _merge(self, n, mean, m2):
        if self.count == 0:
            self.count, self._mean, self._m2 = n, mean.copy(), m2.copy()
            return self
        total = self.count + n
        delta = mean - self._mean
        self._mean = self._mean + delta * (n / total)
        self._m2 = self._m2 + m2 + delta**2 * (self.count * n / total)
        self.count = total
        return self

    @property
    def mean(self) -> np.ndarray:
        return self._mean

    @property
    def variance(self) -> np.ndarray:
        """Unbiased sample variance."""
        if self.count < 2:
            return np.full_like(self._mean, np.nan)
        return self._m2 / (self.count - 1)


def proportion_ci(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return (float("nan"), float("nan"))
    p = successes / trials
    den = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return (float(centre - half), float(centre + half))
