"""Two-pipe stochastic advection-exchange model and its ``(T, eta)``
pseudo-time frame.

Pipes carry concentrations advected by equal and opposite white-noise
velocities and exchange at rate 1/2 (Stratonovich)::

    u1_t = (u2 - u1)/2 - wdot u1_x,     u2_t = (u1 - u2)/2 + wdot u2_x

The frame ``dT = eta o dw``, ``d eta = -eta dt + dw`` is driven by the same
``w``.  In terms of the mean ``m`` and half-difference ``d`` of the pipes,
the spatial second moment of ``m`` obeys ``d sigma^2 = 2 dT`` exactly when
``eta(0) = int x d / int m`` at the start, which gives the emergent
diffusivity 1 in pseudo-time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .frames import resample
from .hermite import BasisSpec, project_field
from .noise import sample_wiener
from .sde import IntegrationError

W_MODE = 0


@dataclass
class PipePair:
    """Concentrations on a periodic grid; leading axes are paths."""

    t: float
    x: np.ndarray
    u1: np.ndarray
    u2: np.ndarray

    @property
    def mean(self) -> np.ndarray:
        return 0.5 * (self.u1 + self.u2)

    @property
    def half_difference(self) -> np.ndarray:
        return 0.5 * (self.u1 - self.u2)

    @property
    def total_mass(self):
        return _integral(self.u1 + self.u2, self.x)


def _integral(f, x):
    # periodic grid: rectangle rule is the exact trapezoid on the circle
    return np.sum(f, axis=-1) * (x[1] - x[0])


def periodic_grid(half_width: float, n_points: int) -> np.ndarray:
    """``n_points`` nodes on ``[-L, L)``."""
    return -half_width + 2.0 * half_width * np.arange(n_points) / n_points


def _wavenumbers(x):
    n = x.size
    return 2.0 * np.pi * np.fft.rfftfreq(n, d=x[1] - x[0])


def spectral_shift(f, x, s):
    """``f(x - s)`` on the periodic grid by a Fourier phase shift.

    ``s`` is a scalar or one shift per path (leading axis of ``f``).
    """
    k = _wavenumbers(x)
    s = np.asarray(s, dtype=float)
    phase = np.exp(-1j * np.multiply.outer(s, k))
    return np.fft.irfft(np.fft.rfft(f, axis=-1) * phase, n=x.size, axis=-1)


def spectral_derivative(f, x):
    k = _wavenumbers(x)
    return np.fft.irfft(1j * k * np.fft.rfft(f, axis=-1), n=x.size, axis=-1)


def step_pipes(state: PipePair, dt: float, dw) -> PipePair:
    """Exact opposite shifts by ``+dw`` / ``-dw`` followed by exact exchange."""
    dw = np.asarray(dw, dtype=float)
    span = state.x[-1] - state.x[0] + (state.x[1] - state.x[0])
    if np.any(np.abs(dw) > 0.5 * span):
        raise IntegrationError("advective shift exceeds half the domain", -1)
    u1 = spectral_shift(state.u1, state.x, dw)
    u2 = spectral_shift(state.u2, state.x, -dw)
    m = 0.5 * (u1 + u2)
    d = 0.5 * (u1 - u2) * math.exp(-dt)
    return PipePair(state.t + dt, state.x, m + d, m - d)


@dataclass
class PseudoFrame:
    t: np.ndarray
    T: np.ndarray
    eta: np.ndarray
    dw: np.ndarray

    @property
    def flagged(self) -> np.ndarray:
        """Paths on which ``T`` reached zero or below (log-time undefined)."""
        return np.any(self.T <= 0, axis=-1)

    @property
    def reversal_fraction(self) -> np.ndarray:
        """Fraction of steps with decreasing ``T``, per path."""
        return np.mean(np.diff(self.T, axis=-1) < 0, axis=-1)


def frame_step(T, eta, dt, dw):
    """Heun (Stratonovich) step of ``dT = eta dw``, ``d eta = -eta dt + dw``."""
    eta_p = eta - eta * dt + dw
    T_new = T + 0.5 * (eta + eta_p) * dw
    eta_new = eta - 0.5 * (eta + eta_p) * dt + dw
    return T_new, eta_new


def evolve_pseudo_frame(t_grid, seed, T0=1.0, eta0=0.0, *, n_paths=1, increments=None, path_offset=0) -> PseudoFrame:
    """Integrate the frame on a uniform ``t_grid`` from ``(T0, eta0)``."""
    if T0 <= 0:
        raise ValueError("T0 must be positive")
    t = np.asarray(t_grid, dtype=float)
    dt = float(t[1] - t[0])
    if increments is None:
        increments = wiener_increments(n_paths, t.size - 1, dt, seed, path_offset)
    dw = np.asarray(increments, dtype=float)
    n_paths = dw.shape[0]
    T = np.empty((n_paths, t.size))
    eta = np.empty((n_paths, t.size))
    T[:, 0], eta[:, 0] = T0, eta0
    for n in range(t.size - 1):
        T[:, n + 1], eta[:, n + 1] = frame_step(T[:, n], eta[:, n], dt, dw[:, n])
    return PseudoFrame(t=t, T=T, eta=eta, dw=dw)


def wiener_increments(n_paths, n_steps, dt, seed, path_offset=0) -> np.ndarray:
    """The advecting noise ``dw`` shared by pipes and frame; ``(paths, steps)``."""
    ens = sample_wiener(n_paths, n_steps, dt, seed, modes=(W_MODE,), path_offset=path_offset)
    return ens.increments[:, 0, :]


def mean_diff_transform(pair: PipePair, T, xi=None):
    """Similarity mean field ``u(xi) = sqrt(T) m(xi sqrt(T))`` and raw ``d``.

    Works on a single path (1-D fields, scalar ``T``).  Without ``xi`` the
    mean is returned on its native grid ``x / sqrt(T)``.
    """
    if T <= 0:
        raise ValueError("pseudo-time must be positive")
    rT = math.sqrt(T)
    native = pair.x / rT
    u = rT * pair.mean
    if xi is not None:
        u = resample(native, u, xi)
        native = np.asarray(xi, dtype=float)
    return native, u, pair.half_difference


def slaving_deviation(pair: PipePair, T, eta):
    """``||v + u_xi||`` in ``L^2(dxi)`` with ``v = (T/eta) d``, computed on the x grid.

    Since ``u_xi = T m_x`` and ``dxi = dx / sqrt(T)`` this equals
    ``T^{3/4} / |eta| * ||d + eta m_x||_{L^2(dx)}``.  Leading axes are paths.
    """
    T = np.asarray(T, dtype=float)
    eta = np.asarray(eta, dtype=float)
    r = pair.half_difference + eta[..., None] * spectral_derivative(pair.mean, pair.x)
    norm = np.sqrt(_integral(r**2, pair.x))
    return T**0.75 / np.abs(eta) * norm


def second_moment(field, x):
    """``int x^2 f / int f`` per path."""
    return _integral(x**2 * field, x) / _integral(field, x)


def gaussian_release(x, variance: float, mass: float = 1.0, center: float = 0.0) -> np.ndarray:
    return mass * np.exp(-((x - center) ** 2) / (2 * variance)) / math.sqrt(2 * math.pi * variance)


@dataclass
class MixingRun:
    """Sampled output of :func:`run_mixing` (samples on ``t``)."""

    t: np.ndarray
    T: np.ndarray
    eta: np.ndarray
    sigma2: np.ndarray
    mass: np.ndarray
    slaving: np.ndarray
    hermite_ratio: np.ndarray
    record: np.ndarray
    flagged: np.ndarray
    reversal_fraction: np.ndarray


def run_mixing(
    n_paths: int,
    seed: int,
    *,
    half_width: float = 60.0,
    n_points: int = 512,
    dt: float = 0.05,
    t_end: float = 50.0,
    release_variance: float = 2.0,
    T0: float = 1.0,
    eta0: float = 0.0,
    sample_every: int = 2,
    hermite_modes: int = 4,
    path_offset: int = 0,
    initial: str = "pipe1",
) -> MixingRun:
    """Release in pipe 1 (or both pipes, ``initial="both"``), run pipes and frame
    together and collect statistics at every ``sample_every`` step.

    Hermite ratios ``|u_k| / |u_0|`` (k = 1..hermite_modes) are only filled
    at record times (``T`` above its running maximum) of unflagged paths.
    """
    x = periodic_grid(half_width, n_points)
    n_steps = int(round(t_end / dt))
    dw = wiener_increments(n_paths, n_steps, dt, seed, path_offset)
    g = gaussian_release(x, release_variance)
    if initial == "pipe1":
        u1, u2 = 2.0 * g, np.zeros_like(g)
    elif initial == "both":
        u1, u2 = g.copy(), g.copy()
    else:
        raise ValueError("initial must be 'pipe1' or 'both'")
    pair = PipePair(0.0, x, np.tile(u1, (n_paths, 1)), np.tile(u2, (n_paths, 1)))
    T = np.full(n_paths, float(T0))
    eta = np.full(n_paths, float(eta0))
    basis = BasisSpec(max(hermite_modes, 1))

    n_samp = n_steps // sample_every + 1
    out_t = np.empty(n_samp)
    out_T = np.empty((n_paths, n_samp))
    out_eta = np.empty((n_paths, n_samp))
    sig = np.empty((n_paths, n_samp))
    mass = np.empty((n_paths, n_samp))
    slav = np.empty((n_paths, n_samp))
    herm = np.full((n_paths, n_samp, hermite_modes), np.nan)
    record = np.zeros((n_paths, n_samp), dtype=bool)
    running_max = T.copy()
    bad = np.zeros(n_paths, dtype=bool)
    reversals = np.zeros(n_paths)

    def sample(j):
        out_t[j] = pair.t
        out_T[:, j], out_eta[:, j] = T, eta
        m = pair.mean
        sig[:, j] = second_moment(m, x)
        mass[:, j] = pair.total_mass
        with np.errstate(divide="ignore", invalid="ignore"):
            slav[:, j] = slaving_deviation(pair, np.maximum(T, 1e-300), eta)
        rec = (T >= running_max) & ~bad
        record[:, j] = rec
        for p in np.flatnonzero(rec) if hermite_modes > 0 else ():
            rT = math.sqrt(T[p])
            # x / sqrt(T) is itself a uniform grid, so project without resampling
            c = project_field(x / rT, rT * m[p], basis, decay_tol=np.inf).coeffs
            herm[p, j] = np.abs(c[1 : hermite_modes + 1]) / abs(c[0])

    sample(0)
    for n in range(n_steps):
        pair = step_pipes(pair, dt, dw[:, n])
        T_new, eta = frame_step(T, eta, dt, dw[:, n])
        reversals += T_new < T
        T = T_new
        bad |= T <= 0
        running_max = np.maximum(running_max, T)
        if (n + 1) % sample_every == 0:
            sample((n + 1) // sample_every)
    return MixingRun(
        t=out_t,
        T=out_T,
        eta=out_eta,
        sigma2=sig,
        mass=mass,
        slaving=slav,
        hermite_ratio=herm,
        record=record,
        flagged=bad,
        reversal_fraction=reversals / n_steps,
    )


def slaving_bins(run: MixingRun, edges=(0.0, 0.25, 1.75, 2.25), min_abs_eta: float = 0.1):
    """Median slaving deviation in log-pseudo-time bins.

    Uses record-time samples of unflagged paths with ``|eta| > min_abs_eta``.
    Returns ``(medians, accepted_counts, skipped_count)``.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.log(np.where(run.T > 0, run.T, np.nan))
    base = run.record & ~run.flagged[:, None] & np.isfinite(tau)
    ok = base & (np.abs(run.eta) > min_abs_eta)
    skipped = int(np.sum(base & ~ok))
    meds, counts = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = ok & (tau >= lo) & (tau < hi)
        counts.append(int(sel.sum()))
        meds.append(float(np.median(run.slaving[sel])) if sel.any() else float("nan"))
    return np.array(meds), np.array(counts), skipped


def diffusivity_fit(run: MixingRun):
    """Slopes of the mean-field spatial variance.

    Returns ``(slope_in_t, D_eff)``: the slope of the ensemble-mean
    variance against real time, and half the pooled slope of per-path
    variance against pseudo-time ``T``.
    """
    ok = ~run.flagged
    mean_sig = run.sigma2[ok].mean(axis=0)
    slope_t = float(np.polyfit(run.t, mean_sig, 1)[0])
    dT = (run.T[ok] - run.T[ok, :1]).ravel()
    ds = (run.sigma2[ok] - run.sigma2[ok, :1]).ravel()
    slope_T = float(np.dot(dT, ds) / np.dot(dT, dT))
    return slope_t, 0.5 * slope_T


__all__ = [
    "MixingRun",
    "PipePair",
    "PseudoFrame",
    "diffusivity_fit",
    "evolve_pseudo_frame",
    "mean_diff_transform",
    "run_mixing",
    "slaving_bins",
    "slaving_deviation",
    "spectral_shift",
    "step_pipes",
]
