"""Finite-difference solvers for stochastic Burgers and cubic
reaction-diffusion equations, in similarity and physical variables.

Every solver is written in conservative flux form ``u_t = dF/dx + R(u)`` on
a uniform grid with homogeneous Dirichlet ends, so discrete mass changes
only through boundary fluxes, reaction and forcing:

* similarity Burgers   ``F = u_xi + xi u/2 - u^2/2``
* physical Burgers     ``F = u_x - u^2/2``
* similarity RD        ``F = u_xi + xi u/2``, ``R = -u^3``

Time stepping is Heun with additive spectral (Q-Wiener) forcing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.special import erfc

from .hermite import eigenfunctions, gaussian
from .noise import NoiseSpectrum, ou_factors, spectral_increments
from .sde import IntegrationError, check_finite, heun_step

SCHEMES = ("similarity", "physical")


class ContractViolation(ValueError):
    """Inputs break a stated precondition (e.g. unequal masses)."""


@dataclass(frozen=True)
class GridConfig:
    """Uniform grid on ``[-half_width, half_width]`` with time step ``dt``."""

    half_width: float
    n_points: int
    dt: float
    scheme: str = "similarity"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.n_points < 64:
            raise ValueError("n_points must be >= 64")
        if self.half_width <= 0 or self.dt <= 0:
            raise ValueError("half_width and dt must be positive")
        if self.dt > 0.4 * self.h**2:
            raise ValueError(f"dt={self.dt} exceeds the diffusive bound 0.4 h^2 = {0.4 * self.h**2:.3g}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.n_points - 1)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.n_points)

    @classmethod
    def stable(cls, half_width: float, n_points: int, scheme: str = "similarity", safety: float = 0.4):
        """Grid with the largest permitted step ``safety * h^2``."""
        h = 2.0 * half_width / (n_points - 1)
        return cls(half_width, n_points, safety * h * h * (1 - 1e-12), scheme)


@dataclass
class GridState:
    """Field values (leading axes = paths) at frame time ``time``."""

    time: float
    values: np.ndarray
    h: float

    @property
    def mass(self):
        return trapezoid(self.values, dx=self.h, axis=-1)


def _interior_divergence(flux, h):
    """``(F_{i+1/2} - F_{i-1/2}) / h`` on interior nodes, zero at the ends."""
    out = np.zeros(flux.shape[:-1] + (flux.shape[-1] + 1,))
    out[..., 1:-1] = (flux[..., 1:] - flux[..., :-1]) / h
    return out


def _diffusive_flux(u, h):
    return (u[..., 1:] - u[..., :-1]) / h


def _burgers_flux(u):
    return -0.25 * (u[..., 1:] ** 2 + u[..., :-1] ** 2)


def _drift_flux(u, xi_mid):
    return 0.25 * xi_mid * (u[..., 1:] + u[..., :-1])


def rhs_burgers_similarity(u, xi, h):
    xm = 0.5 * (xi[1:] + xi[:-1])
    return _interior_divergence(_diffusive_flux(u, h) + _drift_flux(u, xm) + _burgers_flux(u), h)


def rhs_burgers_physical(u, h):
    return _interior_divergence(_diffusive_flux(u, h) + _burgers_flux(u), h)


def rhs_rd_similarity(u, xi, h):
    xm = 0.5 * (xi[1:] + xi[:-1])
    r = _interior_divergence(_diffusive_flux(u, h) + _drift_flux(u, xm), h)
    r[..., 1:-1] -= u[..., 1:-1] ** 3
    return r


def _check_cfl(u, xi, grid: GridConfig, step: int, drift_speed: bool):
    speed = np.max(np.abs(u))
    if drift_speed:
        speed += 0.5 * grid.half_width
    if speed * grid.dt / grid.h > 1.0:
        raise IntegrationError(f"advective CFL violated: max speed {speed:.3g}", step)


def _heun(u, rhs, dt, forcing):
    def incr(x):
        return rhs(x) * dt + forcing

    return heun_step(u, incr)


def _zero_ends(forcing):
    forcing = np.array(forcing, dtype=float)
    if forcing.ndim == 0:
        return forcing
    forcing[..., 0] = 0.0
    forcing[..., -1] = 0.0
    return forcing


def step_burgers_similarity(state: GridState, grid: GridConfig, forcing=0.0) -> GridState:
    """One Heun step; ``forcing`` is the grid noise increment ``Delta W``."""
    xi = grid.grid
    u = _heun(state.values, lambda v: rhs_burgers_similarity(v, xi, grid.h), grid.dt, _zero_ends(forcing))
    return GridState(state.time + grid.dt, u, grid.h)


def step_rd_similarity(state: GridState, grid: GridConfig, forcing=0.0) -> GridState:
    xi = grid.grid
    u = _heun(state.values, lambda v: rhs_rd_similarity(v, xi, grid.h), grid.dt, _zero_ends(forcing))
    return GridState(state.time + grid.dt, u, grid.h)


def step_burgers_physical(state: GridState, grid: GridConfig, forcing=0.0) -> GridState:
    u = _heun(state.values, lambda v: rhs_burgers_physical(v, grid.h), grid.dt, _zero_ends(forcing))
    return GridState(state.time + grid.dt, u, grid.h)


def physical_forcing(spectrum: NoiseSpectrum, dw, x, t: float) -> np.ndarray:
    """Physical increment ``t^{-1/2} sum_k b_k dw_k e_k(x/sqrt t)``.

    ``dw`` are the similarity-time increments (variance ``dt/t``); this is
    the static-frame image of the similarity noise.
    """
    basis = eigenfunctions(spectrum.n_modes - 1, np.asarray(x) / math.sqrt(t))
    return (np.asarray(dw) * spectrum.array) @ basis / math.sqrt(t)


@dataclass
class GridTrajectory:
    """Snapshots ``values[path, sample, node]`` at ``times[sample]``."""

    times: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    forcing_mass: np.ndarray | None = None

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def mass(self) -> np.ndarray:
        return trapezoid(self.values, dx=self.h, axis=-1)


def _prepare_noise(spectrum, n_paths, n_steps, dt, seed, increments, path_offset):
    if spectrum is None or not np.any(spectrum.array):
        return None
    if increments is None:
        if seed is None:
            raise ValueError("noisy run needs a seed or explicit increments")
        increments = spectral_increments(spectrum, n_paths, n_steps, dt, seed, path_offset)
    increments = np.asarray(increments, dtype=float)
    if increments.shape != (n_paths, spectrum.n_modes, n_steps):
        raise ValueError(f"increments shape {increments.shape} mismatches ({n_paths}, {spectrum.n_modes}, {n_steps})")
    return increments


def run_similarity(
    u0,
    grid: GridConfig,
    n_steps: int,
    *,
    equation: str = "burgers",
    spectrum: NoiseSpectrum | None = None,
    seed: int | None = None,
    increments=None,
    n_paths: int | None = None,
    record_every: int = 1,
    path_offset: int = 0,
    tau0: float = 0.0,
    monitor: bool = True,
) -> GridTrajectory:
    """Integrate a similarity-variable SPDE for a batch of paths.

    ``equation`` is ``"burgers"`` or ``"rd"``.  Noise increments are in
    log-time (variance ``grid.dt``) with the spectrum's mode layout.
    """
    if grid.scheme != "similarity":
        raise ValueError("run_similarity needs a similarity grid")
    step_fn = {"burgers": step_burgers_similarity, "rd": step_rd_similarity}[equation]
    xi = grid.grid
    u = np.atleast_2d(np.asarray(u0, dtype=float))
    if n_paths is None:
        n_paths = u.shape[0] if increments is None else np.shape(increments)[0]
    u = np.broadcast_to(u, (n_paths, xi.size)).copy()
    noise = _prepare_noise(spectrum, n_paths, n_steps, grid.dt, seed, increments, path_offset)
    basis = None if noise is None else eigenfunctions(spectrum.n_modes - 1, xi) * spectrum.array[:, None]

    n_rec = n_steps // record_every + 1
    out = np.empty((n_paths, n_rec, xi.size))
    out[:, 0] = u
    state = GridState(tau0, u, grid.h)
    for step in range(n_steps):
        forcing = 0.0 if noise is None else noise[:, :, step] @ basis
        state = step_fn(state, grid, forcing)
        if (step + 1) % record_every == 0:
            check_finite(state.values, step + 1, "field")
            if monitor and equation == "burgers":
                _check_cfl(state.values, xi, grid, step + 1, drift_speed=True)
            out[:, (step + 1) // record_every] = state.values
    return GridTrajectory(tau0 + grid.dt * record_every * np.arange(n_rec), xi, out)


def run_physical_burgers(
    u0,
    grid: GridConfig,
    t0: float,
    n_steps: int,
    *,
    spectrum: NoiseSpectrum | None = None,
    seed: int | None = None,
    n_paths: int = 1,
    record_every: int = 1,
    path_offset: int = 0,
) -> GridTrajectory:
    """Physical-variable Burgers from ``t0`` with the static-frame image noise.

    The similarity increments have variance ``dt / t`` at each step; the
    spatial integral of every applied forcing increment is accumulated in
    ``forcing_mass`` so mass drift can be checked against it.
    """
    if grid.scheme != "physical":
        raise ValueError("run_physical_burgers needs a physical grid")
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    x = grid.grid
    u = np.broadcast_to(np.atleast_2d(np.asarray(u0, dtype=float)), (n_paths, x.size)).copy()
    noisy = spectrum is not None and np.any(spectrum.array)
    std = None
    if noisy:
        # unit normals, rescaled per step to the log-time variance dt/t
        std = _prepare_noise(spectrum, n_paths, n_steps, 1.0, seed, None, path_offset)

    n_rec = n_steps // record_every + 1
    out = np.empty((n_paths, n_rec, x.size))
    fmass = np.zeros((n_paths, n_rec))
    out[:, 0] = u
    acc = np.zeros(n_paths)
    state = GridState(t0, u, grid.h)
    for step in range(n_steps):
        t = state.time
        forcing = 0.0
        if noisy:
            dw = std[:, :, step] * math.sqrt(grid.dt / t)
            forcing = _zero_ends(physical_forcing(spectrum, dw, x, t))
            acc = acc + trapezoid(forcing, dx=grid.h, axis=-1)
        state = step_burgers_physical(state, grid, forcing)
        if (step + 1) % record_every == 0:
            check_finite(state.values, step + 1, "field")
            _check_cfl(state.values, x, grid, step + 1, drift_speed=False)
            out[:, (step + 1) // record_every] = state.values
            fmass[:, (step + 1) // record_every] = acc
    times = t0 + grid.dt * record_every * np.arange(n_rec)
    return GridTrajectory(times, x, out, forcing_mass=fmass)


def stationary_burgers(xi, mass: float) -> np.ndarray:
    """Zero-flux stationary profile ``2 g G / (1 - g Phi)`` with ``g = 1 - exp(-mass/2)``.

    ``Phi(xi) = erfc(-xi/2)/2`` is the integral of ``G``.
    """
    xi = np.asarray(xi, dtype=float)
    g = -math.expm1(-0.5 * mass)
    return 2.0 * g * gaussian(xi) / (1.0 - g * 0.5 * erfc(-0.5 * xi))


def cole_hopf(xi, U) -> np.ndarray:
    """``V = U exp(-1/2 int_{-inf}^{xi} U)`` with a trapezoid running integral."""
    U = np.asarray(U, dtype=float)
    cum = cumulative_trapezoid(U, xi, axis=-1, initial=0.0)
    return U * np.exp(-0.5 * cum)


def weight_cutoff(xi, reference, rel: float = 1e-6) -> float:
    """Largest ``|xi|`` where ``|reference|`` is still above ``rel * max``."""
    ref = np.abs(np.asarray(reference, dtype=float))
    if ref.ndim > 1:
        ref = ref.max(axis=tuple(range(ref.ndim - 1)))
    peak = ref.max()
    if peak == 0:
        return 0.0
    return float(np.max(np.abs(np.asarray(xi)[ref >= rel * peak])))


def weighted_norm(xi, field, which: str = "L2K", reference=None, rel: float = 1e-6):
    """``L2K``, ``H1K`` (weight ``exp(xi^2/4)``) or ``Linf`` norm on the grid.

    The weight is frozen beyond the cutoff where ``reference`` (default:
    the field itself) has dropped below ``rel`` of its maximum.
    """
    xi = np.asarray(xi, dtype=float)
    f = np.asarray(field, dtype=float)
    if which == "Linf":
        return np.max(np.abs(f), axis=-1)
    cut = weight_cutoff(xi, f if reference is None else reference, rel)
    w = np.exp(0.25 * np.minimum(xi**2, cut**2))
    dens = f**2
    if which == "H1K":
        dens = dens + np.gradient(f, xi, axis=-1) ** 2
    elif which != "L2K":
        raise ValueError("which must be 'L2K', 'H1K' or 'Linf'")
    return np.sqrt(trapezoid(dens * w, xi, axis=-1))


def contraction_diagnostic(xi, path1, path2, tol: float = 1e-8) -> np.ndarray:
    """``phi = int |u1 - u2| dxi`` per sample for paired trajectories.

    Arrays are ``(..., samples, nodes)``; the first samples must carry equal
    mass.
    """
    path1 = np.asarray(path1, dtype=float)
    path2 = np.asarray(path2, dtype=float)
    m1 = trapezoid(path1[..., 0, :], xi, axis=-1)
    m2 = trapezoid(path2[..., 0, :], xi, axis=-1)
    if np.any(np.abs(m1 - m2) > tol):
        raise ContractViolation(f"initial masses differ by {np.max(np.abs(m1 - m2)):.3g}")
    return trapezoid(np.abs(path1 - path2), xi, axis=-1)


def ou_field_paths(spectrum: NoiseSpectrum, increments, dt: float, xi, record_every: int = 1) -> np.ndarray:
    """``eta(tau, xi) = sum_k b_k z_k e_k`` with ``z_k`` exact OU (rate ``k/2``).

    Sampled every ``record_every`` steps from ``z = 0``; shape
    ``(paths, samples, nodes)``.
    """
    inc = np.asarray(increments, dtype=float)
    n_paths, n_modes, n_steps = inc.shape
    decay, scale = ou_factors(0.5 * np.arange(n_modes), dt)
    basis = eigenfunctions(n_modes - 1, xi) * spectrum.array[:, None]
    z = np.zeros((n_paths, n_modes))
    out = np.empty((n_paths, n_steps // record_every + 1, len(xi)))
    out[:, 0] = 0.0
    for step in range(n_steps):
        z = decay * z + scale * inc[:, :, step]
        if (step + 1) % record_every == 0:
            out[:, (step + 1) // record_every] = z @ basis
    return out


def linf_bound_check(xi, trajectory: GridTrajectory, eta) -> np.ndarray:
    """Per-sample truth of ``max|u(tau)| <= max|u^0| + running max ||eta||_inf``."""
    u = trajectory.values
    lhs = np.max(np.abs(u), axis=-1)
    eta_inf = np.maximum.accumulate(np.max(np.abs(eta), axis=-1), axis=-1)
    rhs = lhs[..., :1] + eta_inf
    return lhs <= rhs * (1 + 1e-12)
