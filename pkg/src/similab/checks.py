"""Fast invariant suite behind ``similab check`` (a few seconds in total)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .galerkin import cubic_projection_tensor, integrate_modal
from .hermite import BasisSpec, eigenfunctions, project_field
from .mixing import run_mixing
from .noise import NoiseSpectrum, sample_wiener
from .origin_tracking import simulate_compensated_modes
from .pde_sim import GridConfig, rhs_burgers_similarity, run_similarity, stationary_burgers
from .slow_manifold import transform_U_to_u, transform_u_to_U


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34s} {self.value:.3e} (tol {self.tolerance:.1e})"


def _orthonormality():
    basis = BasisSpec(8)
    xi = np.linspace(-20, 20, 4001)
    c = project_field(xi, eigenfunctions(8, xi), basis).coeffs
    return float(np.max(np.abs(c - np.eye(9)))), 1e-10


def _tensor_symmetry():
    dense = cubic_projection_tensor(BasisSpec(4)).dense
    perms = [dense.transpose(0, 2, 1, 3), dense.transpose(0, 3, 2, 1), dense.transpose(1, 0, 2, 3)]
    return float(max(np.max(np.abs(dense - p)) for p in perms)), 1e-14


def _stream_reproducibility():
    whole = sample_wiener(6, 50, 0.1, seed=11, modes=(0, 3)).increments
    parts = [sample_wiener(3, 50, 0.1, seed=11, modes=(0, 3), path_offset=o).increments for o in (0, 3)]
    return float(np.max(np.abs(whole - np.concatenate(parts)))), 0.0


def _random_walk_mode():
    spectrum = NoiseSpectrum((0.7, 0.5))
    tr = integrate_modal([0.2, 0.0], spectrum, None, 200, 0.01, seed=5, n_paths=4, reaction_on=False)
    w = sample_wiener(4, 200, 0.01, seed=5, modes=(0, 1)).paths()[:, 0]
    return float(np.max(np.abs(tr.u[:, :, 0] - (0.2 + 0.7 * w)))), 1e-12


def _stationary_profile():
    grid = GridConfig.stable(12.0, 481)
    u = stationary_burgers(grid.grid, 1.0)
    res = rhs_burgers_similarity(u, grid.grid, grid.h)
    return float(np.max(np.abs(res[1:-1]))), 1e-3


def _conservative_mass():
    grid = GridConfig.stable(12.0, 241)
    spectrum = NoiseSpectrum((0.0, 0.2, 0.2), conservative=True)
    u0 = stationary_burgers(grid.grid, 1.0)
    tr = run_similarity(u0, grid, 400, spectrum=spectrum, seed=2, n_paths=2)
    return float(np.max(np.abs(tr.mass - tr.mass[:, :1]))), 1e-10


def _origin_compensation():
    c = simulate_compensated_modes(1.0, NoiseSpectrum((0.0, 0.3, 0.3)), 500, 0.002, seed=4, n_paths=8)
    return float(np.max(np.abs(c.u[:, :, 1:]))), 1e-12


def _transform_roundtrip():
    spectrum = NoiseSpectrum((0.1, 0.2, 0.3))
    U = np.array([0.12, 0.0, 0.0])
    z = np.array([0.05, -0.02])
    u = transform_U_to_u(U, z, spectrum)
    back = transform_u_to_U(u, z, spectrum).U
    return float(np.max(np.abs(back - U))), 1e-13


def _mixing_mass():
    run = run_mixing(2, seed=1, t_end=2.0, hermite_modes=0)
    return float(np.max(np.abs(run.mass / run.mass[:, :1] - 1))), 1e-12


CHECKS: dict[str, Callable[[], tuple[float, float]]] = {
    "hermite orthonormality": _orthonormality,
    "cubic tensor symmetry": _tensor_symmetry,
    "noise batch reproducibility": _stream_reproducibility,
    "mode-0 random walk": _random_walk_mode,
    "stationary Burgers profile": _stationary_profile,
    "conservative noise keeps mass": _conservative_mass,
    "origin compensation": _origin_compensation,
    "normal-form transform inverse": _transform_roundtrip,
    "two-pipe mass conservation": _mixing_mass,
}


def run_checks() -> list[CheckResult]:
    out = []
    for name, fn in CHECKS.items():
        value, tol = fn()
        out.append(CheckResult(name, bool(value <= tol), value, tol))
    return out
