"""Hermite-Galerkin projection of the cubic reaction-diffusion SPDE in
similarity variables, and Heun integration of the resulting modal SDEs.

The projected system for ``u = sum_k u_k e_k`` is

    du_k = [-(k/2) u_k - d_k(u)] dtau + b_k dw_k,
    d_k  = sum_{l,m,n} C[k,l,m,n] u_l u_m u_n,

with ``C[k,l,m,n] = int e_k e_l e_m e_n K dxi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .hermite import BasisSpec, QuadratureRule, normalized_polys
from .noise import NoiseSpectrum, spectral_increments
from .sde import check_finite, heun_step

# e_k e_l e_m e_n K = psi_k psi_l psi_m psi_n exp(-3 xi^2/4) / (4 pi)
_QUARTIC_GAMMA = 0.75
_QUARTIC_NORM = 4.0 * math.pi


@dataclass(frozen=True)
class ModalState:
    tau: float
    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise ValueError("modal state must be finite")
        object.__setattr__(self, "u", u)

    @property
    def amplitude(self):
        return self.u[..., 0]


@dataclass(frozen=True)
class CubicTensor:
    """Projection of ``u^3`` onto the truncated basis.

    Products are evaluated nodally on a Gauss rule for ``exp(-3 xi^2/4)``,
    which is exact for the degree ``<= 4 K`` polynomial integrands; the dense
    tensor is available for inspection and tests.
    """

    basis: BasisSpec
    rule: QuadratureRule = field(repr=False)
    polys: np.ndarray = field(repr=False)

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes

    @cached_property
    def dense(self) -> np.ndarray:
        p, w = self.polys, self.rule.weights / _QUARTIC_NORM
        return np.einsum("ki,li,mi,ni,i->klmn", p, p, p, p, w, optimize=True)

    def apply(self, u) -> np.ndarray:
        """``d_k(u)``; ``u`` may carry leading batch axes."""
        v = np.asarray(u) @ self.polys
        return (v**3 * (self.rule.weights / _QUARTIC_NORM)) @ self.polys.T

    def monomial_coefficient(self, k: int, powers) -> float:
        """Coefficient of ``prod_j u_j^powers[j]`` in ``d_k``.

        ``powers`` must total 3; the multinomial count of index orderings
        multiplies the symmetric tensor entry.
        """
        powers = tuple(int(p) for p in powers)
        if sum(powers) != 3 or len(powers) > self.n_modes:
            raise ValueError("powers must describe a cubic monomial in the basis modes")
        idx = [j for j, p in enumerate(powers) for _ in range(p)]
        count = math.factorial(3)
        for p in powers:
            count //= math.factorial(p)
        return count * float(self.dense[(k, *idx)])


def cubic_projection_tensor(basis: BasisSpec) -> CubicTensor:
    rule = QuadratureRule.gauss(basis.quad_order, gamma=_QUARTIC_GAMMA)
    polys = normalized_polys(basis.max_mode, rule.nodes)
    return CubicTensor(basis=basis, rule=rule, polys=polys)


def modal_rhs(state, spectrum: NoiseSpectrum, tensor: CubicTensor | None, reaction_on: bool = True):
    """Drift vector and additive diffusion amplitudes of the modal SDEs.

    ``state`` is a :class:`ModalState` or a coefficient array (batch axes
    allowed).  Returns ``(drift, b)`` with mode ``k`` driven by ``b_k dw_k``.
    """
    u = state.u if isinstance(state, ModalState) else np.asarray(state, dtype=float)
    n = u.shape[-1]
    if spectrum.n_modes != n:
        raise ValueError(f"spectrum has {spectrum.n_modes} modes, state has {n}")
    drift = -0.5 * np.arange(n) * u
    if reaction_on:
        if tensor is None or tensor.n_modes != n:
            raise ValueError("reaction requires a cubic tensor matching the state size")
        drift = drift - tensor.apply(u)
    return drift, spectrum.array


@dataclass
class ModalTrajectory:
    """Recorded states: ``u[path, sample, mode]`` at times ``tau[sample]``."""

    tau: np.ndarray
    u: np.ndarray

    def state(self, sample: int, path: int = 0) -> ModalState:
        return ModalState(float(self.tau[sample]), self.u[path, sample])


def integrate_modal(
    u0,
    spectrum: NoiseSpectrum,
    tensor: CubicTensor | None,
    n_steps: int,
    dt: float,
    seed: int | None = None,
    *,
    increments=None,
    n_paths: int | None = None,
    reaction_on: bool = True,
    record_every: int = 1,
    path_offset: int = 0,
    tau0: float = 0.0,
) -> ModalTrajectory:
    """Heun integration of the modal SDEs for a batch of paths.

    Noise comes either from ``increments`` (shape ``(paths, modes, steps)``)
    or from the seeded streams of :mod:`similab.noise` for global paths
    ``path_offset ..``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    u0 = np.atleast_2d(np.asarray(u0, dtype=float))
    n = spectrum.n_modes
    if increments is None:
        if seed is None:
            raise ValueError("give either a seed or explicit increments")
        if n_paths is None:
            n_paths = u0.shape[0]
        increments = spectral_increments(spectrum, n_paths, n_steps, dt, seed, path_offset)
    increments = np.asarray(increments, dtype=float)
    n_paths = increments.shape[0]
    if increments.shape[1:] != (n, n_steps):
        raise ValueError(f"increments shape {increments.shape} != (paths, {n}, {n_steps})")
    u = np.broadcast_to(u0, (n_paths, n)).copy()

    n_rec = n_steps // record_every + 1
    out = np.empty((n_paths, n_rec, n))
    out[:, 0] = u
    taus = tau0 + dt * record_every * np.arange(n_rec)
    b = spectrum.array
    for step in range(n_steps):
        noise = b * increments[:, :, step]

        def incr(x):
            return modal_rhs(x, spectrum, tensor, reaction_on)[0] * dt + noise

        u = heun_step(u, incr)
        if (step + 1) % record_every == 0:
            check_finite(u, step + 1)
            out[:, (step + 1) // record_every] = u
    check_finite(u, n_steps)
    return ModalTrajectory(tau=taus, u=out)
