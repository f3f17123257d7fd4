"""Hermite eigenbasis of the similarity operator.

The operator ``L u = u'' + xi u'/2 + u/2`` has eigenvalues ``-k/2`` with
eigenfunctions

    e_k(xi) = c_k He_k(xi / sqrt(2)) G(xi),
    G(xi)   = exp(-xi^2 / 4) / (2 sqrt(pi)),
    c_k     = (2 sqrt(pi) / k!)^(1/2),

where ``He_k`` are the probabilists' Hermite polynomials.  The family is
orthonormal under the weight ``K(xi) = exp(xi^2 / 4)``.

Two coefficient conventions are supported by the coefficient-space operators:
``normalized=True`` refers to amplitudes of ``e_k``; ``normalized=False``
refers to amplitudes of the plain Hermite functions ``phi_k = He_k G``
(``e_k = c_k phi_k``).  For ``phi_k`` the ladder relations are the simple
``phi_k' = -phi_{k+1}/sqrt(2)`` and ``phi_k'' = phi_{k+2}/2``; for ``e_k``
they pick up ``sqrt(k+1)`` factors.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import roots_hermite

SQRT2 = math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)
# e_k = psi_k(xi/sqrt2) exp(-xi^2/4) / NORM, psi_k = He_k / sqrt(k!)
NORM = math.sqrt(2.0 * SQRT_PI)

_RESCALE = 1e150


def hermite_poly(k: int, zeta):
    """Probabilists' Hermite polynomial ``He_k(zeta)`` by three-term recurrence."""
    if k < 0:
        raise ValueError(f"mode index must be non-negative, got {k}")
    zeta = np.asarray(zeta, dtype=float)
    h_prev = np.ones_like(zeta)
    if k == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = zeta.copy()
    for j in range(1, k):
        h_prev, h = h, zeta * h - j * h_prev
    return h if h.ndim else float(h)


def normalization(k: int) -> float:
    """``c_k = (2 sqrt(pi) / k!)^(1/2)`` evaluated through ``lgamma``."""
    return math.exp(0.5 * (math.log(2.0 * SQRT_PI) - math.lgamma(k + 1)))


def gaussian(xi):
    """The self-similar profile ``G(xi) = exp(-xi^2/4) / (2 sqrt(pi))``."""
    xi = np.asarray(xi, dtype=float)
    return np.exp(-0.25 * xi**2) / (2.0 * SQRT_PI)


def normalized_polys(max_mode: int, xi) -> np.ndarray:
    """Rows ``psi_k(xi/sqrt2) = He_k(xi/sqrt2)/sqrt(k!)`` for ``k = 0..max_mode``.

    Pure polynomials (no Gaussian factor); used for quadrature and projection.
    """
    zeta = np.asarray(xi, dtype=float) / SQRT2
    out = np.empty((max_mode + 1,) + zeta.shape)
    out[0] = 1.0
    if max_mode >= 1:
        out[1] = zeta
    for k in range(1, max_mode):
        out[k + 1] = (zeta * out[k] - math.sqrt(k) * out[k - 1]) / math.sqrt(k + 1)
    return out


def eigenfunctions(max_mode: int, xi) -> np.ndarray:
    """Evaluate ``e_0..e_max_mode`` at ``xi``; shape ``(max_mode + 1,) + xi.shape``.

    The recurrence runs on the orthonormal polynomials with a separate
    log-magnitude accumulator so that large ``|xi|`` or ``k`` never overflow
    an intermediate; values below the float range underflow to zero.
    """
    xi = np.asarray(xi, dtype=float)
    zeta = xi / SQRT2
    log_scale = -0.25 * xi**2 - math.log(NORM)
    out = np.empty((max_mode + 1,) + xi.shape)
    p_prev = np.zeros_like(zeta)
    p = np.ones_like(zeta)
    out[0] = np.exp(log_scale)
    for k in range(max_mode):
        p_next = (zeta * p - math.sqrt(k) * p_prev) / math.sqrt(k + 1)
        p_prev, p = p, p_next
        big = np.abs(p) > _RESCALE
        if np.any(big):
            p = np.where(big, p / _RESCALE, p)
            p_prev = np.where(big, p_prev / _RESCALE, p_prev)
            log_scale = np.where(big, log_scale + math.log(_RESCALE), log_scale)
        with np.errstate(divide="ignore"):
            out[k + 1] = np.sign(p) * np.exp(np.log(np.abs(p)) + log_scale)
    if not np.all(np.isfinite(out)):
        raise OverflowError("Hermite eigenfunction value not representable")
    return out


def eval_eigenfunction(k: int, xi):
    """``e_k(xi)`` for a single mode index."""
    if k < 0:
        raise ValueError(f"mode index must be non-negative, got {k}")
    val = eigenfunctions(k, xi)[k]
    return val if val.ndim else float(val)


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss rule for ``int h(xi) exp(-gamma xi^2) dxi``.

    Built from the Golub-Welsch Gauss-Hermite rule in ``s`` with
    ``xi = s / sqrt(gamma)``; exact for polynomial ``h`` of degree
    ``<= 2 * len(nodes) - 1``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    gamma: float = 0.25

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("quadrature nodes must be strictly increasing")

    @classmethod
    def gauss(cls, order: int, gamma: float = 0.25) -> "QuadratureRule":
        if order < 1:
            raise ValueError("quadrature order must be >= 1")
        s, w = roots_hermite(order)
        scale = 1.0 / math.sqrt(gamma)
        return cls(nodes=s * scale, weights=w * scale, gamma=gamma)

    def integrate(self, h) -> float:
        """``sum_i w_i h(xi_i)``; ``h`` is a callable or node samples (last axis)."""
        vals = h(self.nodes) if callable(h) else np.asarray(h, dtype=float)
        return vals @ self.weights


@dataclass(frozen=True)
class BasisSpec:
    """Truncated Hermite basis ``e_0..e_max_mode`` plus its quadrature order."""

    max_mode: int
    quad_order: int | None = None

    def __post_init__(self):
        if self.max_mode < 1:
            raise ValueError("max_mode must be >= 1; the slow mode alone is max_mode=1")
        if self.quad_order is None:
            object.__setattr__(self, "quad_order", 2 * self.max_mode + 8)
        if self.quad_order < 2 * self.max_mode + 8:
            raise ValueError(
                f"quad_order {self.quad_order} < 2*max_mode+8 = {2 * self.max_mode + 8}"
            )

    @property
    def n_modes(self) -> int:
        return self.max_mode + 1

    @property
    def decay_rates(self) -> np.ndarray:
        """Linear decay ``k/2`` of each mode (eigenvalue ``-k/2``)."""
        return 0.5 * np.arange(self.n_modes)

    @cached_property
    def rule(self) -> QuadratureRule:
        """Rule for the weight ``exp(-xi^2/4)``: K-weighted products of two modes."""
        return QuadratureRule.gauss(self.quad_order, gamma=0.25)

    @cached_property
    def normalizations(self) -> np.ndarray:
        return np.array([normalization(k) for k in range(self.n_modes)])

    def evaluate(self, xi) -> np.ndarray:
        return eigenfunctions(self.max_mode, xi)

    def reconstruct(self, coeffs, xi) -> np.ndarray:
        """``sum_k u_k e_k(xi)``; ``coeffs`` may carry leading batch axes."""
        coeffs = np.asarray(coeffs, dtype=float)
        return coeffs @ eigenfunctions(coeffs.shape[-1] - 1, xi)


def weighted_inner(f, g, rule: QuadratureRule) -> float:
    """``int f g K dxi`` with ``K = exp(xi^2/4)`` using ``rule``.

    ``f`` and ``g`` are callables or samples at ``rule.nodes``.
    """
    fv = f(rule.nodes) if callable(f) else np.asarray(f, dtype=float)
    gv = g(rule.nodes) if callable(g) else np.asarray(g, dtype=float)
    tilt = np.exp((0.25 + rule.gamma) * rule.nodes**2)
    return float(np.sum(rule.weights * tilt * fv * gv))


@dataclass(frozen=True)
class Projection:
    coeffs: np.ndarray
    boundary_ratio: float
    warning: str | None = None


def project_field(xi, values, spec: BasisSpec, decay_tol: float = 1e-8) -> Projection:
    """Hermite coefficients ``u_k = <u, e_k>`` of a field on a uniform grid.

    Since ``e_k K = psi_k(xi/sqrt2) / NORM`` is polynomial, each coefficient
    is a polynomial moment of the field, integrated by the trapezoid rule
    (spectrally accurate for smooth fields with Gaussian tails).
    ``values`` may carry leading batch axes; the grid is the last axis.
    """
    xi = np.asarray(xi, dtype=float)
    values = np.asarray(values, dtype=float)
    polys = normalized_polys(spec.max_mode, xi) / NORM
    coeffs = trapezoid(values[..., None, :] * polys, xi, axis=-1)

    peak = np.max(np.abs(values))
    edge = max(np.max(np.abs(values[..., 0])), np.max(np.abs(values[..., -1])))
    ratio = float(edge / peak) if peak > 0 else 0.0
    msg = None
    if ratio >= decay_tol:
        msg = f"field not decayed at grid boundary: |edge|/max = {ratio:.3g}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return Projection(coeffs=coeffs, boundary_ratio=ratio, warning=msg)


def derivative_in_basis(coeffs, order: int = 1, normalized: bool = True) -> np.ndarray:
    """Coefficients of ``d^order u / dxi^order`` given coefficients of ``u``.

    The output is longer by ``order`` slots (the derivative raises the mode
    index).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1]
    out = np.zeros(coeffs.shape[:-1] + (n + order,))
    k = np.arange(n)
    if order == 1:
        fac = -np.sqrt(k + 1.0) / SQRT2 if normalized else np.full(n, -1.0 / SQRT2)
        out[..., 1:] = coeffs * fac
    else:
        fac = np.sqrt((k + 1.0) * (k + 2.0)) / 2.0 if normalized else np.full(n, 0.5)
        out[..., 2:] = coeffs * fac
    return out


def multiply_by_xi(coeffs, normalized: bool = True) -> np.ndarray:
    """Coefficients of ``xi * u`` from the Hermite three-term recurrence."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1]
    out = np.zeros(coeffs.shape[:-1] + (n + 1,))
    k = np.arange(n, dtype=float)
    if normalized:
        # xi e_k = sqrt2 (sqrt(k+1) e_{k+1} + sqrt(k) e_{k-1})
        out[..., 1:] += SQRT2 * np.sqrt(k + 1) * coeffs
        out[..., :-2] += SQRT2 * np.sqrt(k[1:]) * coeffs[..., 1:]
    else:
        out[..., 1:] += SQRT2 * coeffs
        out[..., :-2] += SQRT2 * k[1:] * coeffs[..., 1:]
    return out


def apply_similarity_operator(coeffs, normalized: bool = True) -> np.ndarray:
    """``L u = u'' + xi u'/2 + u/2`` in coefficient space (length + 2)."""
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1]
    out = derivative_in_basis(coeffs, 2, normalized)
    out += 0.5 * multiply_by_xi(derivative_in_basis(coeffs, 1, normalized), normalized)[..., : n + 2]
    out[..., :n] += 0.5 * coeffs
    return out
