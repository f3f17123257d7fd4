"""Stochastic self-similarity laboratory: Hermite-Galerkin reductions, slow
manifolds, grid SPDE solvers and mixing models in similarity variables."""

__version__ = "0.1.0"
