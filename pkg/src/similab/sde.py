"""Shared stepping helpers for the stochastic integrators."""

from __future__ import annotations

import numpy as np


class IntegrationError(RuntimeError):
    """A trajectory left the finite range; ``step`` is the failing step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


def heun_step(x, increment):
    """One Heun predictor-corrector step.

    ``increment(x)`` returns ``f(x) dt + g(x) dw`` for the step's fixed
    noise increment.  The average of the two slope evaluations makes the
    scheme consistent with the Stratonovich interpretation.
    """
    k1 = increment(x)
    k2 = increment(x + k1)
    return x + 0.5 * (k1 + k2)


def check_finite(x, step: int, what: str = "state"):
    if not np.all(np.isfinite(x)):
        raise IntegrationError(f"non-finite {what}", step)
