"""Closed-form golden values (all scaled by 1/sqrt(3 pi))."""

import math

S3PI = math.sqrt(3 * math.pi)
R2 = math.sqrt(2)

# powers (p0, p1, p2) -> reference coefficient in d_k
REFERENCE_CUBIC = {
    0: {(3, 0, 0): 1 / 2, (1, 2, 0): 1 / 2, (0, 0, 3): -R2 / 9, (1, 0, 2): 1 / 2, (2, 0, 1): -1 / R2},
    1: {(2, 1, 0): 1 / 2, (0, 3, 0): 1 / 6, (0, 1, 2): 1 / 6},
    2: {(3, 0, 0): -R2 / 6, (2, 0, 1): 1 / 2, (1, 0, 2): -R2 / 6, (0, 0, 3): 5 / 54, (0, 2, 1): 1 / 6},
}

# the one reference entry that disagrees with quadrature; see the decisions ledger
CORRECTED = {(0, (0, 0, 3)): -R2 / 18}

CUBIC_MONOMIALS = [(a, b, 3 - a - b) for a in range(4) for b in range(4 - a)]
