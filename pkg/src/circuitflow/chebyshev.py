"""Chebyshev polynomials of the first and second kind on [1, inf).

Forward recurrences in double precision: for arguments >= 1 the terms grow
monotonically, so the recurrence is stable. Overflow is reported, never
returned as inf, because downstream potentials are ratios of these values.
"""

import math
from enum import Enum

import numpy as np


class PolyKind(Enum):
    FIRST = "first"
    SECOND = "second"


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not math.isfinite(gamma) or gamma < 1.0:
        raise ValueError(f"gamma must be finite and >= 1, got {gamma}")
    return gamma


def eval_T(l: int, gamma: float) -> float:
    """T_l(gamma) via T_0 = 1, T_1 = gamma, T_{l+1} = 2*gamma*T_l - T_{l-1}."""
    gamma = _check_gamma(gamma)
    if l < 0:
        raise ValueError(f"degree must be >= 0 for first kind, got {l}")
    if l == 0:
        return 1.0
    prev, cur = 1.0, gamma
    for _ in range(l - 1):
        prev, cur = cur, 2.0 * gamma * cur - prev
        if math.isinf(cur):
            raise OverflowError(
                f"T_{l}(gamma={gamma}) exceeds the largest finite double"
            )
    return cur


def eval_U(l: int, gamma: float) -> float:
    """U_l(gamma) with the extra convention U_{-1} = 0; U_0 = 1, U_1 = 2*gamma."""
    gamma = _check_gamma(gamma)
    if l < -1:
        raise ValueError(f"degree must be >= -1 for second kind, got {l}")
    if l == -1:
        return 0.0
    if l == 0:
        return 1.0
    prev, cur = 1.0, 2.0 * gamma
    for _ in range(l - 1):
        prev, cur = cur, 2.0 * gamma * cur - prev
        if math.isinf(cur):
            raise OverflowError(
                f"U_{l}(gamma={gamma}) exceeds the largest finite double"
            )
    return cur


def evaluate(kind: PolyKind, l: int, gamma: float) -> float:
    if kind is PolyKind.FIRST:
        return eval_T(l, gamma)
    if kind is PolyKind.SECOND:
        return eval_U(l, gamma)
    raise ValueError(f"unknown polynomial kind: {kind!r}")


class ChebyshevTable:
    """Memoized T_0..T_L and U_{-1}..U_{L-1} for one (gamma, L).

    Potentials on an L-layer circuit only ever need degrees up to L, so the
    whole table is tiny and removes redundant recurrences from hot loops.
    """

    def __init__(self, gamma: float, L: int):
        gamma = _check_gamma(gamma)
        if L < 1:
            raise ValueError(f"layer count must be >= 1, got {L}")
        self.gamma = gamma
        self.L = L
        t = np.empty(L + 1)
        t[0] = 1.0
        t[1] = gamma
        for i in range(2, L + 1):
            t[i] = 2.0 * gamma * t[i - 1] - t[i - 2]
        # u[i] holds U_{i-1}; degrees -1..L-1
        u = np.empty(L + 1)
        u[0] = 0.0
        u[1] = 1.0
        for i in range(2, L + 1):
            u[i] = 2.0 * gamma * u[i - 1] - u[i - 2]
        if not (np.isfinite(t).all() and np.isfinite(u).all()):
            raise OverflowError(
                f"Chebyshev table up to degree {L} at gamma={gamma} "
                "exceeds the largest finite double"
            )
        self._t = t
        self._u = u

    def T(self, l: int) -> float:
        return float(self._t[l])

    def U(self, l: int) -> float:
        return float(self._u[l + 1])
