"""Dense LU helpers with condition checks."""
from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from .exceptions import ConditioningError

#: Systems whose (equilibrated) 1-norm condition estimate exceeds this are rejected.
MAX_CONDITION = 1e12


def condition_estimate(a) -> float:
    """1-norm condition number estimate from an LU factorization."""
    a = np.asarray(a, dtype=complex)
    anorm = np.linalg.norm(a, 1)
    if anorm == 0 or not np.all(np.isfinite(a)):
        return math.inf
    lu, _, info = scipy.linalg.lapack.zgetrf(a)
    if info > 0:
        return math.inf
    rcond, _ = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
    return math.inf if rcond == 0 else 1.0 / rcond


class CheckedLU:
    """LU factorization of ``a``, optionally row/column equilibrated first.

    Raises ConditioningError if the (scaled) matrix is singular or its
    condition estimate exceeds ``max_condition``.
    """

    def __init__(self, a, what="matrix", max_condition=MAX_CONDITION, equilibrate=True):
        a = np.asarray(a, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"{what} must be square")
        n = a.shape[0]
        r = np.ones(n)
        c = np.ones(n)
        if equilibrate:
            row = np.max(np.abs(a), axis=1)
            row[row == 0] = 1.0
            r = 1.0 / row
            col = np.max(np.abs(a * r[:, None]), axis=0)
            col[col == 0] = 1.0
            c = 1.0 / col
        scaled = a * r[:, None] * c[None, :]
        anorm = np.linalg.norm(scaled, 1)
        lu, piv, info = scipy.linalg.lapack.zgetrf(scaled)
        if info > 0 or not np.all(np.isfinite(scaled)):
            raise ConditioningError(f"{what} is singular", math.inf)
        rcond, _ = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
        self.condition = math.inf if rcond == 0 else 1.0 / rcond
        if not self.condition < max_condition:
            raise ConditioningError(f"{what} is ill-conditioned", self.condition)
        self._lu, self._piv, self._r, self._c = lu, piv, r, c

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=complex)
        rb = b * (self._r[:, None] if b.ndim == 2 else self._r)
        x, info = scipy.linalg.lapack.zgetrs(self._lu, self._piv, rb)
        return x * (self._c[:, None] if b.ndim == 2 else self._c)


def checked_solve(a, b, what="matrix", max_condition=MAX_CONDITION,
                  equilibrate=True) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return np.zeros((0,) + np.shape(b)[1:], dtype=complex)
    return CheckedLU(a, what, max_condition, equilibrate).solve(b)
