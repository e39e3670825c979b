"""Tridiagonal storage, Thomas elimination and pivot-sign checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ZeroPivotError(np.linalg.LinAlgError):
    """Elimination met an exact zero pivot.

    Unreachable for correctly assembled time-step Jacobians, which are
    strictly diagonally dominant.
    """

    def __init__(self, index: int):
        super().__init__(f"zero pivot at row {index}")
        self.index = index


@dataclass(frozen=True, eq=False)
class Tridiagonal:
    """
    Band storage of an n x n tridiagonal matrix.

    ``sub[i]`` is entry ``(i+1, i)``, ``sup[i]`` is entry ``(i, i+1)``.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        sub = np.asarray(self.sub, dtype=float)
        sup = np.asarray(self.sup, dtype=float)
        n = diag.size
        if diag.ndim != 1 or n == 0:
            raise ValueError("diag must be a non-empty vector")
        if sub.shape != (n - 1,) or sup.shape != (n - 1,):
            raise ValueError(f"off-diagonal bands must have length {n - 1}")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "sub", sub)
        object.__setattr__(self, "sup", sup)

    @property
    def n(self) -> int:
        return self.diag.size

    @classmethod
    def diagonal(cls, values) -> "Tridiagonal":
        values = np.asarray(values, dtype=float)
        zeros = np.zeros(values.size - 1)
        return cls(zeros, values, zeros.copy())

    def __add__(self, other: "Tridiagonal") -> "Tridiagonal":
        return Tridiagonal(self.sub + other.sub, self.diag + other.diag,
                           self.sup + other.sup)

    def scaled(self, factor: float) -> "Tridiagonal":
        return Tridiagonal(factor * self.sub, factor * self.diag, factor * self.sup)

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[:-1] += self.sup * x[1:]
        y[1:] += self.sub * x[:-1]
        return y

    __matmul__ = matvec

    def to_dense(self) -> np.ndarray:
        return (np.diag(self.diag) + np.diag(self.sub, -1)
                + np.diag(self.sup, 1))


def solve(m: Tridiagonal, rhs) -> np.ndarray:
    """
    Thomas algorithm without pivoting.

    Stable for the strictly diagonally dominant matrices produced by the
    assembly. Raises ZeroPivotError on an exact zero pivot.
    """
    d = np.asarray(rhs, dtype=float)
    n = m.n
    if d.shape != (n,):
        raise ValueError(f"rhs has shape {d.shape}, expected ({n},)")
    a, b, c = m.sub.tolist(), m.diag.tolist(), m.sup.tolist()
    d = d.tolist()
    cp = [0.0] * n
    dp = [0.0] * n
    piv = b[0]
    if piv == 0.0:
        raise ZeroPivotError(0)
    for i in range(n - 1):
        cp[i] = c[i] / piv
        dp[i] = d[i] / piv
        piv = b[i + 1] - a[i] * cp[i]
        if piv == 0.0:
            raise ZeroPivotError(i + 1)
        d[i + 1] -= a[i] * dp[i]
    x = [0.0] * n
    x[-1] = d[-1] / piv
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return np.array(x)


def pivot_signs(m: Tridiagonal) -> np.ndarray:
    """
    Signs of the elimination pivots.

    The k-th pivot is the ratio of consecutive leading principal minors, so
    all signs are +1 exactly when every leading principal minor is positive.
    Determinants themselves are never formed. A zero pivot yields sign 0 and
    the remaining entries are 0 as well.
    """
    a, b, c = m.sub.tolist(), m.diag.tolist(), m.sup.tolist()
    signs = np.zeros(m.n, dtype=np.int8)
    piv = b[0]
    for i in range(m.n):
        if i > 0:
            piv = b[i] - a[i - 1] * c[i - 1] / piv
        signs[i] = (piv > 0) - (piv < 0)
        if piv == 0.0:
            break
    return signs
