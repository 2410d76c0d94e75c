"""Dense tableau simplex with Bland's anti-cycling rule.

Only the form needed by the supermodular-order check is supported::

    maximize  c @ x   subject to   A @ x <= b,  x >= 0,  with b >= 0

so the slack basis is feasible from the start and no phase one is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LpFailure


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    basis: np.ndarray
    pivots: int
    residual: float


def maximize_leq(c, A, b, tol=1e-11, max_pivots=100_000) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if np.any(b < 0):
        raise LpFailure("right-hand side must be nonnegative for a slack start")

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = np.arange(n, n + m)

    pivots = 0
    while True:
        red = T[m, :-1]
        enter = np.flatnonzero(red < -tol)
        if enter.size == 0:
            break
        j = enter[0]
        col = T[:m, j]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            raise LpFailure("objective is unbounded")
        ratios = T[rows, -1] / col[rows]
        rmin = ratios.min()
        ties = rows[ratios <= rmin + tol * (1.0 + abs(rmin))]
        i = ties[np.argmin(basis[ties])]

        T[i] /= T[i, j]
        f = T[:, j].copy()
        f[i] = 0.0
        T -= np.outer(f, T[i])
        basis[i] = j
        pivots += 1
        if pivots >= max_pivots:
            raise LpFailure(f"no optimum after {max_pivots} pivots")

    # re-solve the final basis against the original data to shed tableau drift
    full = np.hstack([A, np.eye(m)])
    xb = np.linalg.solve(full[:, basis], b)
    z = np.zeros(n + m)
    z[basis] = xb
    x = np.clip(z[:n], 0.0, None)
    residual = max(0.0, float(np.max(A @ x - b, initial=0.0)), float(-z.min(initial=0.0)))
    return SimplexResult(x=x, objective=float(c @ x), basis=basis.copy(), pivots=pivots, residual=residual)
