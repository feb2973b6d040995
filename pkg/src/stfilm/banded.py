"""Direct solver for periodic (cyclic) pentadiagonal systems.

The matrix is stored as five diagonals a_m2..a_p2 with a_mk[i] = A[i, i-k
mod N].  The periodic wrap couples the first and last two rows through six
corner entries; the solve splits A into a strictly banded part plus a
rank-4 correction and applies the Woodbury identity on top of a banded
LAPACK factorization.  A dense fallback keeps the solve robust when the
banded part happens to be ill conditioned.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from .errors import LinearSolveFailure

__all__ = ["cyclic_banded_matvec", "cyclic_banded_dense", "solve_cyclic_banded"]


def cyclic_banded_matvec(diags, x: np.ndarray) -> np.ndarray:
    """A @ x for the cyclic pentadiagonal matrix given by its diagonals.

    x may be a vector or a matrix of column vectors.
    """
    a_m2, a_m1, a_0, a_p1, a_p2 = (
        d if x.ndim == 1 else d[:, None] for d in diags
    )
    return (
        a_m2 * np.roll(x, 2, axis=0)
        + a_m1 * np.roll(x, 1, axis=0)
        + a_0 * x
        + a_p1 * np.roll(x, -1, axis=0)
        + a_p2 * np.roll(x, -2, axis=0)
    )


def cyclic_banded_dense(diags) -> np.ndarray:
    """Assemble the full dense matrix (for fallbacks and tests)."""
    a_m2, a_m1, a_0, a_p1, a_p2 = diags
    n = len(a_0)
    a = np.zeros((n, n))
    idx = np.arange(n)
    a[idx, (idx - 2) % n] += a_m2
    a[idx, (idx - 1) % n] += a_m1
    a[idx, idx] += a_0
    a[idx, (idx + 1) % n] += a_p1
    a[idx, (idx + 2) % n] += a_p2
    return a


def _banded_ab(diags) -> np.ndarray:
    """LAPACK band storage of the non-wrapped part, (l, u) = (2, 2)."""
    a_m2, a_m1, a_0, a_p1, a_p2 = diags
    n = len(a_0)
    ab = np.zeros((5, n))
    ab[0, 2:] = a_p2[:-2]
    ab[1, 1:] = a_p1[:-1]
    ab[2, :] = a_0
    ab[3, :-1] = a_m1[1:]
    ab[4, :-2] = a_m2[2:]
    return ab


def solve_cyclic_banded(diags, rhs: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Solve A x = rhs directly and verify the backward error.

    rhs may be a vector or a matrix of column right-hand sides sharing
    one factorization.  Raises LinearSolveFailure if neither the
    Woodbury-corrected banded solve nor the dense fallback reaches a
    normwise backward error
    ||A x - rhs||_inf <= tol * max(1, ||A||_inf ||x||_inf + ||rhs||_inf)
    columnwise, the scale a correctly rounded direct solve always meets.
    """
    a_m2, a_m1, a_0, a_p1, a_p2 = (np.asarray(d, dtype=float) for d in diags)
    diags = (a_m2, a_m1, a_0, a_p1, a_p2)
    n = len(a_0)
    if n < 8:
        raise ValueError(f"cyclic bandwidth-5 solve needs n >= 8, got {n}")
    rhs = np.asarray(rhs, dtype=float)
    flat = rhs.ndim == 1
    b = rhs[:, None] if flat else rhs
    norm_a = float(np.max(
        np.abs(a_m2) + np.abs(a_m1) + np.abs(a_0) + np.abs(a_p1) + np.abs(a_p2)
    ))
    b_inf = np.max(np.abs(b), axis=0)

    def _accept(x: np.ndarray) -> bool:
        res = np.max(np.abs(cyclic_banded_matvec(diags, x) - b), axis=0)
        scale = np.maximum(1.0, norm_a * np.max(np.abs(x), axis=0) + b_inf)
        return bool(np.all(res <= tol * scale))

    x = _woodbury_solve(diags, b, n)
    if x is not None and _accept(x):
        return x[:, 0] if flat else x

    x = np.linalg.solve(cyclic_banded_dense(diags), b)
    if _accept(x):
        return x[:, 0] if flat else x
    res = float(np.max(np.abs(cyclic_banded_matvec(diags, x) - b)))
    raise LinearSolveFailure(
        f"cyclic banded solve residual {res:.3e} above tolerance"
    )


def _woodbury_solve(diags, rhs: np.ndarray, n: int) -> np.ndarray | None:
    """Banded solve plus rank-4 corner correction; None if B is singular.

    rhs has shape (n, m); all columns share one banded factorization.
    """
    a_m2, a_m1, a_0, a_p1, a_p2 = diags
    # corner entries outside the band: rows {0, 1, n-2, n-1}
    vt = np.zeros((4, n))
    vt[0, n - 2] = a_m2[0]
    vt[0, n - 1] = a_m1[0]
    vt[1, n - 1] = a_m2[1]
    vt[2, 0] = a_p2[n - 2]
    vt[3, 0] = a_p1[n - 1]
    vt[3, 1] = a_p2[n - 1]
    u_cols = (0, 1, n - 2, n - 1)

    m = rhs.shape[1]
    ab = _banded_ab(diags)
    stacked = np.zeros((n, m + 4))
    stacked[:, :m] = rhs
    for j, col in enumerate(u_cols):
        stacked[col, m + j] = 1.0
    try:
        sol = solve_banded((2, 2), ab, stacked)
    except np.linalg.LinAlgError:
        return None
    y = sol[:, :m]
    z = sol[:, m:]
    cap = np.eye(4) + vt @ z
    try:
        w = np.linalg.solve(cap, vt @ y)
    except np.linalg.LinAlgError:
        return None
    return y - z @ w
