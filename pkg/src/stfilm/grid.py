"""Uniform periodic grid and discrete calculus on [0, L).

Fields live on the nodes x_i = i*dx of a uniform mesh with periodic
wraparound.  Derivatives are second-order central stencils, quadrature is
the rectangle rule (exact for trigonometric polynomials below the Nyquist
mode), and powers are taken pointwise with an explicit positivity guard.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeBase

__all__ = [
    "PeriodicGrid",
    "GridFunction",
    "make_grid",
    "grid_function",
    "deriv",
    "integrate",
    "pointwise_power",
]


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic mesh: N nodes on [0, L), spacing dx = L/N."""

    L: float
    N: int
    dx: float

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates x_i = i*dx."""
        return np.arange(self.N) * self.dx

    @property
    def faces(self) -> np.ndarray:
        """Face coordinates x_{j+1/2} = (j + 1/2)*dx; face j sits between
        node j and node j+1 (periodically)."""
        return (np.arange(self.N) + 0.5) * self.dx


def make_grid(L: float, N: int) -> PeriodicGrid:
    """Build a periodic grid with N nodes on [0, L).

    Parameters
    ----------
    L : float
        Domain length, must be > 0.
    N : int
        Number of nodes, must be even and >= 16.
    """
    if not (L > 0.0) or not np.isfinite(L):
        raise ValueError(f"domain length must be positive and finite, got L={L}")
    if N < 16 or N % 2 != 0:
        raise ValueError(f"node count must be even and >= 16, got N={N}")
    return PeriodicGrid(L=float(L), N=int(N), dx=float(L) / int(N))


@dataclass(frozen=True)
class GridFunction:
    """Nodal values of a scalar field on a periodic grid.

    Values are stored read-only; operations return new instances.
    """

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False, compare=False)


def grid_function(grid: PeriodicGrid, values) -> GridFunction:
    """Validating constructor: length must match the grid, values finite."""
    v = np.asarray(values, dtype=float)
    if v.shape != (grid.N,):
        raise ValueError(f"expected {grid.N} nodal values, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("nodal values must be finite")
    v = v.copy()
    v.setflags(write=False)
    return GridFunction(grid=grid, values=v)


def _deriv_values(v: np.ndarray, dx: float, m: int) -> np.ndarray:
    """Central difference of order m in {1, 2, 3} on a periodic array."""
    vp1 = np.roll(v, -1)   # v_{i+1}
    vm1 = np.roll(v, 1)    # v_{i-1}
    if m == 1:
        return (vp1 - vm1) / (2.0 * dx)
    if m == 2:
        return (vp1 - 2.0 * v + vm1) / dx**2
    if m == 3:
        vp2 = np.roll(v, -2)
        vm2 = np.roll(v, 2)
        return (-0.5 * vm2 + vm1 - vp1 + 0.5 * vp2) / dx**3
    raise ValueError(f"derivative order must be 1, 2, or 3, got m={m}")


def deriv(f: GridFunction, m: int) -> GridFunction:
    """m-th central derivative (m in {1, 2, 3}), second-order accurate."""
    return grid_function(f.grid, _deriv_values(f.values, f.grid.dx, m))


def integrate(f: GridFunction) -> float:
    """Rectangle-rule quadrature sum(f_i) * dx over one period."""
    return float(np.sum(f.values) * f.grid.dx)


def _power_values(v: np.ndarray, a: float) -> np.ndarray:
    """Pointwise power with positivity guard; see pointwise_power."""
    a = float(a)
    if a == 1.0:
        return v.copy()
    if not float(a).is_integer():
        if np.any(v <= 0.0):
            raise NegativeBase(
                f"non-integer exponent {a} on a field with min value {v.min():.3e}"
            )
        return np.power(v, a)
    out = np.power(v, a)
    if not np.all(np.isfinite(out)):
        # only reachable for negative integer exponents on a zero value
        raise NegativeBase(f"integer exponent {a} produced a non-finite value")
    return out


def pointwise_power(f: GridFunction, a: float) -> GridFunction:
    """Pointwise power f^a.

    Non-integer exponents require strictly positive values; violating that
    raises NegativeBase, as does any non-finite result for integer
    exponents (a zero value under a negative power).
    """
    return grid_function(f.grid, _power_values(f.values, a))
