"""Spatial discretization of the drift and the conservative noise operator.

Everything is written in flux form on the staggered face mesh: face j
carries the flux through x_{j+1/2}, and nodal tendencies are exact face
differences, so discrete mass is conserved to machine precision by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functionals import ModelParams
from .grid import GridFunction, PeriodicGrid, _power_values, grid_function
from .noise import NoiseSpectrum, basis_eval

__all__ = [
    "FluxField",
    "pressure",
    "drift",
    "noise_operator",
    "face_diff",
    "face_mean",
    "divergence",
]


@dataclass(frozen=True)
class FluxField:
    """Face values w_{j+1/2}; entry j lives between nodes j and j+1."""

    grid: PeriodicGrid
    values: np.ndarray = field(repr=False, compare=False)

    def divergence(self) -> GridFunction:
        """Nodal divergence (w_{i+1/2} - w_{i-1/2}) / dx."""
        return grid_function(self.grid, divergence(self.values, self.grid.dx))


def face_diff(v: np.ndarray, dx: float) -> np.ndarray:
    """(v_{j+1} - v_j) / dx at face j."""
    return (np.roll(v, -1) - v) / dx


def face_mean(v: np.ndarray) -> np.ndarray:
    """(v_j + v_{j+1}) / 2 at face j."""
    return 0.5 * (v + np.roll(v, -1))


def divergence(w: np.ndarray, dx: float) -> np.ndarray:
    """(w_j - w_{j-1}) / dx at node j, periodic."""
    return (w - np.roll(w, 1)) / dx


def _pressure_values(v: np.ndarray, dx: float, params: ModelParams) -> np.ndarray:
    lap = (np.roll(v, -1) - 2.0 * v + np.roll(v, 1)) / dx**2
    if params.eps > 0.0:
        return -lap - params.eps * params.p * _power_values(v, -params.p - 1.0)
    return -lap


def pressure(f: GridFunction, params: ModelParams) -> GridFunction:
    """Nodal pressure -f_xx + eps * d/du [u^(-p)] evaluated at f."""
    return grid_function(f.grid, _pressure_values(f.values, f.grid.dx, params))


def _drift_values(v: np.ndarray, dx: float, params: ModelParams,
                  forcing: np.ndarray | None = None) -> np.ndarray:
    pr = _pressure_values(v, dx, params)
    vf = face_mean(v)
    mob = _power_values(vf, params.n)
    mob_corr = _power_values(vf, params.n - 2.0)
    flux = mob * face_diff(pr, dx)
    flux += (params.c_strat + params.S) * mob_corr * face_diff(v, dx)
    out = divergence(flux, dx)
    if forcing is not None:
        out = out + forcing
    return out


def drift(f: GridFunction, params: ModelParams,
          forcing: GridFunction | None = None) -> GridFunction:
    """Deterministic tendency in conservative flux form.

    Face flux
        Phi_{j+1/2} = M_{j+1/2} (p_{j+1} - p_j)/dx
                    + (c_strat + S) Mc_{j+1/2} (f_{j+1} - f_j)/dx

    with mobilities M = ((f_j + f_{j+1})/2)^n and
    Mc = ((f_j + f_{j+1})/2)^(n-2); the tendency is the face divergence of
    Phi plus the optional forcing.
    """
    fv = None if forcing is None else forcing.values
    return grid_function(f.grid, _drift_values(f.values, f.grid.dx, params, fv))


def _basis_face_matrix(spectrum: NoiseSpectrum, grid: PeriodicGrid) -> np.ndarray:
    """Rows are lambda_k * g_k evaluated at the faces, k = -K..K."""
    faces = grid.faces
    rows = [spectrum.lam(k) * basis_eval(k, faces, spectrum.L) for k in spectrum.ks]
    return np.asarray(rows)


def _noise_values(v: np.ndarray, dx: float, n: float, increments: np.ndarray,
                  weighted_basis: np.ndarray) -> np.ndarray:
    half_pow = _power_values(v, 0.5 * n)
    face_pow = face_mean(half_pow)
    w = (increments @ weighted_basis) * face_pow
    return divergence(w, dx)


def noise_operator(f: GridFunction, increments: np.ndarray,
                   spectrum: NoiseSpectrum, n: float) -> GridFunction:
    """Conservative noise increment for one step.

    Face amplitude
        w_{j+1/2} = sum_k lambda_k dbeta_k g_k(x_{j+1/2})
                    (f_j^(n/2) + f_{j+1}^(n/2)) / 2

    returned as the face divergence of w.  The increments vector must be
    ordered k = -K..K like the spectrum.
    """
    increments = np.asarray(increments, dtype=float)
    if increments.shape != (2 * spectrum.K + 1,):
        raise ValueError(
            f"expected {2 * spectrum.K + 1} increments, got {increments.shape}"
        )
    wb = _basis_face_matrix(spectrum, f.grid)
    return grid_function(f.grid, _noise_values(f.values, f.grid.dx, n, increments, wb))
