"""Scalar functionals, inequality diagnostics, and admissibility constants.

Everything here consumes GridFunctions and model parameters and produces
plain floats or small JSON-friendly reports; no time stepping happens in
this module.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    AlphaOutOfRange,
    AlphaSingular,
    MobilityOutOfRange,
    NonPositiveField,
)
from .grid import GridFunction, _deriv_values, _power_values, integrate
from .noise import s_thresholds

__all__ = [
    "ModelParams",
    "FunctionalReport",
    "mass",
    "energy_eps",
    "entropy",
    "alpha_entropy",
    "weighted_integral",
    "bernis_check",
    "positivity_bound_check",
    "gamma_range",
    "estimate_constants",
    "min_and_support",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical and regularization parameters of the model.

    n       mobility exponent, in (2, 3)
    p       potential exponent, > 2
    eps     strength of the positivity potential, >= 0
    S       extra linear diffusion strength, >= 0
    c_strat Stratonovich drift constant of the chosen spectrum, >= 0
    """

    n: float
    p: float = 4.0
    eps: float = 0.0
    S: float = 0.0
    c_strat: float = 0.0

    def __post_init__(self):
        if not (2.0 < self.n < 3.0):
            raise MobilityOutOfRange(
                f"mobility exponent must lie in (2, 3), got n={self.n}"
            )
        if not (self.p > 2.0):
            raise ValueError(f"potential exponent must be > 2, got p={self.p}")
        for name in ("eps", "S", "c_strat"):
            v = getattr(self, name)
            if v < 0.0 or not math.isfinite(v):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def validate_strict(self) -> None:
        """Require S above the sharp admissibility threshold."""
        _, s_star = s_thresholds(self.n, self.c_strat)
        if not (self.S > s_star):
            raise ValueError(
                f"strict validation needs S > {s_star:.6g}, got S={self.S}"
            )


@dataclass(frozen=True)
class FunctionalReport:
    """Named scalar result with free-form metadata."""

    name: str
    value: float
    metadata: dict = dc_field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"name": self.name, "value": self.value, "metadata": self.metadata},
            sort_keys=True,
        )


def mass(f: GridFunction) -> float:
    """Total mass integral of f."""
    return integrate(f)


def energy_eps(f: GridFunction, params: ModelParams) -> float:
    """Regularized energy (1/2) int f_x^2 + eps int f^(-p).

    The potential term is skipped entirely when eps = 0; for eps > 0 a
    non-positive field raises NegativeBase from the power.
    """
    dx = f.grid.dx
    fx = _deriv_values(f.values, dx, 1)
    e = 0.5 * float(np.sum(fx**2)) * dx
    if params.eps > 0.0:
        e += params.eps * float(np.sum(_power_values(f.values, -params.p))) * dx
    return e


def _entropy_density(v: np.ndarray, n: float) -> np.ndarray:
    return (
        v ** (2.0 - n) / ((n - 1.0) * (n - 2.0))
        + v / (n - 1.0)
        - 1.0 / (n - 2.0)
    )


def entropy(f: GridFunction, n: float) -> float:
    """Mobility entropy int G(f) with G''(u) = u^(-n) and G(1) = G'(1) = 0."""
    if np.any(f.values <= 0.0):
        raise NonPositiveField(
            f"entropy needs a strictly positive field, min={f.values.min():.3e}"
        )
    return float(np.sum(_entropy_density(f.values, n))) * f.grid.dx


def _alpha_entropy_density(v: np.ndarray, alpha: float) -> np.ndarray:
    return (
        v ** (alpha + 1.0) / (alpha * (alpha + 1.0))
        - v / alpha
        + 1.0 / (alpha + 1.0)
    )


def alpha_entropy(f: GridFunction, alpha: float) -> float:
    """Power entropy int G_a(f) with G_a''(u) = u^(a-1) and G_a(1) = 0.

    The exponents 0 and -1 are removable singularities of the coefficient
    and are rejected.
    """
    if alpha == 0.0 or alpha == -1.0:
        raise AlphaSingular(f"power entropy undefined at alpha={alpha}")
    if np.any(f.values <= 0.0):
        raise NonPositiveField(
            f"power entropy needs a strictly positive field, min={f.values.min():.3e}"
        )
    return float(np.sum(_alpha_entropy_density(f.values, alpha))) * f.grid.dx


def weighted_integral(f: GridFunction, a: float, m: int, q: float) -> float:
    """int f^a |d^m f / dx^m|^q by rectangle quadrature."""
    dx = f.grid.dx
    w = _power_values(f.values, a)
    d = np.abs(_deriv_values(f.values, dx, m)) ** q
    return float(np.sum(w * d)) * dx


def bernis_check(f: GridFunction, zeta: GridFunction, n: float,
                 pos_floor: float | None = None) -> FunctionalReport:
    """Weighted inequality diagnostics for the three nonlinear gradient powers.

    Computes

        lhs1 = int zeta^6 |(f^((n+2)/6))_x|^6
        lhs2 = int zeta^6 |(f^((n+2)/3))_xx|^3
        lhs3 = int zeta^6 |(f^((n+2)/2))_xxx|^2
        rhs1 = int_{f > floor} zeta^6 f^n |f_xxx|^2
        rhs2 = int |zeta_x|^6 f^(n+2)

    and reports ratio_i = lhs_i / (rhs1 + rhs2).  Third-derivative
    integrals (lhs3 and rhs1) are restricted to nodes with f > floor;
    fractional powers clamp negative values at zero.  A 0/0 ratio is
    reported as 0 and flagged degenerate.
    """
    if f.grid != zeta.grid:
        raise ValueError("field and cutoff must share a grid")
    dx = f.grid.dx
    v = np.maximum(f.values, 0.0)
    if pos_floor is None:
        pos_floor = 1e-8 * float(v.max())
    live = f.values > pos_floor
    z6 = zeta.values**6
    zx6 = np.abs(_deriv_values(zeta.values, dx, 1)) ** 6

    lhs1 = float(np.sum(z6 * np.abs(_deriv_values(v ** ((n + 2.0) / 6.0), dx, 1)) ** 6)) * dx
    lhs2 = float(np.sum(z6 * np.abs(_deriv_values(v ** ((n + 2.0) / 3.0), dx, 2)) ** 3)) * dx
    d3 = _deriv_values(v ** ((n + 2.0) / 2.0), dx, 3)
    lhs3 = float(np.sum(z6[live] * d3[live] ** 2)) * dx
    fxxx = _deriv_values(f.values, dx, 3)
    rhs1 = float(np.sum(z6[live] * v[live] ** n * fxxx[live] ** 2)) * dx
    rhs2 = float(np.sum(zx6 * v ** (n + 2.0))) * dx

    denom = rhs1 + rhs2
    ratios = []
    degenerate = []
    for lhs in (lhs1, lhs2, lhs3):
        if denom == 0.0:
            ratios.append(0.0 if lhs == 0.0 else math.inf)
            degenerate.append(lhs == 0.0)
        else:
            ratios.append(lhs / denom)
            degenerate.append(False)
    return FunctionalReport(
        name="bernis_check",
        value=max(ratios),
        metadata={
            "lhs1": lhs1, "lhs2": lhs2, "lhs3": lhs3,
            "rhs1": rhs1, "rhs2": rhs2,
            "ratio1": ratios[0], "ratio2": ratios[1], "ratio3": ratios[2],
            "degenerate": degenerate,
            "pos_floor": pos_floor,
            "clipped_nodes": int(np.sum(f.values < 0.0)),
        },
    )


def positivity_bound_check(f: GridFunction, params: ModelParams) -> FunctionalReport:
    """Empirical constants of the minimum bound for positive fields.

    chat  = (max 1/f - (mean f)^(-1)) / (eps^(1/(2-p)) H^(2/(p-2)))
    cbar  = min f / (eps^(1/(p-2)) sigma^(2/(p-2))),  sigma = 1/max(1, H)

    with H the regularized energy of f; requires eps > 0 and f > 0.
    """
    if params.eps <= 0.0:
        raise ValueError("positivity bound check needs eps > 0")
    v = f.values
    if np.any(v <= 0.0):
        raise NonPositiveField(
            f"positivity bound check needs f > 0, min={v.min():.3e}"
        )
    p = params.p
    h = energy_eps(f, params)
    mean = mass(f) / f.grid.L
    numerator = float(np.max(1.0 / v)) - 1.0 / mean
    denom = params.eps ** (1.0 / (2.0 - p)) * h ** (2.0 / (p - 2.0))
    chat = numerator / denom
    sigma = 1.0 / max(1.0, h)
    cbar = float(v.min()) / (params.eps ** (1.0 / (p - 2.0)) * sigma ** (2.0 / (p - 2.0)))
    return FunctionalReport(
        name="positivity_bound_check",
        value=chat,
        metadata={
            "chat": chat, "cbar": cbar, "energy_eps": h,
            "mean": mean, "min": float(v.min()),
        },
    )


def gamma_range(alpha: float, n: float) -> tuple[float, float]:
    """Admissible window of auxiliary exponents for the power-entropy estimate.

    For t = alpha + n in [1/2, 2] the window is
    (t + 1 -+ sqrt((t - 2)(1 - 2t))) / 3; alpha must avoid 0 and -1.
    """
    if not (2.0 < n < 3.0):
        raise MobilityOutOfRange(f"mobility exponent must lie in (2, 3), got n={n}")
    if alpha == 0.0 or alpha == -1.0:
        raise AlphaOutOfRange(f"alpha={alpha} is a singular exponent")
    t = alpha + n
    if not (0.5 <= t <= 2.0):
        raise AlphaOutOfRange(
            f"alpha must lie in [1/2 - n, 2 - n] = [{0.5 - n}, {2.0 - n}], got {alpha}"
        )
    root = math.sqrt((t - 2.0) * (1.0 - 2.0 * t))
    return ((t + 1.0 - root) / 3.0, (t + 1.0 + root) / 3.0)


def estimate_constants(n: float, S: float, c_strat: float,
                       mu: float = 0.05, eta: float = 1e-3) -> FunctionalReport:
    """Coefficients of the combined energy-entropy bound.

    c1 = mu S |(n-2)(n-3)| / 3 - eta
    c2 = S + S (1 - mu) 3 (n-2)/(3-n) - c_strat 9 (n-2)^2 / (4 (3-n)^2)

    The report's "admissible" flag is c1 > 0 and c2 > 0.  As mu, eta -> 0
    the sign of c2 reproduces the sharp S threshold.
    """
    if not (2.0 < n < 3.0):
        raise MobilityOutOfRange(f"mobility exponent must lie in (2, 3), got n={n}")
    if not (0.0 <= mu < 1.0):
        raise ValueError(f"splitting weight mu must lie in [0, 1), got {mu}")
    c1 = mu * S * abs((n - 2.0) * (n - 3.0)) / 3.0 - eta
    c2 = (
        S
        + S * (1.0 - mu) * 3.0 * (n - 2.0) / (3.0 - n)
        - c_strat * 9.0 * (n - 2.0) ** 2 / (4.0 * (3.0 - n) ** 2)
    )
    return FunctionalReport(
        name="estimate_constants",
        value=min(c1, c2),
        metadata={
            "c1": c1, "c2": c2,
            "admissible": bool(c1 > 0.0 and c2 > 0.0),
            "mu": mu, "eta": eta,
        },
    )


def min_and_support(f: GridFunction, threshold: float) -> tuple[float, float]:
    """(min of f, measure of {f > threshold}) with dx-weighted counting."""
    v = f.values
    return (float(v.min()), float(np.count_nonzero(v > threshold)) * f.grid.dx)
