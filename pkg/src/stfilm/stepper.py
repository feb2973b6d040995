"""Semi-implicit Euler-Maruyama stepping with positivity rejection.

One step treats the fourth-order surface-tension flux and the linear
correction flux implicitly with mobilities lagged at the current state,
and the potential flux, forcing, and noise explicitly:

    (I + dt A) u+ = u + dt (potential flux divergence + forcing) + noise

where A v = -div(M grad p_lin(v)) - (c_strat + S) div(Mc grad v) and
p_lin(v) = -lap v is the linear part of the pressure.  The system is a
cyclic pentadiagonal matrix solved directly each attempt.  Steps whose
solution loses positivity are rejected: dt is halved and the noise is
resampled from a fresh counter (no rollback), failing below dt_min.
Trajectories freeze in place once the regularized energy crosses
1/sigma_stop; frozen states keep being recorded until the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .banded import solve_cyclic_banded
from .dynamics import _basis_face_matrix, divergence, face_diff, face_mean, _noise_values, _pressure_values
from .errors import LinearSolveFailure, StepFailure
from .functionals import ModelParams, _alpha_entropy_density, _entropy_density
from .grid import GridFunction, PeriodicGrid, _deriv_values, _power_values, grid_function
from .noise import NoiseSpectrum, RngStream, sample_increments

__all__ = [
    "SolverConfig",
    "TrajectoryState",
    "StepStats",
    "FunctionalSeries",
    "Trajectory",
    "step",
    "advance",
    "CUMULATIVE_NAMES",
]

_TIME_SNAP = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Everything one trajectory needs besides its initial state.

    pos_floor is relative: a solution is rejected when any value drops to
    or below pos_floor * max(u+).  forcing, if given, is called as
    forcing(t, grid) and must return nodal values; it is evaluated
    explicitly at the start of each step.
    """

    params: ModelParams
    grid: PeriodicGrid
    spectrum: NoiseSpectrum
    dt0: float
    T: float
    delta: float = 0.0
    sigma_stop: float = 1e-2
    dt_min: float | None = None
    record_every: int = 1
    pos_floor: float = 1e-10
    solver_tol: float = 1e-12
    alpha: float | None = None
    forcing: Optional[Callable] = None

    def __post_init__(self):
        if not (self.dt0 > 0.0 and self.T > 0.0):
            raise ValueError("dt0 and T must be positive")
        if not (0.0 < self.sigma_stop <= 1.0):
            raise ValueError(f"sigma_stop must lie in (0, 1], got {self.sigma_stop}")
        if self.dt_min is None:
            object.__setattr__(self, "dt_min", self.dt0 * 2.0**-40)
        if self.dt_min > self.dt0:
            raise ValueError("dt_min must not exceed dt0")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.solver_tol > 1e-10:
            raise ValueError("solver_tol must be <= 1e-10")
        if self.delta < 0.0 or self.pos_floor < 0.0:
            raise ValueError("delta and pos_floor must be >= 0")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 1.0 - self.params.n)

    @property
    def energy_stop(self) -> float:
        """Energy level at which a trajectory freezes."""
        return 1.0 / self.sigma_stop


@dataclass
class TrajectoryState:
    """Mutable per-trajectory state between steps."""

    t: float
    u: GridFunction
    dt: float
    frozen: bool
    t_sigma: float | None
    rng: RngStream


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0


class FunctionalSeries:
    """Recorded functional values: one row per record time."""

    def __init__(self, names):
        self.times: list[float] = []
        self.columns: dict[str, list[float]] = {name: [] for name in names}

    def append(self, t: float, row: dict) -> None:
        self.times.append(t)
        for name, column in self.columns.items():
            column.append(row[name])

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name])

    def __len__(self) -> int:
        return len(self.times)


@dataclass
class Trajectory:
    """Result of advancing one trajectory to the horizon."""

    trajectory_id: int
    series: FunctionalSeries
    final_state: TrajectoryState
    stats: StepStats
    degenerate: bool
    frozen: bool
    t_sigma: float | None


# cumulative time integrals accumulated every accepted step (trapezoid)
CUMULATIVE_NAMES = (
    "cum_dissipation",          # int u^n p_x^2            (face fluxes)
    "cum_grad4",                # int u^(n-4) u_x^4
    "cum_hess2_weighted",       # int u^(n-2) u_xx^2
    "cum_hess2",                # int u_xx^2
    "cum_grad2_inv",            # int u^(-2) u_x^2
    "cum_pot_grad2",            # int eps F''(u) u_x^2
    "cum_pot_grad2_weighted",   # int eps F''(u) u^(n-2) u_x^2
    "cum_bernis_grad6",         # int |(u^((n+2)/6))_x|^6
    "cum_bernis_hess3",         # int |(u^((n+2)/3))_xx|^3
    "cum_bernis_third2",        # int |(u^((n+2)/2))_xxx|^2
    "cum_quarter_grad4",        # int ((u^(n/4))_x)^4
)

RECORD_COLUMNS = (
    "mass", "energy", "energy_eps", "entropy", "alpha_entropy",
    "dissipation", "min_u", "max_u", "support_length",
    "support_left", "support_right",
)


class _StepperCache:
    """Per-trajectory precomputations shared by every step."""

    def __init__(self, config: SolverConfig):
        self.weighted_basis = _basis_face_matrix(config.spectrum, config.grid)
        self.silent = bool(np.all(np.asarray(config.spectrum.lambdas) == 0.0))


def _system_diagonals(u: np.ndarray, dt: float, config: SolverConfig):
    """Diagonals of I + dt A with mobilities lagged at u."""
    params = config.params
    h = config.grid.dx
    m = _power_values(face_mean(u), params.n)
    mr = np.roll(m, 1)
    cs = params.c_strat + params.S
    h4 = dt / h**4
    a_m2 = h4 * mr
    a_p2 = h4 * m
    a_m1 = h4 * (-m - 3.0 * mr)
    a_p1 = h4 * (-3.0 * m - mr)
    a_0 = 1.0 + h4 * 3.0 * (m + mr)
    if cs > 0.0:
        c = _power_values(face_mean(u), params.n - 2.0)
        cr = np.roll(c, 1)
        h2 = dt * cs / h**2
        a_m1 = a_m1 - h2 * cr
        a_p1 = a_p1 - h2 * c
        a_0 = a_0 + h2 * (c + cr)
    return (a_m2, a_m1, a_0, a_p1, a_p2)


def _explicit_tendency(u: np.ndarray, t: float, config: SolverConfig) -> np.ndarray | None:
    """Potential flux divergence plus forcing, both explicit."""
    params = config.params
    h = config.grid.dx
    out = None
    if params.eps > 0.0:
        phi = -params.eps * params.p * _power_values(u, -params.p - 1.0)
        mob = _power_values(face_mean(u), params.n)
        out = divergence(mob * face_diff(phi, h), h)
    if config.forcing is not None:
        f = np.asarray(config.forcing(t, config.grid), dtype=float)
        out = f if out is None else out + f
    return out


def _attempt_until_accept(u: np.ndarray, dt: float, t: float,
                          config: SolverConfig, cache: _StepperCache,
                          rng: RngStream, stats: StepStats):
    """Try decreasing step sizes until positivity holds.

    Returns (u_new, dt_accepted).  Every attempt consumes a fresh noise
    counter; nothing is ever rolled back.
    """
    params = config.params
    grid = config.grid
    h = grid.dx
    mass_target = float(np.sum(u)) * h
    while True:
        if dt < config.dt_min:
            raise StepFailure(
                f"step size underflow at t={t:.6g}: dt={dt:.3e} < dt_min={config.dt_min:.3e}"
            )
        rhs = u.copy()
        explicit = _explicit_tendency(u, t, config)
        if explicit is not None:
            rhs += dt * explicit
        if not cache.silent:
            incr = sample_increments(config.spectrum, dt, rng)
            rhs += _noise_values(u, h, params.n, incr, cache.weighted_basis)
        diags = _system_diagonals(u, dt, config)
        try:
            u_new = solve_cyclic_banded(diags, rhs, tol=config.solver_tol)
        except LinearSolveFailure:
            u_new = None
        if u_new is not None:
            # exact mass projection: the direct solve is accurate to
            # solver_tol, the uniform shift removes the residual sum so
            # mass cannot drift
            u_new += (mass_target - float(np.sum(u_new)) * h) / grid.L
            if np.min(u_new) > config.pos_floor * np.max(u_new):
                return u_new, dt
        stats.rejected += 1
        dt *= 0.5


def step(state: TrajectoryState, config: SolverConfig,
         cache: _StepperCache | None = None,
         stats: StepStats | None = None) -> TrajectoryState:
    """Advance one accepted step (resolving any rejections internally).

    A frozen state only advances its clock.  On acceptance the nominal
    step grows by a factor 1.2, never above dt0.
    """
    if cache is None:
        cache = _StepperCache(config)
    if stats is None:
        stats = StepStats()
    if state.frozen:
        return replace(state, t=state.t + state.dt)
    u_new, dt_acc = _attempt_until_accept(
        state.u.values, state.dt, state.t, config, cache, state.rng, stats
    )
    stats.accepted += 1
    t_new = state.t + dt_acc
    gf = grid_function(config.grid, u_new)
    frozen = _energy_eps_values(u_new, config) >= config.energy_stop
    return TrajectoryState(
        t=t_new,
        u=gf,
        dt=min(dt_acc * 1.2, config.dt0),
        frozen=frozen,
        t_sigma=t_new if frozen else None,
        rng=state.rng,
    )


def _energy_eps_values(u: np.ndarray, config: SolverConfig) -> float:
    params = config.params
    h = config.grid.dx
    ux = _deriv_values(u, h, 1)
    e = 0.5 * float(np.sum(ux**2)) * h
    if params.eps > 0.0:
        if np.min(u) <= 0.0:
            return math.inf
        e += params.eps * float(np.sum(_power_values(u, -params.p))) * h
    return e


def _record_row(u: np.ndarray, config: SolverConfig) -> dict:
    """All per-time functionals of the record schema."""
    params = config.params
    h = config.grid.dx
    ux = _deriv_values(u, h, 1)
    energy = 0.5 * float(np.sum(ux**2)) * h
    umin = float(np.min(u))
    umax = float(np.max(u))
    positive = umin > 0.0
    energy_e = energy
    if params.eps > 0.0:
        energy_e = energy + (
            params.eps * float(np.sum(_power_values(u, -params.p))) * h
            if positive else math.inf
        )
    ent = float(np.sum(_entropy_density(u, params.n))) * h if positive else math.inf
    aent = (
        float(np.sum(_alpha_entropy_density(u, config.alpha))) * h
        if positive else math.inf
    )
    pr = _pressure_values(u, h, params) if positive or params.eps == 0.0 else None
    if pr is not None:
        mob = _power_values(face_mean(u), params.n) if positive else face_mean(u) ** params.n
        dissipation = float(np.sum(mob * face_diff(pr, h) ** 2)) * h
    else:
        dissipation = math.inf
    threshold = config.pos_floor * umax
    above = u > threshold
    count = int(np.count_nonzero(above))
    left, right = _support_endpoints(above, h)
    return {
        "mass": float(np.sum(u)) * h,
        "energy": energy,
        "energy_eps": energy_e,
        "entropy": ent,
        "alpha_entropy": aent,
        "dissipation": dissipation,
        "min_u": umin,
        "max_u": umax,
        "support_length": count * h,
        "support_left": left,
        "support_right": right,
    }


def _support_endpoints(above: np.ndarray, h: float) -> tuple[float, float]:
    """Leftmost/rightmost coordinates of the above-threshold set.

    On the circle the support is read as the complement of the longest
    below-threshold gap; a full or empty support returns the whole domain
    or NaNs respectively.
    """
    n = above.size
    count = int(np.count_nonzero(above))
    if count == 0:
        return (math.nan, math.nan)
    if count == n:
        return (0.0, (n - 1) * h)
    below = np.flatnonzero(~above)
    # longest circular run of consecutive below indices
    runs = np.split(below, np.flatnonzero(np.diff(below) > 1) + 1)
    if len(runs) > 1 and below[0] == 0 and below[-1] == n - 1:
        runs[0] = np.concatenate([runs[-1], runs[0]])
        runs.pop()
    gap = max(runs, key=len)
    start = (int(gap[-1]) + 1) % n
    end = (int(gap[0]) - 1) % n
    return (start * h, end * h)


def _step_integrands(u: np.ndarray, config: SolverConfig) -> np.ndarray:
    """Values of the cumulative integrands at one state, CUMULATIVE_NAMES order."""
    params = config.params
    h = config.grid.dx
    n = params.n
    if np.min(u) <= 0.0:
        return np.full(len(CUMULATIVE_NAMES), math.inf)
    ux = _deriv_values(u, h, 1)
    uxx = _deriv_values(u, h, 2)
    pr = _pressure_values(u, h, params)
    mob = _power_values(face_mean(u), n)
    diss = float(np.sum(mob * face_diff(pr, h) ** 2)) * h
    pot = (
        params.eps * params.p * (params.p + 1.0) * _power_values(u, -params.p - 2.0)
        if params.eps > 0.0 else None
    )

    def s(values):
        return float(np.sum(values)) * h

    return np.array([
        diss,
        s(_power_values(u, n - 4.0) * ux**4),
        s(_power_values(u, n - 2.0) * uxx**2),
        s(uxx**2),
        s(_power_values(u, -2.0) * ux**2),
        s(pot * ux**2) if pot is not None else 0.0,
        s(pot * _power_values(u, n - 2.0) * ux**2) if pot is not None else 0.0,
        s(np.abs(_deriv_values(_power_values(u, (n + 2.0) / 6.0), h, 1)) ** 6),
        s(np.abs(_deriv_values(_power_values(u, (n + 2.0) / 3.0), h, 2)) ** 3),
        s(_deriv_values(_power_values(u, (n + 2.0) / 2.0), h, 3) ** 2),
        s(_deriv_values(_power_values(u, n / 4.0), h, 1) ** 4),
    ])


def advance(config: SolverConfig, u0: GridFunction, stream: RngStream | None = None,
            observers=(), trajectory_id: int = 0) -> Trajectory:
    """Run one trajectory to the horizon T.

    Records every record_every-th accepted step and at T; the recording
    clock is aligned to multiples of record_every * dt0, with steps
    clamped so every trajectory of an ensemble records at identical
    times.  Cumulative integrals stop accumulating once frozen; records
    after t_sigma repeat the frozen row.  On step-size underflow the
    partial trajectory is returned with degenerate=True.
    """
    if stream is None:
        stream = RngStream(base_seed=0, trajectory_id=trajectory_id)
    cache = _StepperCache(config)
    stats = StepStats()
    names = RECORD_COLUMNS + CUMULATIVE_NAMES
    series = FunctionalSeries(names)
    u = np.array(u0.values, dtype=float)
    t = 0.0
    dt_nom = config.dt0
    rec_dt = config.record_every * config.dt0
    cums = np.zeros(len(CUMULATIVE_NAMES))
    prev_integrands = _step_integrands(u, config)

    def record(time: float, values: np.ndarray) -> None:
        row = _record_row(values, config)
        for name, val in zip(CUMULATIVE_NAMES, cums):
            row[name] = float(val)
        series.append(time, row)

    for obs in observers:
        obs.start(t, u)
    frozen = _energy_eps_values(u, config) >= config.energy_stop
    t_sigma = 0.0 if frozen else None
    record(0.0, u)
    for obs in observers:
        obs.on_record(0.0, u)
    degenerate = False

    k_rec = 1
    while not frozen and t < config.T - _TIME_SNAP * config.T:
        t_event = min(k_rec * rec_dt, config.T)
        gap = t_event - t
        # stretch the step onto the event rather than leave a rounding
        # sliver behind; the stretch is at most one part in 1e-9
        landing = gap <= dt_nom * (1.0 + 1e-9)
        dt_use = gap if landing else dt_nom
        try:
            u_new, dt_acc = _attempt_until_accept(
                u, dt_use, t, config, cache, stream, stats
            )
        except StepFailure:
            degenerate = True
            if t > series.times[-1]:
                record(t, u)
                for obs in observers:
                    obs.on_record(t, u)
            break
        stats.accepted += 1
        t_new = t_event if landing and dt_acc == dt_use else t + dt_acc
        integrands = _step_integrands(u_new, config)
        cums += 0.5 * dt_acc * (prev_integrands + integrands)
        for obs in observers:
            obs.on_step(t, u, t_new, u_new, dt_acc)
        prev_integrands = integrands
        u = u_new
        t = t_new
        # rejections shrink the nominal step, clean full-size accepts grow
        # it, accepts clamped short by the record schedule say nothing
        if dt_acc < min(dt_nom, dt_use):
            dt_nom = dt_acc
        elif dt_acc >= dt_nom:
            dt_nom = min(dt_nom * 1.2, config.dt0)
        if _energy_eps_values(u, config) >= config.energy_stop:
            frozen = True
            t_sigma = t
        # record only on the shared schedule so ensemble rows stay aligned
        if t == t_event:
            record(t, u)
            for obs in observers:
                obs.on_record(t, u)
            if t_event == k_rec * rec_dt:
                k_rec += 1

    if frozen and not degenerate:
        # absorbing state: emit the frozen row on the remaining schedule
        while k_rec * rec_dt < config.T - _TIME_SNAP * config.T:
            t_k = k_rec * rec_dt
            if t_k > t + _TIME_SNAP * max(1.0, t_k):
                record(t_k, u)
                for obs in observers:
                    obs.on_record(t_k, u)
            k_rec += 1
        if series.times[-1] < config.T - _TIME_SNAP * config.T:
            record(config.T, u)
            for obs in observers:
                obs.on_record(config.T, u)

    for obs in observers:
        obs.finish()

    final = TrajectoryState(
        t=t, u=grid_function(config.grid, u), dt=dt_nom,
        frozen=frozen, t_sigma=t_sigma, rng=stream,
    )
    return Trajectory(
        trajectory_id=trajectory_id,
        series=series,
        final_state=final,
        stats=stats,
        degenerate=degenerate,
        frozen=frozen,
        t_sigma=t_sigma,
    )
