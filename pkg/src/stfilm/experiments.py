"""Ensemble drivers and the statistical verification harness.

Everything here sits on top of the stepper: Monte Carlo ensembles with
per-trajectory counter-based streams, the pathwise budget identities for
energy and entropy (drift terms plus second-order correction against the
recorded functional), the martingale/quadratic-variation consistency
test for the conservative noise, uniformity sweeps in the regularization
parameters, a battery of functional-inequality spot checks on random
positive fields, and deterministic manufactured-solution convergence
studies.  All reports are plain dataclasses that serialize naturally.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .banded import solve_cyclic_banded
from .dynamics import _basis_face_matrix, _pressure_values, face_diff, face_mean
from .errors import ConfigError
from .functionals import ModelParams, bernis_check, positivity_bound_check
from .grid import (
    GridFunction,
    PeriodicGrid,
    _deriv_values,
    _power_values,
    grid_function,
    make_grid,
)
from .noise import RngStream, build_spectrum, onb_relation_values, theta_sums
from .stepper import (
    CUMULATIVE_NAMES,
    RECORD_COLUMNS,
    SolverConfig,
    Trajectory,
    _system_diagonals,
    advance,
)

__all__ = [
    "InitialDatum",
    "EnsembleSummary",
    "run_ensemble",
    "BudgetReport",
    "ito_budget",
    "QvReport",
    "martingale_qv_test",
    "SweepReport",
    "estimate_sweep",
    "BatteryReport",
    "inequality_battery",
    "MmsReport",
    "mms_convergence",
    "SupportReport",
    "support_diagnostic",
]

_DATUM_KINDS = ("constant", "perturbed-constant", "bump")


@dataclass(frozen=True)
class InitialDatum:
    """Recipe for the initial film profile.

    kinds: "constant" (height), "perturbed-constant" (height plus a
    single cosine of amplitude `perturbation` centered at `center`),
    "bump" (compactly supported cos^4 profile of the given width).  The
    shift by delta_shift is applied last.  With randomize_height the
    height is drawn uniformly from [height/2, height] using the
    trajectory's stream before any stepping noise is consumed.
    """

    kind: str
    height: float = 1.0
    width: float = 0.5
    center: float = 0.5
    perturbation: float = 0.0
    delta_shift: float = 0.0
    randomize_height: bool = False

    def __post_init__(self):
        if self.kind not in _DATUM_KINDS:
            raise ConfigError(
                f"unknown initial datum kind {self.kind!r}, expected one of {_DATUM_KINDS}"
            )
        if not (self.height > 0.0 and math.isfinite(self.height)):
            raise ConfigError(f"height must be positive, got {self.height}")
        if self.delta_shift < 0.0:
            raise ConfigError(f"delta_shift must be >= 0, got {self.delta_shift}")
        if self.kind == "bump" and self.width <= 0.0:
            raise ConfigError(f"bump width must be positive, got {self.width}")

    def build(self, grid: PeriodicGrid, stream: RngStream | None = None) -> GridFunction:
        h = self.height
        if self.randomize_height:
            if stream is None:
                raise ConfigError("randomize_height needs an RngStream")
            h = stream.uniform(0.5 * self.height, self.height)
        x = grid.nodes
        if self.kind == "constant":
            v = np.full(grid.N, h)
        elif self.kind == "perturbed-constant":
            v = h + self.perturbation * np.cos(2.0 * np.pi * (x - self.center) / grid.L)
        else:
            d = np.abs((x - self.center + 0.5 * grid.L) % grid.L - 0.5 * grid.L)
            v = np.where(
                d <= 0.5 * self.width,
                h * np.cos(np.pi * d / self.width) ** 4,
                0.0,
            )
        v = v + self.delta_shift
        if np.min(v) < 0.0:
            raise ConfigError(
                f"initial datum dips negative (min {np.min(v):.3e}); "
                "reduce the perturbation or add a shift"
            )
        return grid_function(grid, v)


# columns with a meaningful "sup over recorded times" statistic
_SUP_COLUMNS = tuple(
    name for name in RECORD_COLUMNS + CUMULATIVE_NAMES
    if name not in ("support_left", "support_right")
)


@dataclass
class EnsembleSummary:
    """Per-time and per-trajectory statistics of an ensemble.

    mean/se/minimum/maximum and the q-th raw moments are arrays over the
    shared record times.  sup_moments[name][q] is (estimate, standard
    error) of the q-th moment of the over-time maximum, the discrete
    stand-in for moments of sup_t.  Degenerate trajectories are excluded
    from all statistics and only counted.
    """

    times: np.ndarray
    count: int
    valid_count: int
    mean: dict
    se: dict
    minimum: dict
    maximum: dict
    moments: dict
    sup_moments: dict
    frozen_count: int
    degenerate_count: int
    t_sigma: list
    trajectories: list | None = None
    observer_payloads: list | None = None


def _run_single(task):
    """Worker: one trajectory plus its observers' payloads."""
    config, datum, base_seed, tid, observer_factory = task
    stream = RngStream(base_seed=base_seed, trajectory_id=tid)
    u0 = datum.build(config.grid, stream)
    # counter 0 is reserved for datum randomization so the path noise is
    # the same whether or not the height was drawn
    if stream.counter < 1:
        stream.counter = 1
    observers = list(observer_factory(tid)) if observer_factory is not None else []
    traj = advance(config, u0, stream, observers, trajectory_id=tid)
    payloads = [obs.payload() for obs in observers if hasattr(obs, "payload")]
    return traj, payloads


def run_ensemble(config: SolverConfig, datum: InitialDatum, M: int,
                 base_seed: int = 0, threads: int = 1, moments=(1.0, 2.0),
                 observer_factory=None, keep_trajectories: bool = False) -> EnsembleSummary:
    """Run M independent trajectories and aggregate their series.

    Trajectory ids are 0..M-1; the RNG key is (base_seed, id), so results
    are independent of the worker count and of submission order.
    """
    if M < 1:
        raise ValueError(f"need at least one trajectory, got M={M}")
    tasks = [(config, datum, base_seed, tid, observer_factory) for tid in range(M)]
    if threads > 1 and M > 1:
        with ProcessPoolExecutor(max_workers=min(threads, M)) as pool:
            results = list(pool.map(_run_single, tasks))
    else:
        results = [_run_single(t) for t in tasks]
    trajectories = [r[0] for r in results]
    payloads = [r[1] for r in results]
    return _summarize(
        trajectories, moments,
        trajectories if keep_trajectories else None,
        payloads,
    )


def _summarize(trajectories, moments, kept, payloads) -> EnsembleSummary:
    valid = [tr for tr in trajectories if not tr.degenerate]
    frozen_count = sum(1 for tr in trajectories if tr.frozen)
    t_sigma = [tr.t_sigma for tr in trajectories if tr.t_sigma is not None]
    if not valid:
        return EnsembleSummary(
            times=np.array([]), count=len(trajectories), valid_count=0,
            mean={}, se={}, minimum={}, maximum={}, moments={}, sup_moments={},
            frozen_count=frozen_count, degenerate_count=len(trajectories),
            t_sigma=t_sigma, trajectories=kept, observer_payloads=payloads,
        )
    times = np.asarray(valid[0].series.times)
    for tr in valid[1:]:
        if len(tr.series.times) != len(times) or not np.array_equal(
            np.asarray(tr.series.times), times
        ):
            raise RuntimeError(
                "record times diverged across trajectories; ensemble aggregation "
                "requires the shared schedule"
            )
    mv = len(valid)
    mean, se, mn, mx, mom, sup = {}, {}, {}, {}, {}, {}
    qs = tuple(float(q) for q in moments)
    with np.errstate(invalid="ignore", over="ignore"):
        for name in RECORD_COLUMNS + CUMULATIVE_NAMES:
            x = np.stack([tr.series.column(name) for tr in valid])
            mean[name] = x.mean(axis=0)
            se[name] = (
                x.std(axis=0, ddof=1) / math.sqrt(mv) if mv > 1 else np.zeros_like(x[0])
            )
            mn[name] = x.min(axis=0)
            mx[name] = x.max(axis=0)
            if name in _SUP_COLUMNS:
                mom[name] = {q: np.mean(x**q, axis=0) for q in qs}
                tops = x.max(axis=1)
                sup[name] = {}
                for q in qs:
                    powered = tops**q
                    est = float(np.mean(powered))
                    err = (
                        float(np.std(powered, ddof=1) / math.sqrt(mv)) if mv > 1 else 0.0
                    )
                    sup[name][q] = (est, err)
    return EnsembleSummary(
        times=times, count=len(trajectories), valid_count=mv,
        mean=mean, se=se, minimum=mn, maximum=mx, moments=mom, sup_moments=sup,
        frozen_count=frozen_count,
        degenerate_count=len(trajectories) - mv,
        t_sigma=t_sigma, trajectories=kept, observer_payloads=payloads,
    )


# ---------------------------------------------------------------------------
# pathwise budget identities


def _face_energy(u: np.ndarray, config: SolverConfig) -> float:
    """Energy built from face differences, the form the scheme dissipates."""
    params = config.params
    h = config.grid.dx
    e = 0.5 * float(np.sum(face_diff(u, h) ** 2)) * h
    if params.eps > 0.0:
        e += params.eps * float(np.sum(_power_values(u, -params.p))) * h
    return e


def _entropy_value(u: np.ndarray, n: float, h: float) -> float:
    un = _power_values(u, 2.0 - n)
    dens = un / ((n - 1.0) * (n - 2.0)) + u / (n - 1.0) - 1.0 / (n - 2.0)
    return float(np.sum(dens)) * h


class _BudgetObserver:
    """Accumulates the predicted drift of one functional along a path.

    Deterministic terms pair the gradient of the functional at the left
    endpoint of each accepted step with the exact fluxes the step
    applied (implicit part at the new state, potential at the old), so
    they reproduce the scheme's deterministic update identically and the
    residual carries no stiffness error.  The second-order correction is
    the mode sum over the responses the implicit solve actually absorbs,
    (I + dt A)^{-1} v_k; the undamped mode sum and its closed-form
    spectral route are accumulated alongside for comparison, but only
    the absorbed sum enters the residual.
    """

    def __init__(self, config: SolverConfig, which: str):
        if which not in ("energy", "entropy"):
            raise ConfigError(f"budget kind must be 'energy' or 'entropy', got {which!r}")
        self.config = config
        self.which = which

    def _phi(self, u):
        if self.which == "energy":
            return _face_energy(u, self.config)
        return _entropy_value(u, self.config.params.n, self.config.grid.dx)

    def _grad(self, u):
        """Nodal gradient density of the functional (per dx)."""
        params = self.config.params
        if self.which == "energy":
            return _pressure_values(u, self.config.grid.dx, params)
        n = params.n
        return (1.0 - _power_values(u, 1.0 - n)) / (n - 1.0)

    def start(self, t, u):
        cfg = self.config
        self.basis = _basis_face_matrix(cfg.spectrum, cfg.grid)
        self.thetas = theta_sums(cfg.spectrum)
        self.cstrat = cfg.params.c_strat
        self.phi0 = self._phi(u)
        self.cum = 0.0
        self.terms = np.zeros(5)
        self.rows = []

    def _mode_responses(self, u):
        """Nodal response of each noise mode per unit increment."""
        h = self.config.grid.dx
        vpow = face_mean(_power_values(u, self.config.params.n / 2.0))
        w = self.basis * vpow[None, :]
        return (w - np.roll(w, 1, axis=1)) / h

    def _quadratic_form(self, u, vk):
        """(1/2) sum_k <v_k, Hess v_k> for mode responses in rows."""
        cfg = self.config
        params = cfg.params
        h = cfg.grid.dx
        if self.which == "energy":
            dvk = (np.roll(vk, -1, axis=1) - vk) / h
            out = 0.5 * float(np.sum(dvk**2)) * h
            if params.eps > 0.0:
                fpp = params.p * (params.p + 1.0) * _power_values(u, -params.p - 2.0)
                out += 0.5 * params.eps * float(np.sum(fpp[None, :] * vk**2)) * h
            return out
        return 0.5 * float(np.sum(_power_values(u, -params.n)[None, :] * vk**2)) * h

    def _spectral_rate(self, u):
        """Closed-form continuum route for the second-order correction."""
        cfg = self.config
        params = cfg.params
        n = params.n
        h = cfg.grid.dx
        th0, th1, th2 = self.thetas
        if self.which == "energy":
            w = _power_values(u, n / 2.0)
            wx = _deriv_values(w, h, 1)
            wxx = _deriv_values(w, h, 2)
            onb = 0.5 * (
                th0 * float(np.sum(wxx**2))
                + th1 * float(np.sum(4.0 * wx**2 - 2.0 * w * wxx))
                + th2 * float(np.sum(_power_values(u, n)))
            ) * h
            if params.eps > 0.0:
                fpp = params.p * (params.p + 1.0) * _power_values(u, -params.p - 2.0)
                ux = _deriv_values(u, h, 1)
                onb += self.cstrat * params.eps * float(
                    np.sum(fpp * _power_values(u, n - 2.0) * ux**2)
                ) * h
                onb += 0.5 * th1 * params.eps * params.p * (params.p + 1.0) * float(
                    np.sum(_power_values(u, n - params.p - 2.0))
                ) * h
            return onb
        ux = _deriv_values(u, h, 1)
        return (
            self.cstrat * float(np.sum(_power_values(u, -2.0) * ux**2)) * h
            + 0.5 * th1 * cfg.grid.L
        )

    def on_step(self, t0, u0, t1, u1, dt):
        cfg = self.config
        params = cfg.params
        h = cfg.grid.dx
        dgf = face_diff(self._grad(u0), h)
        uf = face_mean(u0)
        # exactly the fluxes the accepted step applied
        lap = (np.roll(u1, -1) - 2.0 * u1 + np.roll(u1, 1)) / h**2
        p_hat = -lap
        if params.eps > 0.0:
            p_hat = p_hat - params.eps * params.p * _power_values(u0, -params.p - 1.0)
        main = -float(np.sum(_power_values(uf, params.n) * face_diff(p_hat, h) * dgf)) * h
        if cfg.forcing is not None:
            main += float(np.sum(self._grad(u0) * cfg.forcing(t0, cfg.grid))) * h
        cs = params.c_strat + params.S
        corr = 0.0
        if cs > 0.0:
            corr = -cs * float(
                np.sum(_power_values(uf, params.n - 2.0) * face_diff(u1, h) * dgf)
            ) * h
        vk = self._mode_responses(u0)
        ito_raw = self._quadratic_form(u0, vk)
        if np.any(vk):
            absorbed = solve_cyclic_banded(
                _system_diagonals(u0, dt, cfg), vk.T, tol=cfg.solver_tol
            ).T
            ito = self._quadratic_form(u0, absorbed)
        else:
            ito = 0.0
        onb = self._spectral_rate(u0)
        self.cum += dt * (main + corr + ito)
        self.terms = self.terms + dt * np.array([main, corr, ito, ito_raw, onb])

    def on_record(self, t, u):
        self.rows.append((t, self._phi(u) - self.phi0 - self.cum, *self.terms))

    def finish(self):
        pass

    def payload(self):
        return np.asarray(self.rows)


class _BudgetFactory:
    def __init__(self, config, which):
        self.config = config
        self.which = which

    def __call__(self, tid):
        return [_BudgetObserver(self.config, self.which)]


@dataclass
class BudgetReport:
    """Residual of one pathwise budget identity over an ensemble."""

    which: str
    times: np.ndarray
    mean_residual: np.ndarray
    se_residual: np.ndarray
    term_means: dict
    correction_route_gap: float
    final_residual: float
    final_se: float
    count: int
    degenerate_count: int


def ito_budget(config: SolverConfig, datum: InitialDatum, M: int,
               which: str = "energy", base_seed: int = 0,
               threads: int = 1) -> BudgetReport:
    """Check that a functional's increments match their predicted drift.

    The residual mean is zero in expectation by the martingale property
    of the remaining stochastic integral; with zero noise the residual
    is pure time-discretization error, linear in dt.
    """
    if config.params.eps <= 0.0:
        raise ConfigError("budget identities are checked on regularized runs (eps > 0)")
    if datum.delta_shift <= 0.0:
        raise ConfigError("budget identities need a positive initial shift")
    summary = run_ensemble(
        config, datum, M, base_seed=base_seed, threads=threads,
        observer_factory=_BudgetFactory(config, which),
    )
    if summary.valid_count == 0:
        raise RuntimeError("every budget trajectory degenerated; nothing to report")
    rows = [p[0] for p in summary.observer_payloads]
    # drop degenerate trajectories (short payloads)
    full = max(r.shape[0] for r in rows)
    rows = [r for r in rows if r.shape[0] == full]
    data = np.stack(rows)
    times = data[0, :, 0]
    res = data[:, :, 1]
    mv = data.shape[0]
    mean_res = res.mean(axis=0)
    se_res = res.std(axis=0, ddof=1) / math.sqrt(mv) if mv > 1 else np.zeros_like(mean_res)
    term_names = ("main", "correction", "ito_direct", "ito_undamped", "ito_spectral")
    term_means = {
        name: data[:, :, 2 + i].mean(axis=0) for i, name in enumerate(term_names)
    }
    # identity check between the two continuum routes for the correction
    gap = float(abs(term_means["ito_undamped"][-1] - term_means["ito_spectral"][-1]))
    return BudgetReport(
        which=which,
        times=times,
        mean_residual=mean_res,
        se_residual=se_res,
        term_means=term_means,
        correction_route_gap=gap,
        final_residual=float(mean_res[-1]),
        final_se=float(se_res[-1]),
        count=summary.count,
        degenerate_count=summary.degenerate_count,
    )


# ---------------------------------------------------------------------------
# martingale / quadratic variation


class _QvObserver:
    """Tracks the weak-form residual of a test function along a path.

    The compensator uses the fluxes the step actually applied (implicit
    linear pressure at the new state, lagged mobilities, explicit
    potential), so each increment of the residual equals the noise
    pairing exactly and the residual is a discrete martingale.  A
    trapezoid compensator built from the endpoint states alone is kept
    as a diagnostic.
    """

    def __init__(self, config: SolverConfig, phi_values: np.ndarray):
        self.config = config
        self.phi = np.asarray(phi_values, dtype=float)

    def start(self, t, u):
        cfg = self.config
        h = cfg.grid.dx
        self.basis = _basis_face_matrix(cfg.spectrum, cfg.grid)
        self.dphi = face_diff(self.phi, h)
        self.m = 0.0
        self.m_trap = 0.0
        self.qv_emp = 0.0
        self.qv_pred = 0.0
        self.rows = []

    def _prev_mode_pairing(self, u):
        """b_k = pairing of mode k's flux with the test gradient."""
        h = self.config.grid.dx
        vpow = face_mean(_power_values(u, self.config.params.n / 2.0))
        return (self.basis * vpow[None, :]) @ self.dphi * h

    def _applied_pairing(self, u0, u1, t0):
        cfg = self.config
        params = cfg.params
        h = cfg.grid.dx
        uf = face_mean(u0)
        # the implicit step's pressure: linear part at the new state,
        # singular potential at the old
        lap = (np.roll(u1, -1) - 2.0 * u1 + np.roll(u1, 1)) / h**2
        p_hat = -lap
        if params.eps > 0.0:
            p_hat = p_hat - params.eps * params.p * _power_values(u0, -params.p - 1.0)
        flux = _power_values(uf, params.n) * face_diff(p_hat, h)
        cs = params.c_strat + params.S
        if cs > 0.0:
            flux = flux + cs * _power_values(uf, params.n - 2.0) * face_diff(u1, h)
        pairing = float(np.sum(flux * self.dphi)) * h
        if cfg.forcing is not None:
            f = np.asarray(cfg.forcing(t0, cfg.grid), dtype=float)
            pairing -= float(np.sum(f * self.phi)) * h
        return pairing

    def _state_pairing(self, u):
        cfg = self.config
        params = cfg.params
        h = cfg.grid.dx
        pr = _pressure_values(u, h, params)
        uf = face_mean(u)
        flux = _power_values(uf, params.n) * face_diff(pr, h)
        cs = params.c_strat + params.S
        if cs > 0.0:
            flux = flux + cs * _power_values(uf, params.n - 2.0) * face_diff(u, h)
        return float(np.sum(flux * self.dphi)) * h

    def on_step(self, t0, u0, t1, u1, dt):
        moved = float(np.sum((u1 - u0) * self.phi)) * self.config.grid.dx
        dm = moved + dt * self._applied_pairing(u0, u1, t0)
        self.m += dm
        self.m_trap += moved + dt * 0.5 * (
            self._state_pairing(u0) + self._state_pairing(u1)
        )
        self.qv_emp += dm * dm
        b = self._prev_mode_pairing(u0)
        self.qv_pred += dt * float(np.sum(b * b))

    def on_record(self, t, u):
        self.rows.append((t, self.m, self.m_trap, self.qv_emp, self.qv_pred))

    def finish(self):
        pass

    def payload(self):
        return np.asarray(self.rows)


class _QvFactory:
    def __init__(self, config, phi_values):
        self.config = config
        self.phi_values = np.asarray(phi_values, dtype=float)

    def __call__(self, tid):
        return [_QvObserver(self.config, self.phi_values)]


@dataclass
class QvReport:
    """Weak-form martingale statistics for one test function."""

    times: np.ndarray
    mean_m: np.ndarray
    se_m: np.ndarray
    mean_m_trapezoid: np.ndarray
    qv_empirical: float
    qv_predicted: float
    qv_relative_gap: float
    qv_se_ratio: float
    final_mean_m: float
    final_se_m: float
    count: int
    degenerate_count: int


def martingale_qv_test(config: SolverConfig, datum: InitialDatum, M: int,
                       phi: GridFunction, base_seed: int = 0,
                       threads: int = 1) -> QvReport:
    """Verify the martingale property and quadratic variation of the noise.

    Reports the per-time ensemble mean of the weak-form residual (zero
    in expectation) and compares the empirical quadratic variation at
    the horizon against the mode-sum formula.
    """
    if phi.grid != config.grid:
        raise ConfigError("test function must live on the solver grid")
    summary = run_ensemble(
        config, datum, M, base_seed=base_seed, threads=threads,
        observer_factory=_QvFactory(config, phi.values),
    )
    if summary.valid_count == 0:
        raise RuntimeError("every test trajectory degenerated; nothing to report")
    rows = [p[0] for p in summary.observer_payloads]
    full = max(r.shape[0] for r in rows)
    rows = [r for r in rows if r.shape[0] == full]
    data = np.stack(rows)
    mv = data.shape[0]
    times = data[0, :, 0]
    m = data[:, :, 1]
    mean_m = m.mean(axis=0)
    se_m = m.std(axis=0, ddof=1) / math.sqrt(mv) if mv > 1 else np.zeros_like(mean_m)
    emp = data[:, -1, 3]
    pred = data[:, -1, 4]
    emp_mean = float(emp.mean())
    pred_mean = float(pred.mean())
    diff = emp - pred
    if pred_mean > 0.0:
        gap = abs(emp_mean - pred_mean) / pred_mean
        se_ratio = (
            float(diff.std(ddof=1) / math.sqrt(mv)) / pred_mean if mv > 1 else 0.0
        )
    else:
        gap = 0.0 if abs(emp_mean) < 1e-24 else math.inf
        se_ratio = 0.0
    return QvReport(
        times=times,
        mean_m=mean_m,
        se_m=se_m,
        mean_m_trapezoid=data[:, :, 2].mean(axis=0),
        qv_empirical=emp_mean,
        qv_predicted=pred_mean,
        qv_relative_gap=gap,
        qv_se_ratio=se_ratio,
        final_mean_m=float(mean_m[-1]),
        final_se_m=float(se_m[-1]),
        count=summary.count,
        degenerate_count=summary.degenerate_count,
    )


# ---------------------------------------------------------------------------
# uniformity sweeps

# statistics with a nonzero limit along the axis are ratio-gated; the
# eps-weighted integrals vanish with eps by construction and are only
# reported
_EPS_MONITORED = (
    ("sup", "energy_eps"),
    ("sup", "entropy"),
    ("final", "cum_dissipation"),
    ("final", "cum_grad4"),
    ("final", "cum_hess2_weighted"),
    ("final", "cum_hess2"),
    ("final", "cum_grad2_inv"),
)
_EPS_REPORTED = (
    ("final", "cum_pot_grad2"),
    ("final", "cum_pot_grad2_weighted"),
    ("final", "cum_bernis_grad6"),
    ("final", "cum_bernis_third2"),
    ("final", "cum_quarter_grad4"),
)
# the delta family tracks only energy-route quantities; the entropy
# terms have no uniform bound in this limit and are left out entirely
_DELTA_MONITORED = (
    ("sup", "energy"),
    ("final", "cum_dissipation"),
    ("final", "cum_grad4"),
    ("final", "cum_hess2_weighted"),
    ("final", "cum_bernis_grad6"),
    ("final", "cum_bernis_third2"),
    ("final", "cum_quarter_grad4"),
)
_DELTA_REPORTED = ()


@dataclass
class SweepReport:
    """Uniform-boundedness table across one regularization axis."""

    axis: str
    values: tuple
    q: tuple
    monitored: tuple
    reported: tuple
    table: dict
    ratios: dict
    max_monitored_ratio: float
    frozen: dict
    degenerate: dict


def _stat_value(summary: EnsembleSummary, kind: str, column: str, q: float) -> float:
    # cumulative integrals are nondecreasing so their sup is the final
    # value; both reduce to the over-time maximum
    return summary.sup_moments[column][q][0]


def estimate_sweep(config: SolverConfig, datum: InitialDatum, M: int,
                   axis: str, values, base_seed: int = 0, threads: int = 1,
                   q=(1.0, 2.0)) -> SweepReport:
    """Tabulate moment statistics across a regularization axis.

    axis "eps" varies the potential strength at fixed positive shift;
    axis "delta" varies the initial shift of compactly supported data
    with the potential switched off (the limit family the shift serves).
    The same base_seed drives every axis value, so trajectories are
    coupled by common random numbers and equal values give ratio 1
    exactly.
    """
    values = tuple(float(v) for v in values)
    if len(values) < 2:
        raise ConfigError("a sweep needs at least two axis values")
    qs = tuple(float(x) for x in q)
    if axis == "eps":
        if datum.delta_shift <= 0.0:
            raise ConfigError("the eps sweep requires a fixed positive delta_shift")
        monitored, reported = _EPS_MONITORED, _EPS_REPORTED
    elif axis == "delta":
        if datum.kind != "bump":
            raise ConfigError("the delta sweep requires compactly supported bump data")
        monitored, reported = _DELTA_MONITORED, _DELTA_REPORTED
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}, expected 'eps' or 'delta'")

    table = {}
    frozen = {}
    degenerate = {}
    for v in values:
        if axis == "eps":
            cfg = replace(config, params=replace(config.params, eps=v))
            dat = datum
        else:
            cfg = replace(config, params=replace(config.params, eps=0.0), delta=v)
            dat = replace(datum, delta_shift=v)
        summary = run_ensemble(cfg, dat, M, base_seed=base_seed, threads=threads,
                               moments=qs)
        frozen[v] = summary.frozen_count
        degenerate[v] = summary.degenerate_count
        if summary.valid_count == 0:
            raise ConfigError(
                f"all trajectories degenerate at {axis}={v}; sweep has no statistics"
            )
        for kind, column in monitored + reported:
            for qq in qs:
                table.setdefault((kind, column, qq), {})[v] = _stat_value(
                    summary, kind, column, qq
                )

    ratios = {}
    for key, per_value in table.items():
        vals = np.array([per_value[v] for v in values])
        lo, hi = float(vals.min()), float(vals.max())
        if hi == 0.0:
            ratios[key] = 1.0
        elif lo <= 0.0:
            ratios[key] = math.inf
        else:
            ratios[key] = hi / lo
    gated = [
        ratios[(kind, column, qq)]
        for kind, column in monitored for qq in qs
    ]
    return SweepReport(
        axis=axis,
        values=values,
        q=qs,
        monitored=monitored,
        reported=reported,
        table=table,
        ratios=ratios,
        max_monitored_ratio=float(max(gated)),
        frozen=frozen,
        degenerate=degenerate,
    )


# ---------------------------------------------------------------------------
# inequality battery


@dataclass
class BatteryReport:
    """Empirical functional-inequality constants on random fields."""

    sample_count: int
    resolutions: tuple
    bernis_max_ratio: dict
    bernis_ratio_table: dict
    stability_factor: float
    onb_max_dev: float
    positivity_constants: dict
    degenerate_flags: int


def _trig_sample(rng: np.random.Generator, modes: int):
    """Random strictly positive trig polynomial, returned as coefficients."""
    a = rng.normal(0.0, 1.0, size=modes) / np.arange(1, modes + 1) ** 2
    b = rng.normal(0.0, 1.0, size=modes) / np.arange(1, modes + 1) ** 2
    offset = rng.uniform(0.1, 1.0)
    return a, b, offset


def _trig_eval(a, b, offset, shift, x, L):
    j = np.arange(1, a.size + 1)
    arg = 2.0 * np.pi * np.outer(j, x) / L
    return offset + shift + a @ np.cos(arg) + b @ np.sin(arg)


def inequality_battery(sample_count: int, grid: PeriodicGrid, n: float = 2.5,
                       p: float = 4.0, eps: float = 1e-3,
                       seed: int = 0) -> BatteryReport:
    """Spot-check the weighted inequalities on random positive fields.

    Each sample is a low-mode trig polynomial shifted to be strictly
    positive (the shift is computed on a fine reference grid so both
    resolutions see the same function).  Evaluates the Bernis ratios
    with a trivial and a compactly supported cutoff, the positivity
    constants, and the spectral closed-form deviations, at the given
    resolution and at its refinement.
    """
    if sample_count < 1:
        raise ValueError(f"need at least one sample, got {sample_count}")
    rng = np.random.default_rng(seed)
    L = grid.L
    grids = (grid, make_grid(L, 2 * grid.N))
    ref = make_grid(L, 4096)
    params = ModelParams(n=n, p=p, eps=eps)

    ratio_table = {g.N: {"zeta_const": [], "zeta_bump": []} for g in grids}
    chat_max = 0.0
    cbar_min = math.inf
    degenerate_flags = 0
    for _ in range(sample_count):
        a, b, offset = _trig_sample(rng, modes=6)
        ref_min = float(np.min(_trig_eval(a, b, offset, 0.0, ref.nodes, L)))
        shift = -ref_min + offset if ref_min < offset else 0.0
        for g in grids:
            u = grid_function(g, _trig_eval(a, b, offset, shift, g.nodes, L))
            zeta_const = grid_function(g, np.ones(g.N))
            d = np.abs(g.nodes - 0.5 * L)
            w = 0.5 * L
            zeta_bump = grid_function(
                g, np.where(d <= 0.5 * w, np.cos(np.pi * d / w) ** 4, 0.0)
            )
            for label, zeta in (("zeta_const", zeta_const), ("zeta_bump", zeta_bump)):
                rep = bernis_check(u, zeta, n)
                ratio_table[g.N][label].append(rep.value)
                degenerate_flags += sum(rep.metadata["degenerate"])
            if g is grids[0]:
                pos = positivity_bound_check(u, params)
                chat_max = max(chat_max, pos.metadata["chat"])
                cbar_min = min(cbar_min, pos.metadata["cbar"])

    onb_dev = 0.0
    for g in grids:
        for spectrum in (
            build_spectrum("power-decay", 1.0, K=8, decay=3.0, L=L),
            build_spectrum("flat", 0.5, K=4, L=L),
        ):
            onb_dev = max(onb_dev, onb_relation_values(spectrum, g).max_deviation)

    bernis_max = {
        g.N: max(max(v) for v in ratio_table[g.N].values()) for g in grids
    }
    coarse, fine = grids[0].N, grids[1].N
    stability = (
        bernis_max[fine] / bernis_max[coarse] if bernis_max[coarse] > 0.0 else math.inf
    )
    return BatteryReport(
        sample_count=sample_count,
        resolutions=(coarse, fine),
        bernis_max_ratio=bernis_max,
        bernis_ratio_table=ratio_table,
        stability_factor=float(stability),
        onb_max_dev=float(onb_dev),
        positivity_constants={
            "chat_max": float(chat_max),
            "cbar_min": float(cbar_min),
            "finite": bool(math.isfinite(chat_max) and math.isfinite(cbar_min)),
        },
        degenerate_flags=degenerate_flags,
    )


# ---------------------------------------------------------------------------
# manufactured-solution convergence


_MMS_BASE = 2.0
_MMS_AMP = 0.5


def _mms_state(t: float, x: np.ndarray, L: float) -> np.ndarray:
    return _MMS_BASE + _MMS_AMP * np.cos(2.0 * np.pi * x / L) * math.cos(t)


class _MmsForcing:
    """Forcing that makes the manufactured profile an exact solution.

    mode "continuum" subtracts the exact continuum drift of the target
    (so the run's error is the spatial truncation); mode "discrete"
    subtracts the discrete drift operator applied to the exact nodal
    values (so the error is purely temporal).
    """

    def __init__(self, n: float, L: float, mode: str):
        self.n = n
        self.L = L
        self.mode = mode

    def __call__(self, t: float, grid: PeriodicGrid) -> np.ndarray:
        x = grid.nodes
        k = 2.0 * np.pi / self.L
        dudt = -_MMS_AMP * np.cos(k * x) * math.sin(t)
        if self.mode == "continuum":
            amp = _MMS_AMP * math.cos(t)
            base = _MMS_BASE + amp * np.cos(k * x)
            drift = (
                self.n * amp**2 * k**4 * base ** (self.n - 1.0) * np.sin(k * x) ** 2
                - amp * k**4 * base**self.n * np.cos(k * x)
            )
        else:
            from .dynamics import _drift_values

            params = ModelParams(n=self.n)
            drift = _drift_values(_mms_state(t, x, self.L), grid.dx, params)
        return dudt - drift


@dataclass
class MmsReport:
    """Measured convergence orders of the deterministic scheme."""

    levels: tuple
    errors: tuple
    spatial_order: float | None
    temporal_order: float | None
    exact: bool
    forcing_mode: str


def mms_convergence(levels, T: float | None = None, n: float = 2.5,
                    L: float = 1.0, forcing_mode: str | None = None) -> MmsReport:
    """Deterministic convergence study against a manufactured solution.

    levels is a list of (N, dt) pairs; the slope of log error against
    log dx (when N varies) and log dt (when dt varies) is measured by
    least squares.  Errors below 1e-12 short-circuit to exact=True.
    """
    levels = tuple((int(N), float(dt)) for N, dt in levels)
    if len(levels) < 3:
        raise ValueError("a convergence study needs at least three levels")
    ns = [N for N, _ in levels]
    dts = [dt for _, dt in levels]
    spatial_study = len(set(ns)) > 1
    temporal_study = len(set(dts)) > 1
    if forcing_mode is None:
        forcing_mode = "discrete" if (temporal_study and not spatial_study) else "continuum"
    if T is None:
        T = 0.05 if (temporal_study and not spatial_study) else 1e-3

    errors = []
    for N, dt in levels:
        grid = make_grid(L, N)
        params = ModelParams(n=n)
        spectrum = build_spectrum("single", 0.0, L=L)
        config = SolverConfig(
            params=params, grid=grid, spectrum=spectrum,
            dt0=dt, T=T, record_every=10**9,
            forcing=_MmsForcing(n, L, forcing_mode),
        )
        u0 = grid_function(grid, _mms_state(0.0, grid.nodes, L))
        traj = advance(config, u0)
        if traj.degenerate:
            raise RuntimeError(f"manufactured run degenerated at N={N}, dt={dt}")
        exact_values = _mms_state(traj.final_state.t, grid.nodes, L)
        errors.append(float(np.max(np.abs(traj.final_state.u.values - exact_values))))

    errors = tuple(errors)
    if max(errors) < 1e-12:
        return MmsReport(levels, errors, None, None, True, forcing_mode)

    def _slope(xs, ys):
        xs = np.log(np.asarray(xs))
        ys = np.log(np.asarray(ys))
        return float(np.polyfit(xs, ys, 1)[0])

    spatial_order = _slope([L / N for N, _ in levels], errors) if spatial_study else None
    temporal_order = _slope(dts, errors) if temporal_study else None
    return MmsReport(levels, errors, spatial_order, temporal_order, False, forcing_mode)


# ---------------------------------------------------------------------------
# support diagnostics


@dataclass
class SupportReport:
    """Exploratory support-evolution series; nothing here is asserted."""

    times: np.ndarray
    support_length: np.ndarray
    support_left: np.ndarray
    support_right: np.ndarray
    nondecreasing_fraction: float
    constant_after_freeze: bool | None


def support_diagnostic(trajectory: Trajectory) -> SupportReport:
    s = trajectory.series
    times = np.asarray(s.times)
    length = s.column("support_length")
    diffs = np.diff(length)
    fraction = float(np.mean(diffs >= -1e-12)) if diffs.size else 1.0
    constant = None
    if trajectory.frozen and trajectory.t_sigma is not None:
        after = times >= trajectory.t_sigma - 1e-15
        tail = length[after]
        constant = bool(tail.size == 0 or np.all(tail == tail[0]))
    return SupportReport(
        times=times,
        support_length=length,
        support_left=s.column("support_left"),
        support_right=s.column("support_right"),
        nondecreasing_fraction=fraction,
        constant_after_freeze=constant,
    )
