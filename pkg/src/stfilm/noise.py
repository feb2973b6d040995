"""Trigonometric noise basis, spectra, and counter-based sampling.

The driving noise is expanded in the orthonormal L^2(0, L) basis

    g_k(x) = sqrt(2/L) sin(2 pi k x / L)   k > 0
    g_0(x) = 1 / sqrt(L)
    g_k(x) = sqrt(2/L) cos(2 pi k x / L)   k < 0

with even, nonnegative weights lambda_k = lambda_{-k}.  Increments are
drawn from counter-based Philox streams keyed by (base_seed,
trajectory_id), so any (seed, trajectory, counter) triple reproduces the
same vector bit for bit and rejected steps can resample from a fresh
counter without rolling anything back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DecayTooWeak, TruncationTooLarge
from .grid import PeriodicGrid

__all__ = [
    "NoiseSpectrum",
    "RngStream",
    "basis_eval",
    "basis_deriv",
    "build_spectrum",
    "c_strat",
    "theta_sums",
    "s_thresholds",
    "onb_relation_values",
    "OnbReport",
    "sample_increments",
]


def basis_eval(k: int, x, L: float) -> np.ndarray:
    """Evaluate the k-th basis mode at positions x."""
    return basis_deriv(k, x, L, 0)


def basis_deriv(k: int, x, L: float, order: int) -> np.ndarray:
    """Derivative of order 0, 1, or 2 of the k-th basis mode at x."""
    x = np.asarray(x, dtype=float)
    amp = np.sqrt(2.0 / L)
    omega = 2.0 * np.pi * k / L
    theta = omega * x
    if order == 0:
        if k > 0:
            return amp * np.sin(theta)
        if k == 0:
            return np.full_like(x, 1.0 / np.sqrt(L))
        return amp * np.cos(theta)
    if order == 1:
        if k > 0:
            return amp * omega * np.cos(theta)
        if k == 0:
            return np.zeros_like(x)
        return -amp * omega * np.sin(theta)
    if order == 2:
        return -(omega**2) * basis_deriv(k, x, L, 0)
    raise ValueError(f"basis derivative order must be 0, 1, or 2, got {order}")


@dataclass(frozen=True)
class NoiseSpectrum:
    """Even truncated spectrum lambda_k, |k| <= K, on a domain of length L."""

    K: int
    lambdas: np.ndarray = field(repr=False, compare=False)  # index k + K
    L: float

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.shape != (2 * self.K + 1,):
            raise ValueError(
                f"expected {2 * self.K + 1} weights for K={self.K}, got {lam.shape}"
            )
        if np.any(lam < 0.0) or not np.all(np.isfinite(lam)):
            raise ValueError("spectral weights must be finite and >= 0")
        if not np.array_equal(lam, lam[::-1]):
            raise ValueError("spectral weights must satisfy lambda_k = lambda_{-k}")
        lam = lam.copy()
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)

    @property
    def ks(self) -> np.ndarray:
        """Mode indices -K..K in storage order."""
        return np.arange(-self.K, self.K + 1)

    def lam(self, k: int) -> float:
        """Weight of mode k."""
        return float(self.lambdas[k + self.K])

    def colored_sum(self) -> float:
        """sum_k k^4 lambda_k^2, finiteness of which defines colored noise."""
        ks = self.ks.astype(float)
        return float(np.sum(ks**4 * np.asarray(self.lambdas) ** 2))


def build_spectrum(mode: str, amplitude: float, K: int = 0,
                   decay: float | None = None, L: float = 1.0) -> NoiseSpectrum:
    """Construct a named spectrum.

    Modes
    -----
    "single"      lambda_0 = amplitude, all other weights zero.
    "flat"        lambda_k = amplitude for |k| <= K.
    "power-decay" lambda_0 = amplitude, lambda_k = amplitude * |k|**(-decay);
                  requires decay > 5/2 so that sum k^4 lambda_k^2 converges
                  as K grows.
    """
    if amplitude < 0.0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    if K < 0:
        raise ValueError(f"truncation K must be >= 0, got {K}")
    ks = np.arange(-K, K + 1)
    if mode == "single":
        lam = np.where(ks == 0, amplitude, 0.0).astype(float)
    elif mode == "flat":
        lam = np.full(2 * K + 1, float(amplitude))
    elif mode == "power-decay":
        if decay is None or decay <= 2.5:
            raise DecayTooWeak(
                f"power-decay spectra need decay > 5/2, got {decay}"
            )
        scale = np.where(ks == 0, 1.0, np.abs(ks)).astype(float)
        lam = amplitude * scale ** (-float(decay))
        lam[K] = amplitude
    else:
        raise ValueError(f"unknown spectrum mode {mode!r}")
    return NoiseSpectrum(K=K, lambdas=lam, L=float(L))


def c_strat(spectrum: NoiseSpectrum, n: float) -> float:
    """Stratonovich drift constant of the conservative noise.

    Closed form (n^2/8) * (lambda_0^2 + 2 sum_{k>=1} lambda_k^2) / L, which
    equals (1/2)(n^2/4) sum_k lambda_k^2 g_k(x)^2 pointwise.
    """
    lam = np.asarray(spectrum.lambdas)
    K = spectrum.K
    lam0 = lam[K]
    tail = lam[K + 1:]
    return float(0.5 * (n**2 / 4.0) * (lam0**2 + 2.0 * np.sum(tail**2)) / spectrum.L)


def theta_sums(spectrum: NoiseSpectrum) -> tuple[float, float, float]:
    """Spectral sums (Theta_0, Theta_1, Theta_2) of the basis identities.

    Theta_0 = (lambda_0^2 + 2 sum lambda_k^2)/L,
    Theta_1 = sum 8 pi^2 k^2 lambda_k^2 / L^3,
    Theta_2 = sum 32 pi^4 k^4 lambda_k^2 / L^5, sums over k >= 1.
    """
    lam = np.asarray(spectrum.lambdas)
    L = spectrum.L
    kpos = np.arange(1, spectrum.K + 1, dtype=float)
    tail = lam[spectrum.K + 1:]
    theta0 = (lam[spectrum.K] ** 2 + 2.0 * np.sum(tail**2)) / L
    theta1 = np.sum(8.0 * np.pi**2 * kpos**2 * tail**2) / L**3
    theta2 = np.sum(32.0 * np.pi**4 * kpos**4 * tail**2) / L**5
    return (float(theta0), float(theta1), float(theta2))


def s_thresholds(n: float, c_strat_value: float) -> tuple[float, float]:
    """Lower bounds on the extra diffusion strength S.

    Returns (S_A3, S_A3star): the coarse threshold c * 3 * 2^(4-n) (n-2)/(3-n)
    and the sharp one c * (9/4) (n-2)^2 / ((3-n)(2n-3)).  Requires n in (2, 3).
    """
    from .errors import MobilityOutOfRange

    if not (2.0 < n < 3.0):
        raise MobilityOutOfRange(f"mobility exponent must lie in (2, 3), got n={n}")
    if c_strat_value < 0.0:
        raise ValueError(f"c_strat must be >= 0, got {c_strat_value}")
    s_a3 = c_strat_value * 3.0 * 2.0 ** (4.0 - n) * (n - 2.0) / (3.0 - n)
    s_a3star = c_strat_value * 2.25 * (n - 2.0) ** 2 / ((3.0 - n) * (2.0 * n - 3.0))
    return (float(s_a3), float(s_a3star))


@dataclass(frozen=True)
class OnbReport:
    """Deviations of the six spectral product sums from their closed forms.

    Deviations are normalized by max(1, scale of the relation) so the
    report is meaningful across spectra of very different magnitude.
    """

    max_deviation: float
    deviations: dict
    closed_forms: dict


def onb_relation_values(spectrum: NoiseSpectrum, grid: PeriodicGrid) -> OnbReport:
    """Check the six pointwise identities for weighted basis products.

    With Theta_0 = (lambda_0^2 + 2 sum lambda_k^2)/L,
    Theta_1 = sum 8 pi^2 k^2 lambda_k^2 / L^3 and
    Theta_2 = sum 32 pi^4 k^4 lambda_k^2 / L^5 (sums over k >= 1):

        sum lambda_k^2 g_k^2        = Theta_0     sum lambda_k^2 g_k'^2       = Theta_1
        sum lambda_k^2 g_k g_k'     = 0           sum lambda_k^2 g_k''^2      = Theta_2
        sum lambda_k^2 g_k' g_k''   = 0           sum lambda_k^2 g_k g_k''    = -Theta_1

    Requires K < N/4 so every product is resolved by the grid.
    """
    if spectrum.K >= grid.N / 4:
        raise TruncationTooLarge(
            f"need K < N/4 to resolve basis products, got K={spectrum.K}, N={grid.N}"
        )
    L = spectrum.L
    x = grid.nodes
    lam = np.asarray(spectrum.lambdas)
    ks = spectrum.ks
    g0 = np.stack([basis_deriv(k, x, L, 0) for k in ks])
    g1 = np.stack([basis_deriv(k, x, L, 1) for k in ks])
    g2 = np.stack([basis_deriv(k, x, L, 2) for k in ks])
    w = lam[:, None] ** 2

    theta0, theta1, theta2 = theta_sums(spectrum)

    sums = {
        "g_g": np.sum(w * g0 * g0, axis=0),
        "gx_gx": np.sum(w * g1 * g1, axis=0),
        "g_gx": np.sum(w * g0 * g1, axis=0),
        "gxx_gxx": np.sum(w * g2 * g2, axis=0),
        "gx_gxx": np.sum(w * g1 * g2, axis=0),
        "g_gxx": np.sum(w * g0 * g2, axis=0),
    }
    rhs = {
        "g_g": theta0,
        "gx_gx": theta1,
        "g_gx": 0.0,
        "gxx_gxx": theta2,
        "gx_gxx": 0.0,
        "g_gxx": -theta1,
    }
    # natural magnitude of each sum, used to normalize roundoff
    scales = {
        "g_g": theta0,
        "gx_gx": theta1,
        "g_gx": np.sqrt(theta0 * theta1),
        "gxx_gxx": theta2,
        "gx_gxx": np.sqrt(theta1 * theta2),
        "g_gxx": np.sqrt(theta0 * theta2),
    }
    deviations = {}
    for name, values in sums.items():
        dev = float(np.max(np.abs(values - rhs[name])))
        deviations[name] = dev / max(1.0, abs(scales[name]))
    return OnbReport(
        max_deviation=max(deviations.values()),
        deviations=deviations,
        closed_forms=rhs,
    )


@dataclass
class RngStream:
    """Counter-based random stream for one trajectory.

    The Philox key is derived once from (base_seed, trajectory_id); the
    counter indexes independent blocks, so advancing it never overlaps
    earlier draws and equal counters reproduce draws exactly.
    """

    base_seed: int
    trajectory_id: int
    counter: int = 0
    _key: np.ndarray | None = field(default=None, repr=False, compare=False)

    def _generator(self) -> np.random.Generator:
        if self._key is None:
            seq = np.random.SeedSequence((int(self.base_seed), int(self.trajectory_id)))
            object.__setattr__(self, "_key", seq.generate_state(2, np.uint64))
        bg = np.random.Philox(counter=[0, 0, int(self.counter), 0], key=self._key)
        return np.random.Generator(bg)

    def normal_vector(self, count: int, scale: float) -> np.ndarray:
        """count iid N(0, scale^2) draws; advances the counter by one."""
        out = self._generator().normal(0.0, scale, size=count)
        self.counter += 1
        return out

    def uniform(self, lo: float, hi: float) -> float:
        """One uniform draw on [lo, hi); advances the counter by one."""
        out = float(self._generator().uniform(lo, hi))
        self.counter += 1
        return out


def sample_increments(spectrum: NoiseSpectrum, dt: float, stream: RngStream) -> np.ndarray:
    """Draw the 2K+1 mode increments for one step, each N(0, dt).

    Ordered k = -K..K to match NoiseSpectrum storage.  Advances the stream
    counter by exactly one, whether or not the step is later accepted.
    """
    if dt <= 0.0:
        raise ValueError(f"time increment must be positive, got dt={dt}")
    return stream.normal_vector(2 * spectrum.K + 1, np.sqrt(dt))
