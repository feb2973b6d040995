"""Functionals against independent quadrature oracles.

Reference values were computed with scipy.integrate.quad on the smooth
field f(x) = 1 + cos(2 pi x)/2 over [0, 1], with every derivative
supplied in closed form through the chain rule (no finite differences
in the oracle).  Discrete evaluations approach them at second order, so
the pinned tolerances reflect the oracle grid sizes noted below.
"""

import math

import numpy as np
import pytest

from stfilm import (
    AlphaOutOfRange,
    AlphaSingular,
    ModelParams,
    NonPositiveField,
    alpha_entropy,
    bernis_check,
    energy_eps,
    entropy,
    estimate_constants,
    gamma_range,
    grid_function,
    make_grid,
    mass,
    min_and_support,
    positivity_bound_check,
    weighted_integral,
)

# --- frozen oracle values (scipy.integrate.quad, abs err < 2e-10) ---
_ENTROPY_N25 = 0.072864819775289358        # int G(f), G(u) = u^-.5/.75 + u/1.5 - 2
_POT_P4 = 3.7634684213842275               # int f^-4
_ENERGY = 2.4674011002723395               # pi^2/4 = int (f')^2 / 2
_WINT = {
    (0.5, 1, 2.0): 4.8946035793941061,     # int f^1/2 (f')^2
    (2.5, 3, 2.0): 8590.0204910462053,     # int f^5/2 (f''')^2
    (-2.0, 1, 2.0): 6.1073324577550157,    # int f^-2 (f')^2
    (1.5, 2, 3.0): 3512.5414817449341,     # int f^3/2 |f''|^3
}
_BERNIS = {
    "lhs1": 56.957037083267402,            # int |(f^0.75)'|^6
    "lhs2": 12116.366191944768,            # int |(f^1.5)''|^3
    "lhs3": 100374.33895148238,            # int ((f^2.25)''')^2
    "rhs1": 8590.0204910462053,            # int f^2.5 (f''')^2
}


def _field(N):
    g = make_grid(1.0, N)
    return grid_function(g, 1.0 + 0.5 * np.cos(2.0 * np.pi * g.nodes))


def test_mass_exact():
    assert mass(_field(256)) == pytest.approx(1.0, abs=1e-14)


def test_energy_eps_against_oracle():
    f = _field(8192)
    params = ModelParams(n=2.5, p=4.0, eps=1e-3)
    expected = _ENERGY + 1e-3 * _POT_P4
    # first-derivative quadrature carries the O(h^2) error
    assert energy_eps(f, params) == pytest.approx(expected, rel=1e-6)
    assert energy_eps(f, ModelParams(n=2.5)) == pytest.approx(_ENERGY, rel=1e-6)


def test_entropy_against_oracle():
    # no derivatives: rectangle rule on a smooth periodic integrand is
    # spectrally accurate
    assert entropy(_field(4096), 2.5) == pytest.approx(_ENTROPY_N25, abs=1e-12)


def test_entropy_normalization_at_one():
    g = make_grid(1.0, 64)
    ones = grid_function(g, np.ones(64))
    assert entropy(ones, 2.5) == pytest.approx(0.0, abs=1e-15)
    for alpha in (-1.5, -0.5, 0.5, 1.5):
        assert alpha_entropy(ones, alpha) == pytest.approx(0.0, abs=1e-15)


def test_alpha_entropy_reduces_to_entropy():
    # alpha = 1 - n turns the power entropy into the standard one
    f = _field(512)
    assert alpha_entropy(f, -1.5) == pytest.approx(entropy(f, 2.5), rel=1e-14)


def test_alpha_entropy_guards():
    f = _field(64)
    for bad in (0.0, -1.0):
        with pytest.raises(AlphaSingular):
            alpha_entropy(f, bad)
    g = make_grid(1.0, 64)
    neg = grid_function(g, np.full(64, -1.0))
    with pytest.raises(NonPositiveField):
        alpha_entropy(neg, 0.5)
    with pytest.raises(NonPositiveField):
        entropy(neg, 2.5)


def test_alpha_entropy_second_derivative_fd():
    # G_alpha'' = u^(alpha-1), checked by second differences of the density
    g = make_grid(1.0, 64)
    h = 1e-5
    for alpha in (-1.5, -0.4, 0.7):
        for u in (0.6, 1.0, 1.7):
            vals = [
                alpha_entropy(grid_function(g, np.full(64, u + s * h)), alpha)
                for s in (-1, 0, 1)
            ]
            second = (vals[0] - 2.0 * vals[1] + vals[2]) / h**2
            assert second == pytest.approx(u ** (alpha - 1.0), rel=1e-4)


def test_weighted_integral_against_oracles():
    f = _field(8192)
    for (a, m, q), expected in _WINT.items():
        assert weighted_integral(f, a, m, q) == pytest.approx(expected, rel=2e-6)


def test_weighted_integral_refines():
    coarse = abs(weighted_integral(_field(1024), 0.5, 1, 2.0) - _WINT[(0.5, 1, 2.0)])
    fine = abs(weighted_integral(_field(2048), 0.5, 1, 2.0) - _WINT[(0.5, 1, 2.0)])
    assert 3.5 < coarse / fine < 4.5


def test_bernis_check_against_oracles():
    g = make_grid(1.0, 2048)
    f = grid_function(g, 1.0 + 0.5 * np.cos(2.0 * np.pi * g.nodes))
    zeta = grid_function(g, np.ones(2048))
    rep = bernis_check(f, zeta, 2.5)
    for key, expected in _BERNIS.items():
        assert rep.metadata[key] == pytest.approx(expected, rel=1e-4), key
    assert rep.metadata["rhs2"] == 0.0  # constant cutoff has no gradient
    assert rep.value == max(rep.metadata[f"ratio{i}"] for i in (1, 2, 3))
    assert not any(rep.metadata["degenerate"])


def test_bernis_ratios_scale_invariant_in_zeta_support():
    # doubling the field doubles both sides consistently: ratios stay finite
    g = make_grid(1.0, 512)
    f = grid_function(g, 1.0 + 0.5 * np.cos(2.0 * np.pi * g.nodes))
    zeta = grid_function(g, np.ones(512))
    r1 = bernis_check(f, zeta, 2.5).value
    f2 = grid_function(g, 2.0 * f.values)
    r2 = bernis_check(f2, zeta, 2.5).value
    assert math.isfinite(r1) and math.isfinite(r2)
    # both sides scale like u^(n+2) up to derivative placement; the ratio
    # moves but stays within one decade here
    assert 0.1 < r2 / r1 < 10.0


def test_positivity_bound_check_finite_on_positive_fields():
    f = _field(512)
    rep = positivity_bound_check(f, ModelParams(n=2.5, p=4.0, eps=1e-3))
    assert math.isfinite(rep.metadata["chat"])
    assert math.isfinite(rep.metadata["cbar"])
    assert rep.metadata["min"] == pytest.approx(0.5, abs=1e-6)


def test_gamma_range_window():
    # t = alpha + n in [1/2, 2] admits the exponent window
    # (t + 1 -+ sqrt((t-2)(1-2t)))/3; endpoints collapse it to a point
    lo, hi = gamma_range(-0.5, 2.5)  # t = 2
    assert lo == pytest.approx(1.0, abs=1e-14)
    assert hi == pytest.approx(1.0, abs=1e-14)
    lo, hi = gamma_range(-2.0, 2.5)  # t = 1/2
    assert lo == pytest.approx(0.5, abs=1e-14)
    assert hi == pytest.approx(0.5, abs=1e-14)
    lo, hi = gamma_range(-1.25, 2.5)  # t = 1.25 interior
    disc = math.sqrt((1.25 - 2.0) * (1.0 - 2.5))
    assert lo == pytest.approx((2.25 - disc) / 3.0, rel=1e-14)
    assert hi == pytest.approx((2.25 + disc) / 3.0, rel=1e-14)
    assert lo < hi
    with pytest.raises(AlphaOutOfRange):
        gamma_range(0.0, 2.5)  # t = 2.5 outside the window


def test_estimate_constants_reference_point():
    rep = estimate_constants(2.5, S=1.0, c_strat=1.0, mu=0.1, eta=0.001)
    assert rep.metadata["c1"] == pytest.approx(0.007333333333333333, rel=1e-12)
    assert rep.metadata["c2"] == pytest.approx(1.45, rel=1e-12)
    assert rep.metadata["admissible"]


def test_estimate_constants_threshold_consistency():
    # as mu, eta -> 0 admissibility flips exactly at S = S_A3*
    from stfilm import s_thresholds

    n = 2.35
    c = 0.8
    _, star = s_thresholds(n, c)
    above = estimate_constants(n, S=star * (1 + 1e-9), c_strat=c, mu=0.0, eta=0.0)
    below = estimate_constants(n, S=star * (1 - 1e-9), c_strat=c, mu=0.0, eta=0.0)
    assert above.metadata["admissible"]
    assert not below.metadata["admissible"]


def test_min_and_support():
    g = make_grid(1.0, 64)
    v = np.ones(64)
    v[10:20] = 0.0
    f = grid_function(g, v)
    mn, supp = min_and_support(f, threshold=1e-3)
    assert mn == 0.0
    assert supp == pytest.approx(54.0 / 64.0, abs=1e-12)
