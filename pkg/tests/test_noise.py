"""Spectral noise basis, its closed-form constants, and the RNG contract."""

import numpy as np
import pytest

from stfilm import (
    DecayTooWeak,
    RngStream,
    TruncationTooLarge,
    basis_deriv,
    basis_eval,
    build_spectrum,
    c_strat,
    make_grid,
    onb_relation_values,
    s_thresholds,
    sample_increments,
    theta_sums,
)

# frozen reference constants for the power-decay spectrum
# amplitude 0.3, decay 3, K = 8 on L = 1:
#   Theta_0 = 0.09 * (1 + 2 * sum_{k=1..8} k^-6)  (lambda_k = 0.3 k^-3)
#   c_strat = (n^2/8) * Theta_0 at n = 2.5
_THETA0_PD = 0.2731209535377015
_CSTRAT_PD = 0.2133757449513293


def test_basis_orthonormality_by_quadrature():
    # rectangle rule is exact for products of modes up to K << N
    L = 2.0
    g = make_grid(L, 512)
    for j in (-3, -1, 0, 2, 5):
        for k in (-3, -1, 0, 2, 5):
            val = float(np.sum(basis_eval(j, g.nodes, L) * basis_eval(k, g.nodes, L))) * g.dx
            assert val == pytest.approx(1.0 if j == k else 0.0, abs=1e-12)


def test_basis_derivatives_are_exact():
    L = 1.5
    x = np.linspace(0.0, L, 71, endpoint=False)
    h = 1e-6
    for k in (-4, -1, 0, 1, 3):
        w = 2.0 * np.pi * k / L
        g0 = basis_eval(k, x, L)
        fd1 = (basis_eval(k, x + h, L) - basis_eval(k, x - h, L)) / (2.0 * h)
        assert np.allclose(basis_deriv(k, x, L, 1), fd1, atol=1e-6 * (1 + abs(w)) ** 2)
        # modes are eigenfunctions of the second derivative
        assert np.allclose(basis_deriv(k, x, L, 2), -(w**2) * g0, atol=1e-10)


def test_spectrum_palindrome_and_modes():
    sp = build_spectrum("power-decay", 0.3, K=8, decay=3.0, L=1.0)
    lam = np.asarray(sp.lambdas)
    assert lam.shape == (17,)
    assert np.allclose(lam, lam[::-1])  # lambda_{-k} = lambda_k
    assert lam[8] == 0.3
    assert lam[8 + 4] == pytest.approx(0.3 * 4.0**-3, abs=0)
    flat = build_spectrum("flat", 0.5, K=4)
    assert np.all(np.asarray(flat.lambdas) == 0.5)
    single = build_spectrum("single", 0.7)
    assert np.asarray(single.lambdas).tolist() == [0.7]


def test_spectrum_guards():
    with pytest.raises(DecayTooWeak):
        build_spectrum("power-decay", 0.3, K=8, decay=2.5)
    with pytest.raises(ValueError):
        build_spectrum("flat", -0.1, K=2)
    with pytest.raises(ValueError):
        build_spectrum("nope", 0.1)


def test_theta_sums_against_direct_series():
    sp = build_spectrum("power-decay", 0.3, K=8, decay=3.0, L=1.0)
    th0, th1, th2 = theta_sums(sp)
    ks = np.arange(1, 9, dtype=float)
    lam = 0.3 * ks**-3
    assert th0 == pytest.approx((0.3**2 + 2.0 * np.sum(lam**2)), rel=1e-15)
    assert th1 == pytest.approx(np.sum(8.0 * np.pi**2 * ks**2 * lam**2), rel=1e-14)
    assert th2 == pytest.approx(np.sum(32.0 * np.pi**4 * ks**4 * lam**2), rel=1e-14)
    assert th0 == pytest.approx(_THETA0_PD, abs=1e-15)


def test_c_strat_closed_form_and_quadrature():
    sp = build_spectrum("power-decay", 0.3, K=8, decay=3.0, L=1.0)
    n = 2.5
    assert c_strat(sp, n) == pytest.approx(_CSTRAT_PD, abs=1e-15)
    # independent quadrature of (1/2)(n^2/4) sum_k lambda_k^2 g_k(x)^2
    g = make_grid(1.0, 1024)
    lam = np.asarray(sp.lambdas)
    total = np.zeros(g.N)
    for i, k in enumerate(sp.ks):
        total += lam[i] ** 2 * basis_eval(k, g.nodes, 1.0) ** 2
    quadrature = 0.5 * (n**2 / 4.0) * float(np.sum(total)) * g.dx / 1.0
    assert abs(c_strat(sp, n) - quadrature) < 1e-13


def test_s_thresholds_reference_values():
    # closed forms at n = 2.5, c_strat = 1:
    #   S_A3    = 3 * 2^(4-n) (n-2)/(3-n)      = 3 * 2^1.5
    #   S_A3*   = (9/4)(n-2)^2 / ((3-n)(2n-3)) = 9/16
    s_a3, s_a3star = s_thresholds(2.5, 1.0)
    assert s_a3 == pytest.approx(8.485281374238571, abs=1e-14)
    assert s_a3star == pytest.approx(0.5625, abs=1e-14)
    # linear in the drift constant
    a, b = s_thresholds(2.5, 0.25)
    assert a == pytest.approx(s_a3 / 4.0, rel=1e-14)
    assert b == pytest.approx(s_a3star / 4.0, rel=1e-14)


def test_onb_relations_small_deviation():
    g = make_grid(1.0, 128)
    for sp in (
        build_spectrum("power-decay", 1.0, K=8, decay=3.0, L=1.0),
        build_spectrum("flat", 0.5, K=4, L=1.0),
    ):
        rep = onb_relation_values(sp, g)
        assert rep.max_deviation <= 1e-12


def test_onb_truncation_guard():
    g = make_grid(1.0, 16)
    sp = build_spectrum("flat", 1.0, K=8)
    with pytest.raises(TruncationTooLarge):
        onb_relation_values(sp, g)


def test_increment_variance_matches_dt():
    sp = build_spectrum("flat", 1.0, K=2)
    dt = 1e-3
    stream = RngStream(base_seed=123, trajectory_id=0)
    draws = np.stack([sample_increments(sp, dt, stream) for _ in range(20000)])
    assert draws.shape == (20000, 5)
    var = draws.var(axis=0, ddof=1)
    assert np.all(var > 0.95 * dt) and np.all(var < 1.05 * dt)
    mean = draws.mean(axis=0)
    assert np.max(np.abs(mean)) < 4.0 * np.sqrt(dt / 20000)


def test_stream_reproducible_and_counter_addressed():
    sp = build_spectrum("flat", 1.0, K=3)
    a = RngStream(base_seed=9, trajectory_id=4)
    b = RngStream(base_seed=9, trajectory_id=4)
    d1 = sample_increments(sp, 0.1, a)
    d2 = sample_increments(sp, 0.1, b)
    assert np.array_equal(d1, d2)  # bit identical
    assert a.counter == b.counter == 1
    # skipping ahead reproduces later blocks without replaying earlier ones
    c = RngStream(base_seed=9, trajectory_id=4, counter=1)
    assert np.array_equal(sample_increments(sp, 0.1, a), sample_increments(sp, 0.1, c))


def test_streams_differ_across_trajectories_and_seeds():
    sp = build_spectrum("flat", 1.0, K=3)
    base = sample_increments(sp, 0.1, RngStream(7, 0))
    other_tid = sample_increments(sp, 0.1, RngStream(7, 1))
    other_seed = sample_increments(sp, 0.1, RngStream(8, 0))
    assert not np.array_equal(base, other_tid)
    assert not np.array_equal(base, other_seed)


def test_uniform_helper_advances_counter_once():
    s = RngStream(1, 2)
    v = s.uniform(0.5, 1.0)
    assert 0.5 <= v <= 1.0
    assert s.counter == 1
    # same counter, same value
    s2 = RngStream(1, 2)
    assert s2.uniform(0.5, 1.0) == v
