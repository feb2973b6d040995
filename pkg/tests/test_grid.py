"""Mesh geometry and the staggered difference operators."""

import numpy as np
import pytest

from stfilm import (
    GridFunction,
    NegativeBase,
    deriv,
    grid_function,
    integrate,
    make_grid,
    pointwise_power,
)


def test_geometry():
    g = make_grid(2.0, 64)
    assert g.dx == 2.0 / 64
    assert g.nodes[0] == 0.0
    assert g.nodes[-1] == pytest.approx(2.0 - g.dx)
    # faces sit halfway between nodes
    assert g.faces[0] == pytest.approx(0.5 * g.dx)
    assert len(g.faces) == 64


def test_grid_validation():
    with pytest.raises(ValueError):
        make_grid(1.0, 15)  # odd
    with pytest.raises(ValueError):
        make_grid(-1.0, 64)
    with pytest.raises(ValueError):
        make_grid(1.0, 8)  # too coarse


def test_grid_function_checks_length():
    g = make_grid(1.0, 32)
    with pytest.raises(ValueError):
        grid_function(g, np.ones(31))
    f = grid_function(g, np.ones(32))
    assert isinstance(f, GridFunction)
    with pytest.raises(ValueError):
        f.values[0] = 2.0  # storage is read-only


def test_integrate_exact_on_constants():
    g = make_grid(3.0, 48)
    f = grid_function(g, np.full(48, 2.5))
    assert integrate(f) == pytest.approx(7.5, abs=1e-14)


def test_deriv_converges_second_order():
    # oracle: exact derivatives of sin(2 pi x) on [0, 1)
    tp = 2.0 * np.pi
    errs = {}
    for N in (64, 128):
        g = make_grid(1.0, N)
        f = grid_function(g, np.sin(tp * g.nodes))
        exact = {
            1: tp * np.cos(tp * g.nodes),
            2: -tp**2 * np.sin(tp * g.nodes),
            3: -tp**3 * np.cos(tp * g.nodes),
        }
        for m in (1, 2, 3):
            errs[(m, N)] = float(np.max(np.abs(deriv(f, m).values - exact[m])))
    for m in (1, 2, 3):
        ratio = errs[(m, 64)] / errs[(m, 128)]
        assert 3.5 < ratio < 4.5, f"order-2 convergence broken for m={m}: {ratio}"


def test_deriv_annihilates_constants():
    g = make_grid(1.0, 32)
    f = grid_function(g, np.full(32, 4.2))
    for m in (1, 2, 3):
        assert np.max(np.abs(deriv(f, m).values)) < 1e-12


def test_pointwise_power_matches_numpy_and_guards_negative():
    g = make_grid(1.0, 32)
    f = grid_function(g, 1.0 + 0.5 * np.sin(2 * np.pi * g.nodes))
    out = pointwise_power(f, 2.5)
    assert np.allclose(out.values, f.values**2.5, rtol=0, atol=0)
    neg = grid_function(g, f.values - 1.2)
    with pytest.raises(NegativeBase):
        pointwise_power(neg, 2.5)
    # integer powers are polynomial and legal on any sign
    cube = pointwise_power(neg, 3.0)
    assert np.allclose(cube.values, neg.values**3)


def test_integrate_trig_is_spectrally_exact():
    g = make_grid(1.0, 64)
    f = grid_function(g, 1.0 + np.cos(2 * np.pi * g.nodes))
    # rectangle rule integrates low trig modes exactly on a periodic mesh
    assert integrate(f) == pytest.approx(1.0, abs=1e-14)
