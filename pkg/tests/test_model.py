import numpy as np
import pytest

from dualwave.grid import Grid
from dualwave.model import (ConfigError, Nonlinearity, Potential, Problem, SamplingPlan,
                            choose_shift, critical_exponent, validate)

PLAN = SamplingPlan(count=2000, quad_points=8)


@pytest.fixture(scope="module")
def grid():
    return Grid(1, 12.0, 801)


def test_choose_shift_examples(grid):
    assert choose_shift(Potential.constant(5.0), grid) == 0.0
    assert choose_shift(Potential.harmonic(4.0), grid) == pytest.approx(6.0)
    assert choose_shift(Potential.quartic(10.0), grid) == pytest.approx(12.0)


def test_choose_shift_rejects_unbounded(grid):
    with pytest.raises(ConfigError):
        choose_shift(Potential.constant(-1e13), grid)


def test_shift_resolution_and_shifted_data(grid):
    p = Problem(Potential.harmonic(4.0), Nonlinearity.power(6), 1)
    with pytest.raises(ConfigError):
        p.m
    q = p.with_grid(grid)
    assert q.m == pytest.approx(6.0)
    t = np.linspace(-3, 3, 11)
    np.testing.assert_allclose(q.g_shift(t), t**5 + 6 * t)
    np.testing.assert_allclose(q.G_shift(t), t**6 / 6 + 3 * t**2)
    assert q.shifted_potential_values(grid).min() == pytest.approx(2.0)


def test_critical_exponent():
    assert critical_exponent(1) == np.inf
    assert critical_exponent(2) == np.inf
    assert critical_exponent(3) == pytest.approx(12.0)


def test_indefinite_oscillator_passes(grid):
    p = Problem(Potential.harmonic(4.0), Nonlinearity.power(6), 1).with_grid(grid)
    rep = validate(p, grid, PLAN)
    assert rep.passed, rep.lines()
    assert rep["potential:shift"].worst_slack > 0.0


def test_power_law_equality_in_superlinearity():
    g3 = Grid(3, 5.0, 201)
    p = Problem(Potential.harmonic(0.0), Nonlinearity.power(6), 3).with_grid(g3)
    rep = validate(p, g3, PLAN)
    assert rep["superlinear:mu*G<=t*g"].passed
    assert abs(rep["superlinear:mu*G<=t*g"].worst_slack) < 1e-12
    assert rep["growth:exponent"].passed


def test_cubic_fails_superlinearity(grid):
    p = Problem(Potential.harmonic(0.0), Nonlinearity.power(4, mu=4.5), 1).with_grid(grid)
    rep = validate(p, grid, PLAN)
    assert not rep["superlinear:mu*G<=t*g"].passed
    assert not rep["growth:exponent"].passed
    assert not rep.passed


def test_supercritical_exponent_rejected():
    g3 = Grid(3, 5.0, 201)
    p = Problem(Potential.harmonic(0.0), Nonlinearity.power(14), 3).with_grid(g3)
    assert not validate(p, g3, PLAN)["growth:exponent"].passed


def test_primitive_check_double_power(grid):
    nl = Nonlinearity.double_power(6, 8, 1.0, 0.5)
    p = Problem(Potential.harmonic(0.0), nl, 1).with_grid(grid)
    rep = validate(p, grid, PLAN)
    assert rep["G:primitive"].passed
    assert rep["origin:g(t)/t->0"].passed


def test_zero_nonlinearity_fails_positivity(grid):
    p = Problem(Potential.harmonic(0.0), Nonlinearity.zero(), 1).with_grid(grid)
    assert not validate(p, grid, PLAN)["superlinear:mu*G>0"].passed


def test_table_potential_interpolates():
    pot = Potential.table([0.0, 1.0, 2.0], [0.0, 2.0, 6.0])
    np.testing.assert_allclose(pot(np.array([0.5, 1.5, 3.0])), [1.0, 4.0, 6.0])
    with pytest.raises(ConfigError):
        Potential.table([0.0, 0.0], [1.0, 2.0])


def test_problem_rejects_bad_dimension_and_shift():
    with pytest.raises(ConfigError):
        Problem(Potential.constant(1.0), Nonlinearity.power(6), 4)
    with pytest.raises(ConfigError):
        Problem(Potential.constant(1.0), Nonlinearity.power(6), 1, shift=-1.0)


def test_shifted_potential_accumulates_omega():
    pot = Potential.harmonic(1.0).shifted(2.0)
    assert pot(np.array([0.0]))[0] == pytest.approx(-3.0)
    assert pot.declared_inf == pytest.approx(-3.0)
    assert pot.to_dict()["omega"] == pytest.approx(3.0)
