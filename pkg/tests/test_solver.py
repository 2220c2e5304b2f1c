from dataclasses import replace

import numpy as np
import pytest

from dualwave.energy import Functional
from dualwave.grid import Grid
from dualwave.model import Nonlinearity, Potential, Problem
from dualwave.solver import (SolverError, SolverOptions, _CeramiAbort, _Tracker, anti_coercivity_probe,
                             choose_level, continuation_in_omega, fit_growth_constants,
                             large_norm_sweep, local_linking_probe, local_linking_solve,
                             mountain_pass_solve, multiplicity_search, newton_refine, prolong,
                             sign_changes, solve)
from dualwave.spectrum import eigenpairs
from dualwave.transform import f

LOOSE = SolverOptions(res_tol=1e-4)
# second-order residual constants are larger for sign-changing solutions
COARSE = SolverOptions(res_tol=1e-2)
DEFINITE = Problem(Potential.harmonic(-1.0), Nonlinearity.power(6), 1)
INDEFINITE = Problem(Potential.harmonic(4.0), Nonlinearity.power(6), 1, shift=6.0)


@pytest.fixture(scope="module")
def grid():
    return Grid(1, 6.0, 2001)


@pytest.fixture(scope="module")
def mp(grid):
    split = eigenpairs(DEFINITE, grid, 8)
    return mountain_pass_solve(DEFINITE, grid, split, LOOSE)


@pytest.fixture(scope="module")
def ll(grid):
    split = eigenpairs(INDEFINITE, grid, 12)
    return split, local_linking_solve(INDEFINITE, grid, split, COARSE)


def test_mountain_pass_ground_state(mp, grid):
    assert mp.converged and not mp.trivial, mp.message
    assert mp.mode == "mountain-pass"
    assert mp.grad_norm <= LOOSE.grad_tol
    assert mp.phi > 0 and mp.J == pytest.approx(mp.phi, rel=1e-6)
    u = mp.u * np.sign(mp.u[grid.n // 2])
    assert sign_changes(u) == 0 and u.min() >= -1e-12
    np.testing.assert_allclose(u, u[::-1], atol=1e-8)  # even profile
    assert np.array_equal(mp.u, f(mp.v))
    assert mp.morse_index == 1
    assert mp.rho_history and np.isfinite(mp.rho_floor)


def test_mountain_pass_sign_symmetry(mp, grid):
    split = eigenpairs(DEFINITE, grid, 8)
    rep = mountain_pass_solve(DEFINITE, grid, split, LOOSE, start=-split.phi(1))
    assert rep.converged
    assert np.abs(rep.v + mp.v).max() <= 1e-6 * np.abs(mp.v).max()


def test_mountain_pass_value_second_order():
    vals = []
    for n in (501, 1001, 2001):
        g = Grid(1, 6.0, n)
        rep = solve(DEFINITE, g, eigenpairs(DEFINITE, g, 6), SolverOptions(res_tol=1e-2))
        assert rep.converged
        vals.append(rep.phi)
    ratio = (vals[1] - vals[0]) / (vals[2] - vals[1])
    assert ratio == pytest.approx(4.0, rel=0.05)


def test_mountain_pass_requires_positive_operator(grid):
    split = eigenpairs(INDEFINITE, grid, 8)
    with pytest.raises(SolverError):
        mountain_pass_solve(INDEFINITE, grid, split)


def test_local_linking_solution(ll):
    split, rep = ll
    assert rep.converged and not rep.trivial, rep.message
    assert rep.mode == "local-linking"
    assert rep.grad_norm <= COARSE.grad_tol
    assert rep.morse_index >= 2
    assert rep.J == pytest.approx(rep.phi, rel=1e-6)


def test_local_linking_with_ell_zero_matches_mountain_pass(mp, grid):
    split = eigenpairs(DEFINITE, grid, 8)
    rep = local_linking_solve(DEFINITE, grid, split, LOOSE)
    assert rep.converged
    assert rep.phi == pytest.approx(mp.phi, rel=1e-10)


def test_local_linking_refuses_degenerate(grid):
    p = Problem(Potential.harmonic(3.0), Nonlinearity.power(6), 1)
    split = eigenpairs(p, grid, 8)
    assert split.degenerate
    with pytest.raises(SolverError):
        local_linking_solve(p, grid, split)


def test_newton_refine_basin(mp, grid):
    rep = newton_refine(DEFINITE, grid, mp.v, LOOSE)
    assert rep.converged and len(rep.iterations) <= 2
    rng = np.random.default_rng(0)
    v0 = mp.v + 1e-3 * grid.field(rng.standard_normal(grid.n))
    rep = newton_refine(DEFINITE, grid, v0, LOOSE)
    assert rep.converged and len(rep.iterations) <= 11  # initial record + at most 10 steps
    assert np.abs(rep.v - mp.v).max() <= 1e-6
    rep = newton_refine(DEFINITE, grid, grid.zeros(), LOOSE)
    assert rep.trivial and rep.phi == 0.0


def test_two_grid_option_matches_direct():
    g = Grid(1, 6.0, 4001)
    split = eigenpairs(INDEFINITE, g, 12)
    direct = local_linking_solve(INDEFINITE, g, split, COARSE)
    twogrid = local_linking_solve(INDEFINITE, g, split, replace(COARSE, coarse_n=1001))
    assert twogrid.converged and twogrid.extra["coarse_n"] == 1001
    assert np.abs(twogrid.v - direct.v).max() <= 1e-7
    assert any(e["stage"].startswith("coarse-") for e in twogrid.iterations)


def test_prolong_is_exact_for_linear_fields():
    a, b = Grid(1, 2.0, 11), Grid(1, 2.0, 41)
    v = a.field(1.0 - np.abs(a.x) / 2)
    np.testing.assert_allclose(prolong(v, a, b), b.field(1.0 - np.abs(b.x) / 2), atol=1e-15)


def test_growth_constants_and_level(ll):
    split, _ = ll
    c1, c2 = fit_growth_constants(INDEFINITE)
    t = np.logspace(-4, 4, 500)
    lhs = np.abs(INDEFINITE.nonlinearity.G(f(t)))
    assert np.all(lhs <= c1 * t**2 + c2 * t**3 * (1 + 1e-12))
    k = choose_level(split, c1)
    assert k > split.ell
    assert 0.5 * split.eta - c1 * split.beta(k) ** 2 > 0


def test_multiplicity_on_coarse_grid():
    g = Grid(1, 6.0, 4001)
    split = eigenpairs(INDEFINITE, g, 20)
    reps, levels = multiplicity_search(INDEFINITE, g, split, 3, COARSE)
    assert len(reps) == 3, levels
    phis = [r.phi for r in reps]
    assert all(b - a >= 1e-6 for a, b in zip(phis, phis[1:]))
    counts = [r.sign_changes() for r in reps]
    assert counts == sorted(counts)
    assert all(r.extra["neg_grad_norm"] <= 1e-8 for r in reps)
    assert [lv["status"] for lv in levels] == ["accepted"] * 3


def test_multiplicity_eigen_basis_first_levels():
    g = Grid(1, 6.0, 2001)
    split = eigenpairs(INDEFINITE, g, 20)
    opts = SolverOptions(res_tol=1e-2, extra_levels=0)
    reps, _ = multiplicity_search(INDEFINITE, g, split, 2, opts, basis="eigen")
    assert len(reps) == 2
    with pytest.raises(ValueError):
        multiplicity_search(INDEFINITE, g, split, 2, opts, basis="other")


def test_multiplicity_requires_odd_nonlinearity(ll, grid):
    split, _ = ll
    even = replace(INDEFINITE, nonlinearity=replace(INDEFINITE.nonlinearity, odd=False))
    with pytest.raises(SolverError):
        multiplicity_search(even, grid, split)


def test_local_linking_probe(ll, grid):
    split, _ = ll
    res = local_linking_probe(INDEFINITE, grid, split, 1e-2, 200)
    assert res.passed
    assert res.details["minus_max"] <= 1e-12 and res.details["plus_min"] > 0
    big = local_linking_probe(INDEFINITE, grid, split, 10.0, 20)
    assert set(big.details) >= {"minus_ok", "plus_ok"}  # reported, not asserted
    split0 = eigenpairs(DEFINITE, grid, 8)
    res0 = local_linking_probe(DEFINITE, grid, split0, 1e-2, 50)
    assert res0.passed and res0.details["minus_max"] == -np.inf


def test_anti_coercivity_probe(ll, grid):
    split, _ = ll
    one = anti_coercivity_probe(INDEFINITE, grid, split.eigenfields[:1], (10, 20, 40, 80))
    assert one.passed and one.details["negative_at_all_radii"]
    five = anti_coercivity_probe(INDEFINITE, grid, split.eigenfields[:5], (20, 40, 80))
    assert five.passed and five.details["negative_at_all_radii"]
    xunit = anti_coercivity_probe(INDEFINITE, grid, split.eigenfields[:5], (10, 20, 40, 80, 160),
                                  norm="x")
    assert xunit.passed
    with pytest.raises(ValueError):
        anti_coercivity_probe(INDEFINITE, grid, [split.phi(1), 2 * split.phi(1)])


def test_large_norm_sweep_small(ll, grid):
    split, _ = ll
    res = large_norm_sweep(INDEFINITE, grid, split.eigenfields[:5], n_dirs=5, n_s=41)
    assert res.passed and res.details["n_checked"] > 0 and res.details["A"] >= 1.0


def test_continuation_small_grid():
    g = Grid(1, 6.0, 2001)
    base = Problem(Potential.harmonic(0.0), Nonlinearity.power(6), 1)
    pts = continuation_in_omega(base, g, [0.0, 2.0, 3.0, 4.0], COARSE, K=12)
    assert [p.ell for p in pts] == [0, 1, 2, 2]
    assert [p.mode for p in pts] == ["mountain-pass", "local-linking", "skipped", "local-linking"]
    assert pts[2].degenerate and pts[2].report is None
    assert all(p.report.converged for p in pts if p.report is not None)
    with pytest.raises(ValueError):
        continuation_in_omega(base, g, [2.0, 1.0])


def test_warm_start_reduces_iterations():
    g = Grid(1, 6.0, 2001)
    base = Problem(Potential.harmonic(0.0), Nonlinearity.power(6), 1)
    warm = continuation_in_omega(base, g, [3.6, 4.0], COARSE, K=12, warm=True)
    cold = continuation_in_omega(base, g, [3.6, 4.0], COARSE, K=12, warm=False)
    assert warm[1].warm and not cold[1].warm
    assert warm[1].report.phi == pytest.approx(cold[1].report.phi, rel=1e-8)
    assert warm[1].report.extra["outer_iterations"] < cold[1].report.extra["outer_iterations"]


def test_cerami_abort_rule(grid):
    fn = Functional(DEFINITE, grid)
    tr = _Tracker(fn, growth=10.0)
    v = grid.field(np.exp(-grid.x**2))
    tr.record("x", v, grad=1.0)
    with pytest.raises(_CeramiAbort):
        tr.record("x", 100 * v, grad=2.0)
