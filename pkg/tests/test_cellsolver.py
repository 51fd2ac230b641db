import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afhom.cellsolver import (SolveOptions, compact_basis, lipschitz_check, lipschitz_constant, potential_field,
                              solve_compact, solve_periodic, solve_relaxed)
from afhom.errors import ConfigError
from afhom.fields import Grid, support_mask
from afhom.integrand import DoubleWell, Laminate, PPower, Quadratic
from afhom.operator import apply_A, curl2d, divergence

from oracles import laminate_1d_oracle

DIV = divergence(2)
FAST = SolveOptions(max_iters=1500, restarts=2)


@pytest.mark.parametrize("xi,expected", [((1.0, 0.0), 2.5), ((0.0, 1.0), 1.6000000000000005),
                                         ((2.0, 0.0), 10.0), ((1.0, 1.0), 4.1)])
def test_periodic_laminate_matches_oracle(xi, expected):
    oracle, _ = laminate_1d_oracle(32, xi)
    assert oracle == pytest.approx(expected, rel=1e-12)
    sol = solve_periodic(DIV, Laminate(), xi, Grid(32, 2))
    assert sol.normalized == pytest.approx(expected, rel=1e-6)
    assert sol.constraint_residual <= 1e-10
    assert sol.status == "ok"


def test_curl_laminate_swaps_directions():
    g = Grid(32, 2)
    assert solve_periodic(curl2d(), Laminate(), (0.0, 1.0), g).normalized == pytest.approx(2.5, rel=1e-6)
    assert solve_periodic(curl2d(), Laminate(), (1.0, 0.0), g).normalized == pytest.approx(1.6, rel=1e-6)


@settings(max_examples=10, deadline=None)
@given(a=st.floats(0.2, 5.0), x0=st.floats(-3, 3), x1=st.floats(-3, 3))
def test_homogeneous_convex_minimum_is_f_of_xi(a, x0, x1):
    f = Quadratic(a)
    g = Grid(16, 2)
    target = a * (x0 * x0 + x1 * x1)
    assert solve_periodic(DIV, f, (x0, x1), g).normalized == pytest.approx(target, rel=1e-9, abs=1e-12)
    assert solve_compact(DIV, f, (x0, x1), g).normalized == pytest.approx(target, rel=1e-9, abs=1e-12)


def test_ppower_non_quadratic():
    sol = solve_periodic(DIV, PPower(3.0), (3.0, 4.0), Grid(16, 2))
    assert sol.normalized == pytest.approx(125.0, rel=1e-9)


def test_value_scales_with_volume():
    a = solve_periodic(DIV, Laminate(), (1.0, 1.0), Grid(16, 2, side=2.0))
    assert a.value == pytest.approx(4 * a.normalized, rel=1e-14)


def test_compact_feasible_and_above_periodic():
    g = Grid(16, 2)
    per = solve_periodic(DIV, Laminate(), (0.0, 1.0), g)
    comp = solve_compact(DIV, Laminate(), (0.0, 1.0), g, margin=0.125)
    assert comp.status == "ok"
    assert comp.constraint_residual <= 1e-6
    u = comp.minimizer.data
    assert np.all(u[:, ~support_mask(g, 0.125)] == 0)
    assert np.max(np.abs(u.reshape(2, -1).mean(axis=1))) <= 1e-12
    assert comp.diagnostics["subspace_dim"] > 0
    assert per.normalized <= comp.normalized + 1e-9
    assert comp.normalized == pytest.approx(2.3367, abs=2e-3)


def test_compact_basis_is_orthonormal_and_A_free():
    g = Grid(16, 2)
    B, mask = compact_basis(DIV, g, 0.125)
    np.testing.assert_allclose(B.T @ B, np.eye(B.shape[1]), atol=1e-10)
    assert compact_basis(DIV, g, 0.125)[0] is B


def test_compact_margin_bounds():
    with pytest.raises(ConfigError):
        solve_compact(DIV, Laminate(), (1.0, 0.0), Grid(16, 2), margin=0.3)
    with pytest.raises(ConfigError):
        solve_relaxed(DIV, Laminate(), (1.0, 0.0), Grid(16, 2), eta=1.0, margin=0.0)


def test_relaxed_monotone_in_eta_and_below_compact():
    g = Grid(16, 2)
    comp = solve_compact(DIV, Laminate(), (0.0, 1.0), g)
    vals = []
    for eta in (1e-6, 1e-3, 1e-1, 10.0, 1e9):
        s = solve_relaxed(DIV, Laminate(), (0.0, 1.0), g, eta, opts=FAST)
        assert s.eta_usage < 1.0
        assert s.diagnostics["budget"] < eta
        vals.append(s.normalized)
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= comp.normalized + 1e-6


def test_relaxed_warm_start_is_used():
    g = Grid(16, 2)
    comp = solve_compact(DIV, Laminate(), (0.0, 1.0), g)
    s = solve_relaxed(DIV, Laminate(), (0.0, 1.0), g, 1e9, opts=SolveOptions(restarts=0, max_iters=5),
                      warm=comp.minimizer.data)
    assert s.normalized <= comp.normalized + 1e-9


def test_potential_duality_for_A_free_compact_field():
    g = Grid(16, 2)
    comp = solve_compact(DIV, Laminate(), (0.0, 1.0), g)
    V = potential_field(DIV, comp.minimizer)
    assert V.components == 2
    # A-free fields have a vanishing minimal potential
    assert np.max(np.abs(V.data)) <= 1e-6 * max(1.0, np.max(np.abs(comp.minimizer.data)))
    assert apply_A(DIV, comp.minimizer)[1] <= 1e-6


def test_tiny_eta_pins_minimum_near_f_of_xi():
    s = solve_relaxed(DIV, DoubleWell((0.0, 1.0)), (0.0, 0.0), Grid(16, 2), 1e-30,
                      opts=SolveOptions(max_iters=200, restarts=0, bisection_steps=5))
    assert s.diagnostics["budget"] < 1e-30
    assert s.normalized == pytest.approx(1.0, abs=1e-6)


def test_determinism():
    g = Grid(16, 2)
    a = solve_relaxed(DIV, DoubleWell((0.0, 1.0)), (0.0, 0.0), g, 1.0, opts=FAST)
    b = solve_relaxed(DIV, DoubleWell((0.0, 1.0)), (0.0, 0.0), g, 1.0, opts=FAST)
    assert a.normalized == b.normalized
    assert np.array_equal(a.minimizer.data, b.minimizer.data)


def test_relaxation_decreases_double_well():
    g = Grid(16, 2)
    s = solve_periodic(DIV, DoubleWell((0.0, 1.0)), (0.0, 0.0), g)
    assert s.normalized < 0.5


def test_lipschitz_check_and_constant():
    f = Laminate()
    assert lipschitz_constant(f.c0, f.c1, f.p) == pytest.approx(f.c1 * (2 + f.c0 ** 0.5))
    res = lipschitz_check(DIV, f, (1.0, 0.0), (1.1, 0.2), Grid(16, 2), 1.0, opts=FAST)
    assert res["passed"]
    assert res["empirical_c5"] <= res["c5"]


def test_wrong_xi_dimension():
    with pytest.raises(ConfigError):
        solve_periodic(DIV, Laminate(), (1.0, 0.0, 0.0), Grid(16, 2))


def test_solution_json():
    out = solve_compact(DIV, Laminate(), (1.0, 0.0), Grid(16, 2)).to_json()
    assert out["kind"] == "compact"
    assert set(out["residuals"]) >= {"constraint", "mean", "support"}
    assert out["growth_ok"] is True


def test_options_validation():
    with pytest.raises(ConfigError):
        SolveOptions(grad_tol=0)
    with pytest.raises(ConfigError):
        SolveOptions(backtrack=1.5)
