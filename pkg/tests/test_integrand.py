import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afhom.errors import ConfigError, ExtrapolationError
from afhom.integrand import (Checkerboard, CustomTable, DoubleWell, Laminate, PPower, Quadratic,
                             RandomCheckerboard, cell_uniforms, integrand_from_json, make_periodic_plus_compact,
                             rescale, sample_random, shift, verify_growth, verify_plip)

DETERMINISTIC = [PPower(2.0), PPower(1.5), PPower(3.0), Quadratic(2.0), Laminate(), Checkerboard(),
                 DoubleWell((1.0, 0.0)), make_periodic_plus_compact(Laminate(), Quadratic(1.0), 2.0),
                 rescale(Checkerboard(), 0.25)]


@pytest.mark.parametrize("f", DETERMINISTIC, ids=lambda f: f.kind)
def test_builtin_constants_pass_validators(f):
    assert verify_growth(f).passed
    assert verify_plip(f).passed


def test_random_family_constants_pass():
    f = sample_random(RandomCheckerboard(), 3)
    assert verify_growth(f).passed
    assert verify_plip(f).passed


def test_too_small_c0_is_flagged_with_witness():
    rep = verify_growth(PPower(2.0, c0=0.5))
    assert not rep.passed and rep.witnesses and rep.worst_margin < 0


def test_table_jump_flagged_by_plip():
    f = CustomTable(radii=(0.0, 1.0, 1.0, 2.0), values=(0.0, 1.0, 3.0, 4.0), p=2.0, c0=10.0, c1=1.0)
    rep = verify_plip(f)
    assert not rep.passed
    assert rep.witnesses


def test_table_extrapolation_raises():
    f = CustomTable(radii=(0.0, 1.0), values=(0.0, 1.0))
    with pytest.raises(ExtrapolationError):
        f.eval(np.zeros((2, 1)), np.array([[2.0], [0.0]]))


def test_laminate_halfopen_cells():
    f = Laminate(1.0, 4.0)
    x = np.array([[0.0, 0.49, 0.5, 0.99, 1.0], [0, 0, 0, 0, 0]])
    np.testing.assert_array_equal(f.coefficient(x), [1, 1, 4, 4, 1])


def test_checkerboard_pattern():
    f = Checkerboard(1.0, 4.0)
    x = np.array([[0.1, 0.6, 0.1, 0.6], [0.1, 0.1, 0.6, 0.6]])
    np.testing.assert_array_equal(f.coefficient(x), [1, 4, 4, 1])


@pytest.mark.parametrize("f", DETERMINISTIC, ids=lambda f: f.kind)
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_gradient_matches_finite_differences(f, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, size=(2, 1))
    xi = rng.standard_normal((2, 1)) * 2
    if isinstance(f, DoubleWell):
        z = np.asarray(f.zeta)[:, None]
        if abs(np.linalg.norm(xi - z) - np.linalg.norm(xi + z)) < 1e-3:
            return
    g = f.grad_xi(x, xi)[:, 0]
    h = 1e-6
    fd = np.array([(f.eval(x, xi + h * e[:, None]) - f.eval(x, xi - h * e[:, None]))[0] / (2 * h)
                   for e in np.eye(2)])
    np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-5)


def test_bound_evaluator_matches_eval():
    x = np.random.default_rng(0).uniform(-1, 1, (2, 8, 8))
    xi = np.random.default_rng(1).standard_normal((2, 8, 8))
    for f in DETERMINISTIC:
        b = f.bind(x)
        np.testing.assert_allclose(b.value(xi), f.eval(x, xi), rtol=1e-13)
        np.testing.assert_allclose(b.grad(xi), f.grad_xi(x, xi), rtol=1e-13, atol=1e-13)


def test_rescale_composes():
    f = rescale(rescale(Laminate(), 0.5), 0.5)
    assert f.eps == 0.25
    x = np.array([[0.2], [0.0]])
    xi = np.array([[1.0], [0.0]])
    assert f.eval(x, xi)[0] == Laminate().eval(x / 0.25, xi)[0]
    assert rescale(Laminate(), 1.0).kind == "laminate"


def test_periodic_plus_compact_is_additive_inside_only():
    f = make_periodic_plus_compact(Laminate(), Quadratic(3.0), 2.0)
    xi = np.array([[1.0, 1.0], [0.0, 0.0]])
    x = np.array([[0.25, 5.25], [0.0, 0.0]])
    np.testing.assert_allclose(f.eval(x, xi), [1.0 + 3.0, 1.0])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**62), cz=st.lists(st.integers(-50, 50), min_size=2, max_size=2),
       z=st.lists(st.integers(-50, 50), min_size=2, max_size=2))
def test_shift_covariance_exact(seed, cz, z):
    f = sample_random(RandomCheckerboard(), seed)
    cells = np.array(cz)[:, None]
    moved = shift(f, z).cell_values(cells)
    direct = f.cell_values(cells + np.array(z)[:, None])
    assert np.array_equal(moved, direct)


def test_cell_uniforms_are_pure_and_spread():
    cells = np.indices((32, 32)).reshape(2, -1)
    a = cell_uniforms(7, cells)
    assert np.array_equal(a, cell_uniforms(7, cells))
    assert not np.array_equal(a, cell_uniforms(8, cells))
    assert np.all((a >= 0) & (a < 1))
    assert abs(a.mean() - 0.5) < 0.03


def test_mixture_is_constant_per_seed():
    f = sample_random(RandomCheckerboard(mixture=True), 5)
    vals = f.cell_values(np.indices((4, 4)).reshape(2, -1))
    assert np.unique(vals).size == 1


def test_unfrozen_random_refuses():
    with pytest.raises(ConfigError):
        RandomCheckerboard().cell_values(np.zeros((2, 1), int))


def test_json_roundtrip_and_errors():
    for f in DETERMINISTIC + [sample_random(RandomCheckerboard(), 4)]:
        back = integrand_from_json(f.to_json())
        x = np.random.default_rng(0).uniform(-1, 1, (2, 5))
        xi = np.random.default_rng(1).standard_normal((2, 5))
        np.testing.assert_allclose(back.eval(x, xi), f.eval(x, xi))
    with pytest.raises(ConfigError, match="unknown keys"):
        integrand_from_json({"kind": "ppower", "q": 2})
    with pytest.raises(ConfigError, match="unknown family"):
        integrand_from_json({"kind": "mystery"})
    with pytest.raises(ConfigError):
        integrand_from_json({"kind": "ppower", "p": 1.0})
    with pytest.raises(ConfigError, match="sum to 1"):
        integrand_from_json({"kind": "random_checkerboard", "dist": {"values": [1, 2], "probs": [0.5, 0.6]}})
