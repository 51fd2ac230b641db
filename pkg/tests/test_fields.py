import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afhom.errors import ConfigError, Unsupported
from afhom.fields import (CutoffProfile, Grid, PeriodicField, glue, lp_norm, mask_compact, neg_sobolev_norm,
                          periodic_extend, read_afh1, support_mask, write_afh1, write_csv_slice)
from afhom.operator import apply_A, divergence, project_field


def test_non_power_of_two_rejected():
    with pytest.raises(ConfigError, match="power of two"):
        Grid(12, 2)


def test_grid_points_left_rule():
    g = Grid(4, 2, center=(1.0, 0.0), side=2.0)
    np.testing.assert_allclose(g.axis_coords(0), [0.0, 0.5, 1.0, 1.5])
    assert g.points().shape == (2, 4, 4)
    assert g.volume == 4.0


def test_constant_lp_norm():
    g = Grid(16, 2, side=2.0)
    u = PeriodicField(g, np.full((1, 16, 16), 3.0))
    assert lp_norm(u, 2) == pytest.approx(3.0 * 2.0, rel=1e-14)
    assert lp_norm(u, 1) == pytest.approx(3.0 * 4.0, rel=1e-14)


def test_trapezoid_exact_for_trig():
    g = Grid(16, 2)
    x = g.points()
    u = PeriodicField(g, np.sin(2 * np.pi * 3 * x[0]) ** 2)
    assert lp_norm(u, 1) == pytest.approx(0.5, abs=1e-14)


def test_negative_norm_of_single_mode():
    g = Grid(32, 2)
    x = g.points()
    u = PeriodicField(g, np.cos(2 * np.pi * x[0]) + 0.25)
    norm, removed = neg_sobolev_norm(u)
    # |cos| L2 norm sqrt(1/2), divided by |k| = 2 pi
    assert norm == pytest.approx(np.sqrt(0.5) / (2 * np.pi), rel=1e-12)
    assert removed == pytest.approx(0.25, rel=1e-12)
    with pytest.raises(Unsupported):
        neg_sobolev_norm(u, p=3)


def test_cutoff_profile_regions():
    g = Grid(32, 2)
    prof = CutoffProfile(0.125, 3, ramp=0.0)
    th = prof.theta(g)
    s = g.boundary_distance()
    assert np.all(th[s <= 0.125, :] == 0)
    inner = (s > 0.125)
    assert np.all(th[np.ix_(inner, inner)] == 1)
    smooth = CutoffProfile(0.0625, 5, ramp=0.0625).theta(g)
    assert np.all((smooth >= 0) & (smooth <= 1))
    assert np.all(smooth[np.ix_(s >= 0.125, s >= 0.125)] == 1)
    with pytest.raises(ConfigError):
        CutoffProfile(0.125, 2)


def test_glue_is_exact_where_theta_is_binary():
    g = Grid(16, 2)
    rng = np.random.default_rng(0)
    u = PeriodicField(g, rng.standard_normal((2, 16, 16)))
    v = PeriodicField(g, rng.standard_normal((2, 16, 16)))
    th = CutoffProfile(0.125).theta(g)
    w = glue(u, v, th)
    assert np.array_equal(w.data[:, th == 1], u.data[:, th == 1])
    assert np.array_equal(w.data[:, th == 0], v.data[:, th == 0])


def test_glue_compact_support():
    g = Grid(16, 2)
    u = PeriodicField(g, np.ones((2, 16, 16)))
    zero = PeriodicField(g, np.zeros((2, 16, 16)))
    w = glue(u, zero, CutoffProfile(0.25))
    assert np.all(w.data[:, ~support_mask(g, 0.25)] == 0)


def test_disjoint_support_additivity():
    g = Grid(16, 2, side=2.0)
    rng = np.random.default_rng(1)
    left = np.zeros((1, 16, 16))
    right = np.zeros((1, 16, 16))
    left[0, 1:7, 1:15] = rng.standard_normal((6, 14))
    right[0, 9:15, 1:15] = rng.standard_normal((6, 14))
    total = PeriodicField(g, left + right)
    assert lp_norm(total, 2) ** 2 == pytest.approx(lp_norm(PeriodicField(g, left)) ** 2
                                                   + lp_norm(PeriodicField(g, right)) ** 2, rel=1e-14)


def test_mask_compact_zero_near_boundary():
    g = Grid(16, 2)
    u = PeriodicField(g, np.ones((1, 16, 16)))
    m = mask_compact(u, 0.25)
    assert np.all(m.data[:, ~support_mask(g, 0.25)] == 0)


def test_periodic_extension_keeps_A_freeness():
    g = Grid(16, 2)
    op = divergence(2)
    u = project_field(op, PeriodicField(g, np.random.default_rng(2).standard_normal((2, 16, 16))))
    big = periodic_extend(u, 2)
    assert big.grid.n == 32 and big.grid.side == 2.0
    np.testing.assert_allclose(big.grid.corner, g.corner)
    assert apply_A(op, big)[1] <= 1e-8


@settings(max_examples=20, deadline=None)
@given(n=st.sampled_from([2, 4, 8]), m=st.integers(1, 3), N=st.integers(1, 3),
       side=st.floats(0.1, 10), seed=st.integers(0, 1000))
def test_afh1_roundtrip(tmp_path_factory, n, m, N, side, seed):
    g = Grid(n, N, tuple(np.linspace(-1, 1, N)), side)
    u = PeriodicField(g, np.random.default_rng(seed).standard_normal((m,) + g.shape))
    path = tmp_path_factory.mktemp("afh") / "u.afh1"
    write_afh1(path, u)
    back = read_afh1(path)
    assert back.grid == g
    assert np.array_equal(back.data, u.data)


def test_afh1_rejects_garbage(tmp_path):
    p = tmp_path / "bad.afh1"
    p.write_bytes(b"NOPE" + b"\0" * 40)
    with pytest.raises(ConfigError, match="AFH1"):
        read_afh1(p)


def test_csv_slice(tmp_path):
    g = Grid(4, 2)
    u = PeriodicField(g, np.arange(32, dtype=float).reshape(2, 4, 4))
    write_csv_slice(tmp_path / "u.csv", u)
    lines = (tmp_path / "u.csv").read_text().splitlines()
    assert lines[0] == "x0,x1,u0,u1"
    assert len(lines) == 17


def test_field_rejects_nonfinite():
    with pytest.raises(ConfigError):
        PeriodicField(Grid(4, 1), np.array([1.0, np.nan, 0.0, 0.0]))
