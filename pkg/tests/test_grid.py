import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eplim.grid import (Grid, NonFiniteFieldError, check_finite, read_checkpoint,
                        write_checkpoint, write_csv)


def band_limited(grid, kmax, seed):
    """Random trigonometric polynomial with its exact 2nd and 4th derivatives."""
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, kmax))
    k = 2 * math.pi * np.arange(1, kmax + 1) / grid.length
    ph = np.outer(grid.x, k)
    f = np.cos(ph) @ a + np.sin(ph) @ b
    d2 = -(np.cos(ph) @ (a * k**2) + np.sin(ph) @ (b * k**2))
    d4 = np.cos(ph) @ (a * k**4) + np.sin(ph) @ (b * k**4)
    return f + 0.3, d2, d4


@st.composite
def fields(draw, n=32):
    vals = draw(st.lists(st.floats(-10, 10), min_size=n, max_size=n))
    return np.array(vals)


@pytest.mark.parametrize("n", [0, 6, 12, 100, 4])
def test_grid_size_must_be_power_of_two(n):
    with pytest.raises(ValueError):
        Grid(n)


def test_nodes_and_spacing():
    g = Grid(16, 2.0)
    assert g.dx == 0.125
    np.testing.assert_array_equal(g.x, np.arange(16) * 0.125)
    with pytest.raises(ValueError):
        Grid(16, 0.0)


def test_derivative_of_constant_is_zero():
    g = Grid(32)
    assert np.abs(g.derivative(g.constant(3.5))).max() < 1e-14


@pytest.mark.parametrize("length", [1.0, 2.5])
def test_derivative_of_sine(length):
    g = Grid(64, length)
    k = 2 * math.pi / length
    np.testing.assert_allclose(g.derivative(np.sin(k * g.x)), k * np.cos(k * g.x), atol=1e-10)


def test_second_derivative_against_dense_finite_difference():
    errs = []
    for n in (64, 128):
        g = Grid(n)
        f, d2, d4 = band_limited(g, 4, seed=1)
        # periodic second-order finite-difference matrix
        eye = np.eye(n)
        fd = (np.roll(eye, 1, axis=1) - 2 * eye + np.roll(eye, -1, axis=1)) / g.dx**2
        diff = np.abs(g.derivative(f, 2) - fd @ f).max()
        bound = g.dx**2 / 12 * np.abs(d4).max() * 1.05
        assert diff <= bound
        np.testing.assert_allclose(g.derivative(f, 2), d2, atol=1e-9 * np.abs(d2).max())
        errs.append(diff)
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_nyquist_mode_is_zeroed_in_odd_derivatives():
    g = Grid(16)
    nyq = np.cos(math.pi * np.arange(16))
    assert np.abs(g.derivative(nyq)).max() < 1e-14
    assert np.abs(g.derivative(nyq, 2) + (math.pi * 16) ** 2 * nyq).max() < 1e-8


def test_sobolev_examples():
    g = Grid(64)
    c = -2.5
    for s in range(4):
        assert g.sobolev_norm(g.constant(c), s) == pytest.approx(abs(c), rel=1e-14)
    g2 = Grid(64, 3.0)
    assert g2.sobolev_norm(g2.constant(c), 2) == pytest.approx(abs(c) * math.sqrt(3.0))
    f = np.sin(2 * math.pi * g.x)
    assert g.sobolev_norm(f, 0) == pytest.approx(1 / math.sqrt(2), rel=1e-14)
    assert g.sobolev_norm(f, 1) == pytest.approx(math.sqrt((1 + 4 * math.pi**2) / 2), rel=1e-14)
    with pytest.raises(ValueError):
        g.sobolev_norm(f, -1)


def test_mean_and_zero_mean():
    g = Grid(32)
    assert g.mean(g.constant(5.0)) == 5.0
    assert np.all(g.zero_mean(g.constant(5.0)) == 0)
    assert abs(g.mean(np.sin(2 * math.pi * g.x))) < 1e-14
    f = np.random.default_rng(0).normal(size=32)
    assert g.mean(f) == sum(f) / 32
    assert abs(g.mean(g.zero_mean(f))) < 1e-14


@given(f=fields())
def test_parseval(f):
    g = Grid(32)
    direct = g.dx * float(np.sum(f**2))
    assert g.sobolev_norm(f, 0) ** 2 == pytest.approx(direct, rel=1e-12, abs=1e-300)


@given(f=fields())
def test_norm_ordering(f):
    g = Grid(32)
    norms = [g.sobolev_norm(f, s) for s in range(6)]
    assert all(a <= b * (1 + 1e-14) for a, b in zip(norms, norms[1:]))


@given(f=fields(), c=st.floats(-100, 100).filter(lambda v: v == 0 or abs(v) > 1e-100),
       s=st.integers(0, 3))
def test_norm_homogeneity(f, c, s):
    g = Grid(32)
    assert g.sobolev_norm(c * f, s) == pytest.approx(abs(c) * g.sobolev_norm(f, s),
                                                     rel=1e-12, abs=1e-300)


@given(seed=st.integers(0, 10_000), a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_derivative_linearity_and_composition(seed, a, b):
    g = Grid(64)
    f, _, _ = band_limited(g, 8, seed)
    h, _, _ = band_limited(g, 8, seed + 1)
    np.testing.assert_allclose(g.derivative(a * f + b * h),
                               a * g.derivative(f) + b * g.derivative(h), atol=1e-9)
    np.testing.assert_allclose(g.derivative(g.derivative(f)), g.derivative(f, 2), atol=1e-10 * 400)


def test_antiderivative_inverts_derivative():
    g = Grid(64)
    f, _, _ = band_limited(g, 6, 4)
    f = g.zero_mean(f)
    np.testing.assert_allclose(g.antiderivative(g.derivative(f)), f, atol=1e-12)


def test_non_finite_fields_are_rejected():
    g = Grid(8)
    bad = np.ones(8)
    bad[3] = np.nan
    with pytest.raises(NonFiniteFieldError):
        g.derivative(bad)
    with pytest.raises(NonFiniteFieldError):
        g.sobolev_norm(np.full(8, np.inf))
    with pytest.raises(NonFiniteFieldError):
        check_finite(bad)


def test_filter_leaves_smooth_modes_and_kills_nyquist():
    g = Grid(64)
    f = np.sin(2 * math.pi * g.x)
    np.testing.assert_allclose(g.apply_filter(f), f, atol=1e-14)
    w = g.filter_weights()
    assert w[0] == 1.0 and w[-1] == pytest.approx(1e-16)


def test_evaluate_resample_and_extrema():
    g = Grid(32)
    f = np.sin(2 * math.pi * g.x + 0.3) + 0.2 * np.cos(4 * math.pi * g.x)
    pts = np.array([0.0137, 0.5, 0.91])
    exact = np.sin(2 * math.pi * pts + 0.3) + 0.2 * np.cos(4 * math.pi * pts)
    np.testing.assert_allclose(g.evaluate(f, pts), exact, atol=1e-13)
    fine = Grid(128)
    np.testing.assert_allclose(g.resample(f, 128), np.sin(2 * math.pi * fine.x + 0.3)
                               + 0.2 * np.cos(4 * math.pi * fine.x), atol=1e-13)
    np.testing.assert_allclose(fine.resample(g.resample(f, 128), 32), f, atol=1e-13)
    xs = np.linspace(0, 1, 200001)
    dense = np.sin(2 * math.pi * xs + 0.3) + 0.2 * np.cos(4 * math.pi * xs)
    lo, hi = g.extrema(f)
    assert lo == pytest.approx(dense.min(), abs=1e-9)
    assert hi == pytest.approx(dense.max(), abs=1e-9)


def test_checkpoint_round_trip_and_layout(tmp_path):
    g = Grid(16, 2.0)
    f = np.random.default_rng(1).normal(size=16)
    path = tmp_path / "f.bin"
    write_checkpoint(path, g, f)
    raw = path.read_bytes()
    assert struct.unpack("<qd", raw[:16]) == (16, 2.0)
    assert len(raw) == 16 + 16 * 8
    g2, f2 = read_checkpoint(path)
    assert g2 == g
    np.testing.assert_array_equal(f2, f)
    path.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_checkpoint(path)
    with pytest.raises(ValueError):
        write_checkpoint(path, g, np.zeros(8))


def test_csv_output(tmp_path):
    g = Grid(8)
    write_csv(tmp_path / "f.csv", g, np.arange(8.0))
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x,value"
    assert len(lines) == 9
    assert lines[2] == "0.125,1.0"
