import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ISOTHERMAL, smooth_inits
from eplim.gaslaw import GasLaw, enthalpy, enthalpy_derivative, enthalpy_inverse
from eplim.grid import Grid
from eplim.profiles import (CharacteristicCrossing, ProfileInit, ProfileSet, build_profiles,
                            chebyshev_diff_matrix, chebyshev_nodes, interpolate_in_time,
                            solve_infinity_ion_leading, solve_infinity_ion_order1,
                            solve_zero_electron_leading, solve_zero_electron_order1)

REGIMES = ["zero-electron", "infinity-ion"]


def wave(g, k=1):
    return 2 * math.pi * k * g.x / g.length


# -- Chebyshev helpers --------------------------------------------------------------

@pytest.mark.parametrize("count", [5, 9, 25])
def test_chebyshev_derivative_exact_on_polynomials(count):
    t = chebyshev_nodes(0.7, count)
    assert t[0] == 0.0 and t[-1] == pytest.approx(0.7)
    assert np.all(np.diff(t) > 0)
    D = chebyshev_diff_matrix(0.7, count)
    for deg in range(count):
        p = (t - 0.3) ** deg
        dp = deg * (t - 0.3) ** max(deg - 1, 0) if deg else 0 * t
        np.testing.assert_allclose(D @ p, dp, atol=1e-9 * max(1.0, np.abs(dp).max()))


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=9), st.floats(0, 1))
@settings(max_examples=40, deadline=None)
def test_barycentric_interpolation_exact_on_polynomials(coef, s):
    t = chebyshev_nodes(1.0, 10)
    poly = np.polynomial.Polynomial(coef)
    vals = poly(t)[:, None] * np.ones((1, 3))
    got = interpolate_in_time(t, vals, s)
    np.testing.assert_allclose(got, poly(s), atol=1e-11 * max(1.0, np.abs(coef).sum()))


def test_interpolation_hits_nodes_exactly(ze_profiles):
    k = 7
    snap = ze_profiles.at(float(ze_profiles.times[k]), 0)
    assert np.array_equal(snap["n_i"], ze_profiles.orders[0].n_i[k])


def test_out_of_range_time_rejected(ze_profiles):
    with pytest.raises(ValueError):
        ze_profiles.at(0.2, 0)
    with pytest.raises(ValueError):
        ze_profiles.at(-0.01, 0)


# -- zero-electron limit -------------------------------------------------------------

def test_zero_electron_equilibrium_is_stationary(grid64):
    g = grid64
    init = ProfileInit(g.constant(1.0), g.zeros(), g.constant(1.0), g.zeros())
    prof = solve_zero_electron_leading(g, init, ISOTHERMAL, 1.0, 0.1, nodes=9)
    o0 = prof.orders[0]
    assert np.abs(o0.P_e).max() <= 1e-14
    for name in ("n_e", "n_i"):
        assert np.abs(getattr(o0, name) - 1.0).max() <= 1e-13
    for name in ("u_e", "u_i", "phi", "dn_e", "du_e", "dn_i", "du_i"):
        assert np.abs(getattr(o0, name)).max() <= 1e-13


@pytest.mark.parametrize("law_e", [GasLaw(), GasLaw(1.0, 5 / 3), GasLaw(0.8, 2.0)])
def test_maxwell_boltzmann_identity(grid64, law_e):
    g = grid64
    prof = build_profiles("zero-electron", g, smooth_inits(g), (law_e, GasLaw()), 0.8, 0.1, 1,
                          nodes=9)
    o0 = prof.orders[0]
    for ne, phi, ni in zip(o0.n_e, o0.phi, o0.n_i):
        assert g.sobolev_norm(g.derivative(enthalpy(law_e, ne) - phi)) <= 1e-9
        assert np.abs(ne - enthalpy_inverse(law_e, phi)).max() <= 1e-10
        res = -0.64 * g.derivative(phi, 2) - (ni - ne)
        assert g.sobolev_norm(res) <= 1e-9


def test_order1_closure(ze_profiles):
    g, (o0, o1) = ze_profiles.grid, ze_profiles.orders
    hp = enthalpy_derivative(ze_profiles.laws[0], o0.n_e)
    for k in range(ze_profiles.times.size):
        res = hp[k] * o1.n_e[k] - o1.phi[k] - o0.P_e[k]
        assert g.sobolev_norm(res) <= 1e-9


def test_zero_electron_velocity_mean_is_conserved(ze_profiles):
    g = ze_profiles.grid
    for prof, init in zip(ze_profiles.orders, ze_profiles.inits):
        target = g.mean(init.u_e)
        assert max(abs(g.mean(u) - target) for u in prof.u_e) <= 1e-10


def test_zero_electron_step_by_step_matches_joint(grid64):
    g = grid64
    inits = smooth_inits(g)
    lead = solve_zero_electron_leading(g, inits[0], ISOTHERMAL, 1.0, 0.05, nodes=9)
    both = solve_zero_electron_order1(lead, inits[1])
    joint = build_profiles("zero-electron", g, inits, ISOTHERMAL, 1.0, 0.05, 1, nodes=9)
    for a, b in zip(both.orders, joint.orders):
        for k, v in a.arrays().items():
            assert np.array_equal(v, b.arrays()[k])
    for k, v in lead.orders[0].arrays().items():
        assert np.array_equal(v, joint.orders[0].arrays()[k])


# -- infinity-ion limit --------------------------------------------------------------

def test_infinity_ion_constant_velocity_advects(grid64):
    g = grid64
    c = 0.7
    n0 = 1 + 0.3 * np.cos(wave(g)) + 0.1 * np.sin(wave(g, 3))
    init = ProfileInit(n0.copy(), g.zeros(), n0, g.constant(c))
    prof = solve_infinity_ion_leading(g, init, ISOTHERMAL, 1.0, 0.2, nodes=9, cfl=0.05)
    for t, n in zip(prof.times, prof.orders[0].n_i):
        exact = 1 + 0.3 * np.cos(wave(g) - 2 * math.pi * c * t) \
            + 0.1 * np.sin(3 * (wave(g) - 2 * math.pi * c * t))
        assert np.abs(n - exact).max() <= 1e-8
    assert np.abs(prof.orders[0].u_i - c).max() <= 1e-13


def characteristics_oracle(g, u0, du0, n0, t):
    """Pressureless solution by Newton on the foot point ``xi + t u0(xi) = x``."""
    xi = g.x.copy()
    for _ in range(60):
        f = xi + t * u0(xi) - g.x
        xi = xi - f / (1 + t * du0(xi))
    return u0(xi), n0(xi) / (1 + t * du0(xi))


def test_infinity_ion_matches_characteristics():
    g = Grid(128)
    k = 2 * math.pi
    u0 = lambda x: 0.2 * np.sin(k * x)
    du0 = lambda x: 0.2 * k * np.cos(k * x)
    n0 = lambda x: 1 + 0.2 * np.cos(k * x)
    init = ProfileInit(n0(g.x), g.zeros(), n0(g.x), u0(g.x))
    prof = solve_infinity_ion_leading(g, init, ISOTHERMAL, 1.0, 0.3, nodes=9, cfl=0.1)
    u_ex, n_ex = characteristics_oracle(g, u0, du0, n0, 0.3)
    assert np.abs(prof.orders[0].u_i[-1] - u_ex).max() <= 1e-7
    assert np.abs(prof.orders[0].n_i[-1] - n_ex).max() <= 1e-7


def test_infinity_ion_maximum_principle(ii_profiles):
    u = ii_profiles.orders[0].u_i
    assert u.max() <= u[0].max() + 1e-8
    assert u.min() >= u[0].min() - 1e-8


def test_infinity_ion_crossing_detected(grid64):
    g = grid64
    init = ProfileInit(g.constant(1.0), g.zeros(), g.constant(1.0), 0.5 * np.sin(wave(g)))
    with pytest.raises(CharacteristicCrossing):
        solve_infinity_ion_leading(g, init, ISOTHERMAL, 1.0, 0.5, nodes=9)


def test_infinity_ion_step_by_step_matches_joint(grid64):
    g = grid64
    inits = smooth_inits(g)
    lead = solve_infinity_ion_leading(g, inits[0], ISOTHERMAL, 1.0, 0.05, nodes=9)
    both = solve_infinity_ion_order1(lead, inits[1])
    for k, v in lead.orders[0].arrays().items():
        assert np.array_equal(v, both.orders[0].arrays()[k])


# -- common properties ---------------------------------------------------------------

@pytest.mark.parametrize("regime", REGIMES)
def test_density_profiles_conserve_mass(regime, ze_profiles, ii_profiles):
    prof = ze_profiles if regime == "zero-electron" else ii_profiles
    g = prof.grid
    for order in prof.orders:
        for dens in (order.n_e, order.n_i):
            mass = [g.integral(d) for d in dens]
            assert max(mass) - min(mass) <= 1e-8


@pytest.mark.parametrize("regime", REGIMES)
def test_order1_with_zero_data_and_equilibrium_stays_zero(regime, grid64):
    g = grid64
    inits = [ProfileInit(g.constant(1.0), g.zeros(), g.constant(1.0), g.zeros()),
             ProfileInit.zeros(g)]
    prof = build_profiles(regime, g, inits, ISOTHERMAL, 1.0, 0.1, 1, nodes=9)
    for name, arr in prof.orders[1].arrays().items():
        assert np.abs(arr).max() <= 1e-12, name


@pytest.mark.parametrize("regime", REGIMES)
def test_order1_is_affine_in_its_data(regime, grid64):
    g = grid64
    base = smooth_inits(g)[0]
    init1 = smooth_inits(g)[1]
    runs = [build_profiles(regime, g, [base, init1.scaled(c)], ISOTHERMAL, 1.0, 0.05, 1,
                           nodes=9).orders[1] for c in (0.0, 1.0, 2.0)]
    for name, zero in runs[0].arrays().items():
        one, two = runs[1].arrays()[name], runs[2].arrays()[name]
        scale = max(1.0, np.abs(two).max())
        assert np.abs((two - zero) - 2 * (one - zero)).max() <= 1e-9 * scale, name


@pytest.mark.parametrize("regime", REGIMES)
def test_self_convergence_under_time_step_refinement(regime, grid64):
    g = grid64
    finals = [build_profiles(regime, g, smooth_inits(g), ISOTHERMAL, 1.0, 0.1, 1, nodes=9,
                             cfl=cfl).orders for cfl in (0.2, 0.1, 0.05)]

    def gap(a, b):
        return max(np.abs(getattr(x, v)[-1] - getattr(y, v)[-1]).max()
                   for x, y in zip(a, b) for v in ("n_e", "u_e", "n_i", "u_i"))

    d1, d2 = gap(finals[0], finals[1]), gap(finals[1], finals[2])
    assert d2 < 1e-6
    assert d1 / d2 >= 6


@pytest.mark.parametrize("regime", REGIMES)
def test_stored_rates_match_node_differentiation(regime, ze_profiles, ii_profiles):
    prof = ze_profiles if regime == "zero-electron" else ii_profiles
    D = chebyshev_diff_matrix(prof.t_end, prof.times.size)
    o0 = prof.orders[0]
    for v in ("n_i", "u_i", "n_e", "u_e"):
        arr, rate = getattr(o0, v), getattr(o0, "d" + v)
        approx = np.tensordot(D, arr, axes=1)
        assert np.abs(approx - rate).max() <= 1e-5 * max(1.0, np.abs(rate).max())


def test_time_resolution_is_adequate(ze_profiles, ii_profiles):
    assert ze_profiles.chebyshev_tail() < 1e-8
    assert ii_profiles.chebyshev_tail() < 1e-8


@pytest.mark.parametrize("regime", REGIMES)
def test_save_load_round_trip(regime, ze_profiles, ii_profiles, tmp_path):
    prof = ze_profiles if regime == "zero-electron" else ii_profiles
    prof.save(tmp_path / "p")
    back = ProfileSet.load(tmp_path / "p")
    assert back.regime is prof.regime and back.m == prof.m and back.lam == prof.lam
    assert back.laws == prof.laws
    assert np.array_equal(back.times, prof.times)
    for a, b in zip(prof.orders, back.orders):
        assert a.arrays().keys() == b.arrays().keys()
        for k, v in a.arrays().items():
            assert np.array_equal(v, b.arrays()[k])
    for a, b in zip(prof.inits, back.inits):
        for v in ("n_e", "u_e", "n_i", "u_i"):
            assert np.array_equal(getattr(a, v), getattr(b, v))


def test_truncation(ze_profiles):
    t = ze_profiles.truncated(0)
    assert t.m == 0 and t.orders[0] is ze_profiles.orders[0]
    with pytest.raises(ValueError):
        t.truncated(1)


def test_build_profiles_argument_checks(grid64):
    g = grid64
    with pytest.raises(ValueError):
        build_profiles("zero-electron", g, smooth_inits(g), ISOTHERMAL, 1.0, 0.1, 2)
    with pytest.raises(ValueError):
        build_profiles("zero-electron", g, smooth_inits(g)[:1], ISOTHERMAL, 1.0, 0.1, 1)
    with pytest.raises(ValueError):
        build_profiles("bipolar", g, smooth_inits(g), ISOTHERMAL, 1.0, 0.1, 1)
    bad = ProfileInit(g.zeros(), g.zeros(), g.constant(-1.0), g.zeros())
    with pytest.raises(ValueError):
        build_profiles("infinity-ion", g, [bad], ISOTHERMAL, 1.0, 0.1, 0)
