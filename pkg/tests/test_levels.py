import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orbitmin import levels as lv
from orbitmin.action import action_quadrature, DiscretePath
from orbitmin.errors import DomainError
from orbitmin.geometry import IsoscelesEnd, ProgradeStart, RetrogradeStart, fit_boundary, in_chi

from oracles import circular_action_quad, j_elliptic, piecewise_linear_action_dense

# frozen regression values, each reproduced by two independent methods in this file
A_TEST_THETA0 = 4.20913409557623
J_HALF = 1.0731820071493643


def test_total_collision_bound_values():
    assert lv.total_collision_lower_bound(1.0, 1.0) == pytest.approx(1.5 * 3 ** (2 / 3) * np.pi ** (2 / 3), rel=1e-14)
    assert lv.total_collision_lower_bound(1.0, 1.0) == pytest.approx(6.69276, abs=1e-5)
    ratio = lv.total_collision_lower_bound(2.0, 1.0) / lv.total_collision_lower_bound(2.0, 0.25)
    assert ratio == pytest.approx(4 ** (1 / 3), rel=1e-14)
    small = [lv.total_collision_lower_bound(m, 1.0) / m for m in (1e-6, 1e-8)]
    assert small[0] == pytest.approx(small[1], rel=1e-5)


@pytest.mark.parametrize("bad", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_total_collision_bound_domain(bad):
    with pytest.raises(DomainError):
        lv.total_collision_lower_bound(*bad)


def test_euler_test_action():
    assert lv.euler_collapse_test_action(1.0, np.pi / 2) == 0.0
    assert lv.euler_collapse_test_action(1.0, 0.0) == pytest.approx(4.7041, abs=5e-5)
    assert lv.euler_collapse_test_action(1.0, 0.0) == pytest.approx(lv.euler_action_m1(0.0), rel=1e-14)
    th = np.linspace(0, np.pi / 2, 50)
    assert np.all(np.diff([lv.euler_collapse_test_action(0.7, t) for t in th]) < 0)
    with pytest.raises(DomainError):
        lv.euler_collapse_test_action(1.0, 2.0)


def test_euler_m1_values():
    assert lv.euler_action_m1(np.pi / 2) == 0.0
    assert lv.euler_action_m1(0.0) == pytest.approx(3 * (5 / 4) ** (2 / 3) * (np.pi / 2) ** (2 / 3), rel=1e-15)
    with pytest.raises(DomainError):
        lv.euler_action_m1(-0.1)


def test_g_polynomial():
    # 8(m+2)^3 - (4+m)^2 (1+2m) expands to 6m^3 + 31m^2 + 56m + 48
    for m in (0.0, 0.5, 2.0, 10.0):
        assert lv.g_poly(m) == pytest.approx(6 * m**3 + 31 * m**2 + 56 * m + 48, rel=1e-15)
    assert lv.g_poly(0) == 48
    assert lv.g_poly_derivative(0) == 56
    assert lv.g_poly(1) == 141
    for m in (0.3, 1.0, 7.0):
        h = 1e-5
        fd = (lv.g_poly(m + h) - lv.g_poly(m - h)) / (2 * h)
        assert fd == pytest.approx(lv.g_poly_derivative(m), rel=1e-8)


@pytest.mark.xfail(strict=True, reason="the displayed polynomial gives g(0) = 48; the value 60 is an arithmetic slip")
def test_g_at_zero_is_sixty():
    assert lv.g_poly(0) == 60


@given(st.floats(1e-3, 1e3))
def test_g_positive_equivalent_to_level_gap(m):
    # (m+2)/(1+2m)^(1/3) > (4+m)^(2/3)/2 is equivalent to g(m) > 0
    assert lv.g_poly(m) > 0
    assert lv.total_collision_lower_bound(m, 1.0) > lv.euler_collapse_test_action(m, 0.0)


# ---------------------------------------------------------------- J and the circular test path


def test_j_integral_values():
    assert lv.j_integral(0.0) == pytest.approx(1.0, abs=1e-13)
    assert lv.j_integral(0.5) == pytest.approx(J_HALF, abs=1e-12)
    assert lv.j_integral(0.5) == pytest.approx(1.07318, abs=1e-5)


@pytest.mark.parametrize("s", [0.0, 0.1, 0.5, 0.8, 0.95])
def test_j_integral_vs_elliptic(s):
    assert lv.j_integral(s) == pytest.approx(j_elliptic(s), abs=1e-10)


def test_j_integral_monotone_and_limit():
    s = np.linspace(0.0, 0.95, 50)
    j = np.array([lv.j_integral(x) for x in s])
    assert np.all(np.diff(j) > 0)
    assert lv.j_integral(1e-6) == pytest.approx(1.0, abs=1e-11)


@pytest.mark.parametrize("s", [1.0, -0.1, 2.0])
def test_j_integral_domain(s):
    with pytest.raises(DomainError):
        lv.j_integral(s)


def test_m_alpha_below_half():
    for m in np.logspace(-3, 3, 40):
        for th in np.linspace(0.01, np.pi / 2, 20):
            assert lv.retrograde_m_alpha(m, th) < 0.5


@pytest.mark.parametrize("m,theta", [(1.0, np.pi / 4), (0.5, 0.1 * np.pi), (3.0, 0.45 * np.pi)])
def test_retrograde_test_action_vs_analytic_quadrature(m, theta):
    assert lv.retrograde_test_action(m, theta) == pytest.approx(circular_action_quad(m, theta), abs=1e-9)


def test_retrograde_test_action_vs_sampled_path():
    n = 20001
    p = DiscretePath(lv.circular_test_nodes(1.0, np.pi / 4, n), 1.0, 0.25)
    assert lv.retrograde_test_action(1.0, np.pi / 4) == pytest.approx(action_quadrature(p, "simpson"), abs=1e-6)


def test_circular_path_endpoints_in_families():
    m, theta = 1.0, np.pi / 4
    q = lv.circular_test_nodes(m, theta, 5)
    assert in_chi(q, m)
    s = fit_boundary(q[0], RetrogradeStart(0, 0), m)
    e = fit_boundary(q[-1], IsoscelesEnd(theta, 0, 0), m)
    from orbitmin.geometry import boundary_config

    np.testing.assert_allclose(boundary_config(s, m), q[0], atol=1e-12)
    np.testing.assert_allclose(boundary_config(e, m), q[-1], atol=1e-12)
    assert s.a1 >= 0 and s.a2 >= 0 and e.b2 < 0


def test_retrograde_bound_properties():
    for m in np.logspace(-2, 2, 15):
        bound = lv.retrograde_test_action_bound(m)
        for th in (0.05 * np.pi, 0.25 * np.pi, np.pi / 2):
            assert lv.retrograde_test_action(m, th) < bound
        assert bound < lv.total_collision_lower_bound(m, 0.25)


def test_ratio_constant():
    c = lv.ratio_constant()
    assert c == pytest.approx(0.9011, abs=5e-4)
    assert lv.ratio_bound(1.0) < c + 1e-3
    assert lv.ratio_bound(1e-9) < c + 1e-3
    assert lv.ratio_bound(1.0) == pytest.approx(0.680838, abs=1e-6)


def test_f_diff():
    assert lv.f_diff(1.0) < 0
    for m in (1, 2, 5, 10, 100):
        assert lv.f_diff(m) < 0
        M = 2 * m + 1
        assert lv.f_diff(m) == pytest.approx(m / 4 * (np.pi**2 / M) ** (1 / 3) * lv.g_tilde(m), rel=1e-12)
    ms = np.linspace(1, 50, 200)
    assert np.all(np.diff([lv.g_tilde(m) for m in ms]) < 0)


def test_level_report():
    rep = lv.level_report(1.0)
    assert rep.g == 141 and rep.f < 0 and all(rep.checks.values())
    d = rep.to_dict()
    assert set(d) >= {"a_total_lb", "a_test", "a_euler", "margin", "m", "theta", "duration"}
    with pytest.raises(DomainError):
        lv.level_report(0.0)


# ---------------------------------------------------------------- tabulated test path


def test_table_loads_exact_digits():
    tb = lv.load_table()
    assert tb.theta0 == pytest.approx(0.053 * np.pi, rel=1e-15)
    np.testing.assert_array_equal(tb.times, np.round(np.linspace(0, 1, 11), 1))
    assert tb.q1[0, 0] == 0.3067 and tb.q2[0, 0] == -0.9504
    assert tb.q1[10, 0] == 0.77840337 and tb.q2[10, 1] == 0.64061834
    q = tb.configs()
    assert in_chi(q, 1.0)


def test_table_path_boundaries():
    tb = lv.load_table()
    p = lv.interpolated_test_path(tb, 0.03 * np.pi)
    s = fit_boundary(p.nodes[0], ProgradeStart(0, 0), 1.0)
    e = fit_boundary(p.nodes[-1], IsoscelesEnd(0.03 * np.pi, 0, 0), 1.0)
    from orbitmin.geometry import boundary_config

    np.testing.assert_allclose(boundary_config(s, 1.0), p.nodes[0], atol=1e-12)
    np.testing.assert_allclose(boundary_config(e, 1.0), p.nodes[-1], atol=1e-12)


def test_interpolated_action_regression():
    tb = lv.load_table()
    a = lv.interpolated_test_action(tb, tb.theta0)
    assert a == pytest.approx(A_TEST_THETA0, abs=1e-11)
    p = lv.interpolated_test_path(tb, tb.theta0)
    assert piecewise_linear_action_dense(p.nodes, 1.0) == pytest.approx(A_TEST_THETA0, abs=1e-8)


def _second_differences():
    tb = lv.load_table()
    h = np.pi * 1e-3
    th = np.arange(0, 85) * h
    a = np.array([lv.interpolated_test_action(tb, t) for t in th])
    e = np.array([lv.euler_action_m1(t) for t in th])
    return np.diff(a, 2) / h**2, np.diff(e, 2) / h**2


def test_interpolated_action_smooth_in_theta():
    d2a, d2e = _second_differences()
    # the curvature comes almost entirely from the kinetic term of the rotated last segment
    assert np.max(np.abs(d2a)) == pytest.approx(17.29, abs=0.01)
    assert np.max(np.abs(d2e)) < 40 / np.pi
    # linear-interpolation error with the measured curvature stays far below the minimum gap
    assert 1 / 8 * (np.pi * 1e-3) ** 2 * np.max(np.abs(d2a)) < 9.49e-3 / 100
    assert 1 / 8 * (3.14e-3) ** 2 * 40 / np.pi == pytest.approx(1.57e-5, rel=2e-3)


@pytest.mark.xfail(strict=True, reason="the test-path action has second derivative about 17.3 > 40/pi")
def test_interpolated_action_curvature_below_40_over_pi():
    d2a, _ = _second_differences()
    assert np.max(np.abs(d2a)) <= 40 / np.pi


def test_sweep_single_point_and_validation():
    res = lv.sweep_compare(0.01 * np.pi, 0.01 * np.pi, np.pi * 1e-3)
    assert res.rows.shape == (1, 4)
    with pytest.raises(DomainError):
        lv.sweep_compare(0.0, 0.1, 0.0)


def test_sweep_parallel_matches_serial():
    a = lv.sweep_compare(0.0, 0.01 * np.pi, np.pi * 1e-3)
    b = lv.sweep_compare(0.0, 0.01 * np.pi, np.pi * 1e-3, workers=2)
    np.testing.assert_array_equal(a.rows, b.rows)


def test_test_path_beats_minimizer_only_from_above(equal_mass_report):
    # the tabulated path interpolates the minimizer: its action is an upper bound, slightly above
    tb = lv.load_table()
    gap = lv.interpolated_test_action(tb, tb.theta0) - equal_mass_report.action
    assert 0 < gap < 1e-2


@pytest.mark.xfail(strict=True, reason="the 11-node test path exceeds the minimizer action by 9.8e-3, not 5e-3")
def test_interpolated_action_within_5e3_of_minimizer(equal_mass_report):
    tb = lv.load_table()
    assert abs(lv.interpolated_test_action(tb, tb.theta0) - equal_mass_report.action) < 5e-3
