import numpy as np
import pytest

from orbitmin import geometry as geo
from orbitmin.action import DiscretePath, discrete_action
from orbitmin.errors import DomainError, NotAdjacent
from orbitmin.levels import euler_action_m1, load_table
from orbitmin.minimize import (ProblemSpec, Transcription, build_report, initial_path, minimize,
                               reflect_improve, verify_minimizer)


@pytest.mark.parametrize("kw", [dict(n_nodes=2), dict(theta=np.pi / 2), dict(theta=-0.1), dict(variant="sideways"),
                                dict(variant="retrograde", theta=0.0), dict(m=0.0), dict(branch=0)])
def test_problem_spec_validation(kw):
    base = dict(m=1.0, theta=0.1, variant="prograde")
    base.update(kw)
    with pytest.raises(DomainError):
        ProblemSpec(**base)


def test_initial_path_linear_endpoints():
    spec = ProblemSpec(m=1.0, theta=0.2, variant="prograde", n_nodes=31)
    p = initial_path(spec, "linear")
    assert p.check_boundaries(1e-12)
    assert geo.in_chi(p.nodes, 1.0)


def test_initial_path_zero_perturbation_is_collinear_at_start():
    spec = ProblemSpec(m=1.0, theta=0.0, variant="prograde", n_nodes=21)
    p = initial_path(spec, "linear", perturbation=0.0)
    assert np.all(p.nodes[0, :, 1] == 0.0)


def test_initial_path_circular_in_families():
    spec = ProblemSpec(m=1.0, theta=np.pi / 4, variant="retrograde", n_nodes=41, duration=1.0)
    p = initial_path(spec, "circular")
    assert p.check_boundaries(1e-12)
    with pytest.raises(DomainError):
        initial_path(ProblemSpec(m=1.0, theta=0.2, variant="prograde"), "circular")


def test_transcription_round_trip():
    spec = ProblemSpec(m=0.7, theta=0.3, variant="retrograde", n_nodes=15)
    p = initial_path(spec)
    tr = Transcription(spec)
    x = tr.pack(p)
    np.testing.assert_allclose(tr.nodes(x), p.nodes, atol=1e-12)


def test_transcription_gradient():
    spec = ProblemSpec(m=1.2, theta=0.3, variant="prograde", n_nodes=9)
    tr = Transcription(spec)
    x = tr.pack(initial_path(spec))
    f, g = tr.value_and_grad(x)
    h = 1e-6
    for i in (0, 1, 2, 3, 5, 17):
        e = np.zeros_like(x)
        e[i] = h
        fd = (tr.value_and_grad(x + e)[0] - tr.value_and_grad(x - e)[0]) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_equal_mass_minimizer(equal_mass_report):
    r = equal_mass_report
    assert r.converged and r.case == "a"
    v = verify_minimizer(r)
    assert v.ok and v.branch_ok
    a1, a2, b1, b2 = r.boundary_params
    assert a1 >= 0 and a2 >= 0
    assert r.path.check_boundaries(1e-12)
    tb = load_table()
    q = tb.configs()
    q[-1] = q[-1] @ geo.rotation(r.spec.theta)
    assert np.abs(r.path.nodes[::24] - q).max() < 1e-2
    # monotone descent
    assert np.all(np.diff(r.history) <= 1e-12 * abs(r.history[0]))


def test_minimizer_below_euler_action():
    r = minimize(ProblemSpec(m=1.0, theta=0.02 * np.pi, variant="prograde", n_nodes=121))
    assert r.action < euler_action_m1(0.02 * np.pi)


@pytest.mark.parametrize("theta", [0.0, 0.02 * np.pi, 0.05 * np.pi, 0.08 * np.pi])
def test_prograde_collision_free_m1(theta):
    r = minimize(ProblemSpec(m=1.0, theta=theta, variant="prograde", n_nodes=121))
    v = verify_minimizer(r)
    assert v.collision_free and v.min_distance > 1e-3 * v.diameter
    assert v.ok


def test_mirror_branch_at_theta_zero():
    r = minimize(ProblemSpec(m=1.0, theta=0.0, variant="prograde", n_nodes=81, branch=-1))
    assert r.adjacency.confined_to(3, 4)
    assert verify_minimizer(r).ok
    up = minimize(ProblemSpec(m=1.0, theta=0.0, variant="prograde", n_nodes=81))
    assert r.action == pytest.approx(up.action, rel=1e-9)


def test_grid_consistency(equal_mass_report):
    coarse = minimize(ProblemSpec(m=1.0, theta=0.053 * np.pi, variant="prograde", n_nodes=121))
    assert abs(coarse.action - equal_mass_report.action) / equal_mass_report.action < 1e-3


def test_large_angle_prograde_collapses_to_euler():
    r = minimize(ProblemSpec(m=1.0, theta=0.3 * np.pi, variant="prograde", n_nodes=61))
    assert r.case == "c"
    Z1, Z2 = r.path.jacobi()
    assert np.all(Z2 == 0.0)
    assert verify_minimizer(r).ok


def test_retrograde_minimizer():
    r = minimize(ProblemSpec(m=1.0, theta=0.25 * np.pi, variant="retrograde", n_nodes=81))
    v = verify_minimizer(r)
    assert r.case == "a" and v.ok and v.branch_ok
    assert r.boundary_params[3] < 0


def test_reflect_improve_never_increases_action():
    spec = ProblemSpec(m=1.0, theta=0.2, variant="prograde", n_nodes=31)
    p = initial_path(spec, "linear")
    Z1, Z2 = p.jacobi()
    Z1 = Z1.copy()
    Z1[10:20, 0] = np.abs(Z1[10:20, 0])  # excursion of Z1 into the first quadrant
    bent = p.with_nodes(geo.from_jacobi((Z1, Z2), 1.0))
    out = reflect_improve(bent, spec)
    assert discrete_action(out) <= discrete_action(bent)
    assert geo.classify_quadrants(out.jacobi()).confined_to(2, 1)
    np.testing.assert_allclose(out.nodes[[0, -1]], bent.nodes[[0, -1]], atol=1e-14)
    # already in the target pair: unchanged
    same = reflect_improve(out, spec)
    np.testing.assert_allclose(same.nodes, out.nodes, atol=1e-14)


def test_reflect_improve_rejects_non_adjacent_boundaries():
    spec = ProblemSpec(m=1.0, theta=0.2, variant="prograde", n_nodes=11)
    p = initial_path(spec, "linear")
    Z1, Z2 = p.jacobi()
    Z2 = Z2.copy()
    Z2[-1] = -np.abs(Z2[-1]) * [1, 1]  # Z2 into Q3 while Z1 stays in Q1/Q2
    Z1 = Z1.copy()
    Z1[-1] = np.abs(Z1[-1])
    bad = DiscretePath(geo.from_jacobi((Z1, Z2), 1.0), 1.0)
    with pytest.raises(NotAdjacent):
        reflect_improve(bad, spec)


def test_verify_flags_violation(equal_mass_report):
    Z1, Z2 = equal_mass_report.path.jacobi()
    Z2 = Z2.copy()
    Z2[50:60, 1] = -0.2
    bad = build_report(equal_mass_report.spec, equal_mass_report.path.with_nodes(geo.from_jacobi((Z1, Z2), 1.0)))
    v = verify_minimizer(bad)
    assert not v.ok and v.case == "violation"


def test_seeded_jitter_is_deterministic():
    spec = ProblemSpec(m=1.0, theta=0.1, variant="prograde", n_nodes=41, seed=7)
    a = initial_path(spec, jitter=0.01)
    b = initial_path(spec, jitter=0.01)
    np.testing.assert_array_equal(a.nodes, b.nodes)
