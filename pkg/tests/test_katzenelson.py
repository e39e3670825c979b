import numpy as np
import pytest

from stefan_enthalpy.assembly import StepProblem
from stefan_enthalpy.core import State
from stefan_enthalpy.enthalpy import classify
from stefan_enthalpy.katzenelson import (ConvergenceError, SolverConfig, crossing_fractions,
                                         solve_phi)
from stefan_enthalpy.linalg import solve
from stefan_enthalpy.studies import (collinearity_defect, distinct_signatures,
                                     random_enthalpy, random_step_problem)

from conftest import make_column

CFG = SolverConfig()


def warm_surface_problem(dt=1.0, surface=2.0):
    """Two frozen nodes, surface warmed above 0: node 1 thaws into the mushy zone."""
    col = make_column([1.0, 1.0], k_f=2.0, k_u=3.0, c_f=1.5, c_u=2.0, latent=10.0)
    prev = State.from_enthalpy(col, [-1.5, -3.0], -1.0, 0.0)
    return StepProblem(col, prev, dt, 1.0, surface)


def threshold(rep, cfg=CFG):
    return rep.initial_residual_norm * cfg.tol_rel + cfg.tol_abs


def test_crossing_fractions_hand_example():
    x, v, latent = np.array([1.0]), np.array([-2.0]), np.array([10.0])
    # raw face fractions are -x/v = 0.5 and (L - x)/v = -4.5; only the forward one counts
    assert (-x / v)[0] == 0.5 and ((latent - x) / v)[0] == -4.5
    np.testing.assert_allclose(crossing_fractions(x, v, latent), [0.5])
    np.testing.assert_allclose(crossing_fractions(x, -v, latent), [4.5])


def test_crossing_fractions_zero_direction():
    lam = crossing_fractions(np.array([1.0, 3.0]), np.array([0.0, 1.0]), np.array([10.0, 10.0]))
    np.testing.assert_allclose(lam, [7.0])


def test_step_deeper_inside_box_has_no_crossing_below_one():
    lam = crossing_fractions(np.array([-5.0]), np.array([-1.0]), np.array([10.0]))
    assert lam.size == 0 or lam.min() > 1.0


def test_root_in_same_box_takes_one_solve():
    col = make_column([1.0, 1.0, 1.0])
    prev = State.from_enthalpy(col, [-3.0, -4.5, -6.0], -1.0, 0.0)
    p = StepProblem(col, prev, 0.1, 1.0, -1.5)
    rep = solve_phi(p)
    assert rep.linear_solves == 1
    assert np.all(classify(rep.root, col) == -1)
    assert rep.residual_norm <= threshold(rep)


def test_steady_state_needs_no_solve():
    col = make_column([1.0, 1.0])
    prev = State.from_enthalpy(col, [-3.0, -3.0], -2.0, 0.0)
    rep = solve_phi(StepProblem(col, prev, 10.0, 0.5, -2.0))
    assert rep.linear_solves == 0
    np.testing.assert_array_equal(rep.root, prev.eta)


def test_single_face_crossing_takes_two_solves():
    p = warm_surface_problem()
    rep = solve_phi(p, record_trace=True)
    assert rep.linear_solves == 2
    assert len(rep.trace) == 3
    mid = rep.trace[1]
    assert abs(mid[0]) <= CFG.tol_rel * CFG.enthalpy_scale
    np.testing.assert_array_equal(classify(rep.root, p.column), [0, -1])
    assert np.linalg.norm(p.phi(rep.root)) <= threshold(rep)


def test_corner_hit_is_perturbed_and_still_converges():
    p = warm_surface_problem()
    z = np.array([-1, -1], dtype=np.int8)
    anchor = np.array([-1.0, -1.0])
    # the frozen piece's root; starting at its mirror image reaches both faces at lambda 1/2
    target = anchor - solve(p.jacobian(z), p.phi_affine(anchor, z))
    assert np.all(target > 0)
    rep = solve_phi(p, initial=-target, record_trace=True)
    assert rep.corner_perturbations >= 1
    reference = solve_phi(p).root
    np.testing.assert_allclose(rep.root, reference, rtol=0, atol=1e-8 * CFG.enthalpy_scale)


def test_unique_root_from_many_starts(rng):
    for _ in range(20):
        p = random_step_problem(rng, 12)
        base = solve_phi(p).root
        for z in distinct_signatures(rng, p.column.n_elements, 10):
            root = solve_phi(p, random_enthalpy(rng, p.column, z)).root
            np.testing.assert_allclose(root, base, rtol=0, atol=1e-8 * CFG.enthalpy_scale)


def test_residuals_shrink_along_a_ray(rng):
    for _ in range(50):
        p = random_step_problem(rng, 16)
        rep = solve_phi(p, record_trace=True)
        worst, decreasing = collinearity_defect(rep.trace_residuals, rep.perturbed_at)
        assert worst <= 1e-8 and decreasing
        assert rep.residual_norm <= threshold(rep)


def test_deterministic_reports(rng):
    p = random_step_problem(rng, 16)
    a = solve_phi(p, record_trace=True)
    b = solve_phi(p, record_trace=True)
    assert a.linear_solves == b.linear_solves
    np.testing.assert_array_equal(a.root, b.root)
    for u, v in zip(a.trace, b.trace):
        np.testing.assert_array_equal(u, v)


def test_iteration_cap_raises():
    p = warm_surface_problem(dt=4.0, surface=5.0)
    with pytest.raises(ConvergenceError) as err:
        solve_phi(p, config=SolverConfig(max_iterations=2))
    assert err.value.residual_norm > 0
    assert err.value.best.shape == (2,)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol_rel=-1.0)
    assert SolverConfig().iteration_cap(24) == 1200
