import numpy as np
import pytest

from stefan_enthalpy.assembly import (StepProblem, affine_piece, flux_q, flux_q_element,
                                      jacobian, mass_matrix, rhs_f, stiffness_piece)
from stefan_enthalpy.core import State
from stefan_enthalpy.enthalpy import big_b, classify
from stefan_enthalpy.linalg import pivot_signs
from stefan_enthalpy.stepper import step_explicit
from stefan_enthalpy.studies import (distinct_signatures, random_column, random_enthalpy,
                                     random_signature)

from conftest import make_column


def test_mass_matrix_examples():
    np.testing.assert_allclose(mass_matrix(make_column([0.2, 0.2, 0.2])), [0.2, 0.2, 0.1])
    np.testing.assert_allclose(mass_matrix(make_column([1.0, 2.0, 4.0])), [1.5, 3.0, 2.0])
    np.testing.assert_allclose(mass_matrix(make_column([0.7])), [0.35])


def test_flux_examples():
    col = make_column([1.0, 1.0], k_f=2.0, k_u=3.0)
    assert flux_q_element([1.0, 1.0, 0.0], 0, col) == 0.0
    assert flux_q_element([-1.0, 1.0, 1.0], 0, col) == 5.0
    np.testing.assert_array_equal(flux_q([-1.0, 1.0, 1.0], col), [5.0, 0.0])


def test_rhs_f_stencil():
    col = make_column([1.0, 1.0], k_f=2.0, k_u=3.0)
    # gamma chosen so that Q = (5, 2): Q_2 = (3*g2 - 3*1)/1 = 2 gives g2 = 5/3
    gamma = [-1.0, 1.0, 5.0 / 3.0]
    np.testing.assert_allclose(flux_q(gamma, col), [5.0, 2.0], rtol=1e-15)
    np.testing.assert_allclose(rhs_f(gamma, col), [3.0, 2.0], rtol=1e-15)
    np.testing.assert_array_equal(rhs_f([4.0, 4.0, 4.0], col), [0.0, 0.0])


def test_rhs_f_telescopes(rng):
    for _ in range(50):
        col = random_column(rng, 20)
        gamma = rng.uniform(-10, 10, col.n_elements + 1)
        gamma[rng.random(gamma.size) < 0.2] = 0.0
        f = rhs_f(gamma, col)
        q1 = flux_q(gamma, col)[0]
        assert abs(f.sum() - q1) <= 1e-12 * (np.abs(f).sum() + abs(q1))


def test_vectorized_flux_matches_scalar(rng):
    col = random_column(rng, 16)
    gamma = rng.uniform(-3, 3, col.n_elements + 1)
    expected = [flux_q_element(gamma, e, col) for e in range(col.n_elements)]
    np.testing.assert_allclose(flux_q(gamma, col), expected, rtol=1e-15)


def test_all_mushy_piece_is_zero():
    col = make_column([1.0, 2.0, 0.5])
    piece = affine_piece(np.zeros(3, dtype=np.int8), 0.0, col)
    assert not np.any(piece.a.to_dense())
    assert not np.any(piece.b) and not np.any(piece.c)


def test_affine_piece_equals_composed_rhs(rng):
    for _ in range(200):
        col = random_column(rng, 24)
        z = random_signature(rng, col.n_elements)
        eta = random_enthalpy(rng, col, z)
        s = float(rng.choice([0.0, rng.uniform(-20, 20)]))
        piece = affine_piece(z, s, col)
        lhs = piece.a @ (eta - piece.b) + piece.c
        rhs = rhs_f(np.concatenate([[s], big_b(eta, col)]), col)
        scale = np.abs(rhs).max()
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12 * scale)


def test_offdiagonal_sign_pattern(rng):
    for _ in range(100):
        col = random_column(rng, 20)
        z = random_signature(rng, col.n_elements)
        a = stiffness_piece(z, col).to_dense()
        n = col.n_elements
        for j in range(n):
            off = np.array([a[i, j] for i in (j - 1, j + 1) if 0 <= i < n])
            assert np.all(off < 0) or np.all(off == 0)


def _problem(rng, theta=None):
    col = random_column(rng, 16)
    z = random_signature(rng, col.n_elements)
    prev = State.from_enthalpy(col, random_enthalpy(rng, col, z), float(rng.uniform(-5, 5)), 0.0)
    th = float(rng.uniform(0.1, 1)) if theta is None else theta
    return StepProblem(col, prev, float(rng.uniform(1e3, 1e6)), th, float(rng.uniform(-5, 5)))


def test_phi_steady_state_is_zero():
    col = make_column([0.5, 0.5, 1.0])
    prev = State.from_enthalpy(col, np.full(3, -4.5), -3.0, 0.0)
    assert np.all(StepProblem(col, prev, 10.0, 0.5, -3.0).phi(prev.eta) == 0.0)


def test_phi_theta_zero_root_is_explicit_update(rng):
    for _ in range(20):
        p = _problem(rng, theta=0.0)
        root = p.prev.eta - p.dt * rhs_f(p.prev.gamma, p.column) / p.mass
        explicit, _ = step_explicit(p.column, p.prev, p.dt, p.surface_next, guard="off")
        np.testing.assert_array_equal(root, explicit.eta)
        assert np.all(np.abs(p.phi(root)) <= 1e-12 * np.abs(p.mass * p.prev.eta / p.dt).max())


def test_phi_matches_its_affine_piece(rng):
    for _ in range(100):
        p = _problem(rng)
        z = random_signature(rng, p.column.n_elements)
        x = random_enthalpy(rng, p.column, z)
        np.testing.assert_allclose(p.phi(x), p.phi_affine(x, classify(x, p.column)),
                                   rtol=1e-12, atol=1e-12 * np.abs(p.phi(x)).max())


def test_phi_continuous_across_faces(rng):
    for _ in range(200):
        p = _problem(rng)
        n = p.column.n_elements
        z = random_signature(rng, n)
        x = random_enthalpy(rng, p.column, z)
        i = int(rng.integers(n))
        # put node i on one of its faces and compare the pieces on either side
        side = int(rng.choice([0, 1]))
        x[i] = 0.0 if side == 0 else p.latent[i]
        left, right = z.copy(), z.copy()
        left[i], right[i] = (-1, 0) if side == 0 else (0, 1)
        a, b = p.phi_affine(x, left), p.phi_affine(x, right)
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9 * np.abs(a).max())


def test_jacobian_special_cases():
    col = make_column([1.0, 2.0, 4.0])
    m = mass_matrix(col)
    z = np.array([1, -1, 0], dtype=np.int8)
    j0 = jacobian(z, 2.0, 0.0, col)
    np.testing.assert_array_equal(j0.to_dense(), np.diag(m / 2.0))
    jm = jacobian(np.zeros(3, dtype=np.int8), 2.0, 0.7, col)
    np.testing.assert_array_equal(jm.to_dense(), np.diag(m / 2.0))


def test_jacobian_minors_positive(rng):
    for _ in range(100):
        col = random_column(rng, 12)
        z = random_signature(rng, col.n_elements)
        j = jacobian(z, float(rng.uniform(1, 1e7)), float(rng.uniform(0, 1)), col)
        dense = j.to_dense()
        minors = [np.linalg.det(dense[:k, :k]) for k in range(1, dense.shape[0] + 1)]
        assert all(m > 0 for m in minors)
        assert np.all(pivot_signs(j) == 1)


def test_energy_balance_at_root(rng):
    from stefan_enthalpy.katzenelson import solve_phi
    for _ in range(30):
        p = _problem(rng)
        root = solve_phi(p).root
        assert p.energy_balance(root).relative_defect <= 1e-10


def test_distinct_signatures_are_distinct(rng):
    sigs = distinct_signatures(rng, 3, 5)
    assert len({tuple(s) for s in sigs}) == len(sigs)


def test_step_problem_rejects_bad_dt():
    with pytest.raises(ValueError):
        StepProblem(make_column([1.0]), State([0.0], [0.0, 0.0], 0.0), 0.0, 1.0, 0.0)
