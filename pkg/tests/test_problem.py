import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from _oracles import grid_argmin, kkt_saddle, quadratic_argmin, random_spd, scalar_problem
from saddlekit import (Coupling, DimensionError, InfeasiblePointError, MinimaxProblem,
                       StructuredDualSmooth, dual_residual_certificate, eval_lagrangian,
                       primal_residual_certificate, prox_instantiate, quadratic_term,
                       saddle_certificate, saddle_residuals)
from saddlekit.problem import (check_coupling, check_prox_term, check_smooth_term,
                               check_structured, validate_problem)


def five_terms(x, y, Q=1.0, B=1.0, P=1.0):
    # hand evaluation of 0.5 Q x^2 + 0 + y B x - 0.5 P y^2 - 0
    return 0.5 * Q * x * x + y * B * x - 0.5 * P * y * y


# -- eval_lagrangian -----------------------------------------------------------


@pytest.mark.parametrize("x, y", [(0.0, 0.0), (1.0, 1.0), (-2.0, 0.5)])
def test_lagrangian_matches_hand_evaluation(x, y):
    p = scalar_problem(P=1.0)
    assert eval_lagrangian(p, np.array([x]), np.array([y])) == pytest.approx(five_terms(x, y))


def test_lagrangian_unit_point_value():
    p = scalar_problem(P=1.0)
    assert eval_lagrangian(p, np.ones(1), np.ones(1)) == pytest.approx(0.5 + 1.0 - 0.5)


def test_lagrangian_extended_values():
    p = scalar_problem(f2="box_indicator", f2_params={"lower": 0.0, "upper": 1.0})
    assert eval_lagrangian(p, np.array([2.0]), np.zeros(1)) == np.inf
    q = scalar_problem(g2="box_indicator", g2_params={"lower": 0.0, "upper": 1.0})
    assert eval_lagrangian(q, np.zeros(1), np.array([5.0])) == -np.inf


def test_lagrangian_both_infinite_raises():
    box = {"lower": 0.0, "upper": 1.0}
    p = scalar_problem(f2="box_indicator", g2="box_indicator", f2_params=box, g2_params=box)
    with pytest.raises(InfeasiblePointError):
        eval_lagrangian(p, np.array([2.0]), np.array([2.0]))


def test_lagrangian_dimension_error_names_argument():
    p = scalar_problem()
    with pytest.raises(DimensionError, match="y"):
        eval_lagrangian(p, np.zeros(1), np.zeros(2))


# -- assembly --------------------------------------------------------------------


def test_problem_rejects_non_strongly_convex_f1():
    with pytest.raises(ValueError, match="strongly convex"):
        MinimaxProblem(quadratic_term([[0.0]]), prox_instantiate("zero"), [[1.0]],
                       StructuredDualSmooth([[0.0]], [0.0]), prox_instantiate("zero"))


def test_problem_rejects_mismatched_oracles():
    with pytest.raises(DimensionError, match="g1.grad"):
        MinimaxProblem(quadratic_term(np.eye(2)), prox_instantiate("zero"), np.ones((1, 2)),
                       StructuredDualSmooth(np.eye(3), np.zeros(3)), prox_instantiate("zero"))


def test_problem_is_immutable():
    p = scalar_problem()
    with pytest.raises(Exception):
        p.f1 = None
    with pytest.raises(ValueError):
        p.B.matrix[0, 0] = 3.0


def test_dims_and_moduli():
    rng = np.random.default_rng(0)
    Q = random_spd(rng, 4, 0.5, 3.0)
    B = rng.standard_normal((2, 4))
    p = MinimaxProblem(quadratic_term(Q), prox_instantiate("zero"), B,
                       StructuredDualSmooth(np.diag([2.0, 0.0]), np.zeros(2)),
                       prox_instantiate("zero"))
    assert p.dims == (4, 2)
    assert p.mu_x == pytest.approx(0.5)
    assert p.L_x == pytest.approx(3.0)
    assert p.mu_y == 0.0
    assert p.L_y == pytest.approx(2.0)
    assert p.L_phi == pytest.approx(2.0 + np.linalg.norm(B, 2) ** 2 / 0.5)


# -- Coupling --------------------------------------------------------------------


@pytest.mark.parametrize("shape", [(1, 1), (3, 5), (5, 3), (4, 4)])
def test_coupling_spectrum(shape):
    rng = np.random.default_rng(sum(shape))
    M = rng.standard_normal(shape)
    c = Coupling(M)
    s = np.linalg.svd(M, compute_uv=False)
    assert c.sigma_max == pytest.approx(s.max())
    assert c.sigma_min_nz == pytest.approx(s.min())
    # d_y > d_x pads with zeros
    assert c.sigma_min == (pytest.approx(s.min()) if shape[0] <= shape[1] else 0.0)
    assert check_coupling(c, rng) == []


def test_coupling_rank_deficient():
    c = Coupling(np.diag([1.0, 0.0]))
    assert c.rank == 1
    assert c.sigma_min == 0.0
    assert c.sigma_min_nz == pytest.approx(1.0)


def test_coupling_zero_matrix():
    c = Coupling(np.zeros((2, 3)))
    assert (c.sigma_max, c.sigma_min, c.sigma_min_nz, c.rank) == (0.0, 0.0, 0.0, 0)


# -- StructuredDualSmooth ---------------------------------------------------------


def test_structured_gradient_consistency():
    rng = np.random.default_rng(1)
    P = random_spd(rng, 3, 0.0, 2.0)
    b = rng.standard_normal(3)
    g = StructuredDualSmooth(P, b)
    assert check_structured(g, rng) == []
    assert check_smooth_term(g, 3, rng) == []
    y = rng.standard_normal(3)
    assert_allclose(g.grad(y), P @ y + b)
    assert g.value(y) == pytest.approx(0.5 * y @ P @ y + b @ y)


def test_structured_with_g3():
    g3 = quadratic_term(np.diag([1.0, 2.0]), name="g3")
    g = StructuredDualSmooth(np.diag([0.0, 1.0]), np.ones(2), g3=g3)
    y = np.array([1.0, -1.0])
    assert_allclose(g.grad(y), np.array([1.0, -2.0]) + np.array([0.0, -1.0]) + 1.0)
    assert g.L == pytest.approx(1.0 + 2.0)
    assert g.mu == pytest.approx(1.0)


@pytest.mark.parametrize("P, msg", [
    ([[1.0, 0.5], [0.0, 1.0]], "symmetric"),
    ([[-1.0, 0.0], [0.0, 1.0]], "PSD"),
])
def test_structured_rejects_bad_P(P, msg):
    with pytest.raises(ValueError, match=msg):
        StructuredDualSmooth(P, np.zeros(2))


# -- primal certificate -------------------------------------------------------------


def test_primal_certificate_exact_step():
    p = scalar_problem()
    x_hat, bound = primal_residual_certificate(p, np.zeros(1), np.ones(1), 1.0)
    # argmin of 0.5 u^2 + u
    u, _ = grid_argmin(lambda u: 0.5 * u * u + u)
    assert_allclose(x_hat, [u], atol=1e-5)
    assert bound == pytest.approx(0.0, abs=1e-15)


def test_primal_certificate_with_l1():
    p = scalar_problem(f2="l1", f2_params={"weight": 1.0})
    x_hat, bound = primal_residual_certificate(p, np.array([3.0]), np.zeros(1), 1.0)
    u, _ = grid_argmin(lambda u: 0.5 * u * u + np.abs(u))
    assert_allclose(x_hat, [u], atol=1e-5)
    assert bound == 0.0


def test_primal_certificate_vanishes_at_subproblem_minimiser():
    rng = np.random.default_rng(2)
    Q = random_spd(rng, 5, 1.0, 10.0)
    q = rng.standard_normal(5)
    B = rng.standard_normal((3, 5))
    p = MinimaxProblem(quadratic_term(Q, q), prox_instantiate("zero"), B,
                       StructuredDualSmooth(np.eye(3), np.zeros(3)), prox_instantiate("zero"))
    z = rng.standard_normal(3)
    x_star = quadratic_argmin(Q, q + B.T @ z)
    _, bound = primal_residual_certificate(p, x_star, z)
    assert bound <= 1e-10


def test_primal_certificate_rejects_bad_step():
    with pytest.raises(ValueError):
        primal_residual_certificate(scalar_problem(), np.zeros(1), np.zeros(1), 0.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), t_scale=st.floats(0.05, 1.0))
def test_primal_certificate_bounds_distance(seed, t_scale):
    # |x_hat - x*(z)| <= bound / mu_x on fully quadratic instances
    rng = np.random.default_rng(seed)
    dx, dy = rng.integers(1, 7, 2)
    Q = random_spd(rng, dx, 0.5, 5.0)
    q = rng.standard_normal(dx)
    B = rng.standard_normal((dy, dx))
    p = MinimaxProblem(quadratic_term(Q, q), prox_instantiate("zero"), B,
                       StructuredDualSmooth(np.eye(dy), np.zeros(dy)), prox_instantiate("zero"))
    z = rng.standard_normal(dy)
    x = rng.standard_normal(dx) * 3
    x_hat, bound = primal_residual_certificate(p, x, z, t_scale / p.L_x)
    x_star = quadratic_argmin(Q, q + B.T @ z)
    assert np.linalg.norm(x_hat - x_star) <= bound / p.mu_x + 1e-10


# -- dual certificate ---------------------------------------------------------------


def test_dual_certificate_at_saddle():
    p = scalar_problem(P=1.0)
    y_hat, bound = dual_residual_certificate(p, np.zeros(1), np.zeros(1))
    assert_allclose(y_hat, [0.0])
    assert bound == 0.0


def test_dual_certificate_hand_step():
    p = scalar_problem(P=1.0)
    y_hat, bound = dual_residual_certificate(p, np.array([-1.0]), np.ones(1), 1.0)
    # y - t (P y - B x) with y = 1, x = -1
    assert_allclose(y_hat, [1.0 - (1.0 * 1.0 - 1.0 * -1.0)])
    assert bound == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("y", [-3.0, 0.2, 7.0])
def test_dual_certificate_point_indicator(y):
    p = scalar_problem(P=1.0, g2="box_indicator", g2_params={"lower": 0.0, "upper": 0.0})
    y_hat, _ = dual_residual_certificate(p, np.ones(1), np.array([y]))
    assert_allclose(y_hat, [0.0])


# -- saddle residuals ----------------------------------------------------------------


def _random_quadratic(seed, dx=5, dy=3):
    rng = np.random.default_rng(seed)
    Q = random_spd(rng, dx, 1.0, 4.0)
    q = rng.standard_normal(dx)
    B = rng.standard_normal((dy, dx))
    P = random_spd(rng, dy, 0.5, 2.0)
    b = rng.standard_normal(dy)
    p = MinimaxProblem(quadratic_term(Q, q), prox_instantiate("zero"), B,
                       StructuredDualSmooth(P, b), prox_instantiate("zero"))
    return p, kkt_saddle(Q, q, B, P, b)


@pytest.mark.parametrize("seed", range(4))
def test_residuals_vanish_at_saddle(seed):
    p, (x, y) = _random_quadratic(seed)
    pb, db = saddle_residuals(p, x, y)
    assert max(pb, db) <= 1e-10
    assert saddle_certificate(p, x, y) <= 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_residuals_are_sound_away_from_saddle(seed):
    # primal >= mu_x |x - x*(y)|; dual >= |grad Phi(y)| for smooth Phi
    p, (xs, ys) = _random_quadratic(seed)
    rng = np.random.default_rng(100 + seed)
    Q, q = p.f1.quadratic
    Bm, P, b = p.B.matrix, p.g1.P, p.g1.b
    for _ in range(10):
        x = xs + rng.standard_normal(xs.size)
        y = ys + rng.standard_normal(ys.size)
        pb, db = saddle_residuals(p, x, y)
        x_of_y = quadratic_argmin(Q, q + Bm.T @ y)
        assert pb >= p.mu_x * np.linalg.norm(x - x_of_y) - 1e-10
        grad_phi = P @ y + b - Bm @ x_of_y
        assert db >= np.linalg.norm(grad_phi) - 1e-10


def test_residuals_positive_at_non_saddle_with_unit_condition():
    # a point that is a fixed point of neither map must not read as converged
    p = scalar_problem(P=1.0)
    pb, db = saddle_residuals(p, np.zeros(1), np.ones(1))
    assert pb == pytest.approx(1.0)
    assert db > 0


# -- sampled validators ----------------------------------------------------------------


def test_validators_pass_on_catalog_problem():
    p, _ = _random_quadratic(7)
    assert validate_problem(p, rng=0) == []


def test_smooth_validator_detects_wrong_L():
    bad = quadratic_term(np.diag([1.0, 5.0]))
    from dataclasses import replace

    wrong = replace(bad, L=2.0)
    assert any("Lipschitz" in m for m in check_smooth_term(wrong, 2, rng=0))


def test_prox_validator_detects_expansive_map():
    from saddlekit import ProxTerm

    bad = ProxTerm(value=lambda x: 0.0, prox=lambda t, v: 2.0 * v, name="bad")
    assert check_prox_term(bad, 3, rng=0)
