import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from _oracles import random_spd
from saddlekit import (CaseLabel, MinimaxProblem, StructuredDualSmooth, check_assumption2,
                       classify_case, derive_constants, mu_phi_lower_bound,
                       predicted_complexities, prox_instantiate, quadratic_term)
from saddlekit.analysis import (dual_gradient_quadratic, dual_hessian_quadratic,
                                dual_value_quadratic, lambda_min_coupled,
                                primal_argmin_quadratic)
from saddlekit.harness.instances import InstanceSpec, generate_quadratic_instance
from saddlekit.prox import linear_dual_term


def make(Q, B, P=None, b=None, q=None, f2="zero", g2="zero", linear=False, mu_phi=None,
         **f2_params):
    Q, B = np.atleast_2d(Q).astype(float), np.atleast_2d(B).astype(float)
    dy = B.shape[0]
    b = np.zeros(dy) if b is None else np.asarray(b, float)
    g1 = linear_dual_term(b) if linear else StructuredDualSmooth(np.atleast_2d(P), b)
    return MinimaxProblem(quadratic_term(Q, q), prox_instantiate(f2, **f2_params), B, g1,
                          prox_instantiate(g2), declared_mu_phi=mu_phi)


# -- constants ------------------------------------------------------------------------


def test_constants_hand_values():
    c = derive_constants(make(np.diag([1.0, 4.0]), [[2.0, 0.0]], [[1.0]]))
    assert c.kappa["x"] == pytest.approx(4.0)
    assert c.kappa["y"] == pytest.approx(1.0)
    assert c.kappa["xy"] == pytest.approx(4.0)


def test_orthogonal_coupling_makes_weyl_tight():
    U, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
    c = derive_constants(make(np.eye(3), U, np.zeros((3, 3))))
    assert c.lambda_min_BBt_plus_LxP == pytest.approx(1.0)
    assert c.sigma_max_B ** 2 == pytest.approx(1.0)


def test_unit_row_condition_numbers():
    c = derive_constants(make(np.eye(2), [[1.0, 0.0]], [[0.0]]))
    assert c.kappa["B"] == pytest.approx(1.0)
    assert c.kappa["B_prime"] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(4))
def test_kappa_table_against_dense_spectra(seed):
    p, _ = generate_quadratic_instance(InstanceSpec(seed=seed, dims=(7, 5), case="SC_SC"))
    c = derive_constants(p)
    Q = p.f1.quadratic[0]
    B, P = p.B.matrix, p.g1.P
    eq, ep = np.linalg.eigvalsh(Q), np.linalg.eigvalsh(P)
    s = np.linalg.svd(B, compute_uv=False)
    lam = np.linalg.eigvalsh(B @ B.T + eq[-1] * P)[0]
    expected = {
        "x": eq[-1] / eq[0], "y": ep[-1] / ep[0], "B": s[0] ** 2 / s[-1] ** 2,
        "B_prime": s[0] ** 2 / s[-1] ** 2, "xy": s[0] ** 2 / (eq[0] * ep[0]),
        "xy_prime": eq[-1] * ep[-1] / s[-1] ** 2, "xy2": eq[-1] * ep[-1] / lam,
        "xy3": s[0] ** 2 / lam,
        "phi": (ep[-1] + s[0] ** 2 / eq[0]) / ep[0],
    }
    for key, val in expected.items():
        assert c.kappa[key] == pytest.approx(val, rel=1e-10), key


def test_undefined_entries_are_none():
    c = derive_constants(make(np.eye(2), np.diag([1.0, 0.0]), np.diag([0.0, 1.0])))
    assert c.kappa["y"] is None
    assert c.kappa["B"] is None
    assert c.kappa["xy"] is None
    assert c.kappa["B_prime"] == pytest.approx(1.0)
    assert all(v is None or math.isfinite(v) for v in c.kappa.values())


def test_constants_as_dict_is_plain():
    d = derive_constants(make([[1.0]], [[1.0]], [[0.0]])).as_dict()
    assert d["case"] == "SC_FULL_RANK"
    assert isinstance(d["kappa"], dict)


# -- Assumption 2 ------------------------------------------------------------------------


@pytest.mark.parametrize("B, P, expected", [
    ([[1.0]], [[0.0]], True),
    ([[0.0]], [[1.0]], True),
    (np.diag([1.0, 0.0]), np.diag([0.0, 0.0]), False),
    (np.diag([1.0, 0.0]), np.diag([0.0, 1.0]), True),
    (np.diag([1.0, 0.0]), np.diag([1.0, 0.0]), False),
])
def test_assumption2_examples(B, P, expected):
    p = make(np.eye(np.shape(B)[1]), B, P)
    ok, witness = check_assumption2(p)
    assert ok is expected
    assert witness.checks_agree
    if not expected:
        assert witness.min_eigenvalue == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_assumption2_matches_null_space_intersection(seed):
    rng = np.random.default_rng(seed)
    dy = 4
    Ub, _ = np.linalg.qr(rng.standard_normal((dy, dy)))
    rb, rp = rng.integers(0, dy + 1, 2)
    B = Ub[:, :rb] @ rng.standard_normal((rb, 5))
    Up, _ = np.linalg.qr(rng.standard_normal((dy, dy)))
    P = (Up[:, :rp] * rng.uniform(0.5, 2, rp)) @ Up[:, :rp].T
    # null(B^T) and null(P) meet only at 0 iff rank([B | P]) = d_y
    stacked = np.hstack([B, P])
    expected = bool(np.linalg.matrix_rank(stacked) == dy)
    assert check_assumption2(make(np.eye(5), B, P))[0] is expected


# -- mu_phi lower bounds ---------------------------------------------------------------------


def test_mu_phi_strongly_concave_pass_through():
    p = make(np.eye(2), np.ones((1, 2)), [[3.0]])
    assert mu_phi_lower_bound(p, "SC_SC") == 3.0


def test_mu_phi_full_row_rank():
    p = make(np.diag([1.0, 2.0]), np.eye(2), np.zeros((2, 2)))
    assert mu_phi_lower_bound(p, "SC_FULL_RANK") == pytest.approx(1.0 / 2.0)


def test_mu_phi_assumption2_scalar():
    p = make([[2.0]], [[1.0]], [[1.0]])
    assert mu_phi_lower_bound(p, "ASSUMPTION2") == pytest.approx((1.0 + 2.0 * 1.0) / 2.0)


def test_mu_phi_linear_uses_smallest_nonzero_singular_value():
    p = make(np.diag([1.0, 3.0, 2.0]), np.diag([2.0, 0.5, 0.0]), linear=True)
    assert mu_phi_lower_bound(p, "SC_LINEAR") == pytest.approx(0.5 ** 2 / 3.0)


def test_mu_phi_declared_and_uncertified():
    p = make(np.eye(2), np.diag([1.0, 0.0]), np.zeros((2, 2)), mu_phi=0.25)
    assert mu_phi_lower_bound(p, "DUAL_SC_ONLY") == 0.25
    assert mu_phi_lower_bound(p, "UNCERTIFIED") == 0.0


@pytest.mark.parametrize("case", ["SC_SC", "SC_FULL_RANK", "ASSUMPTION2", "DUAL_SC_ONLY"])
def test_mu_phi_case_data_mismatch(case):
    p = make(np.eye(2), np.diag([1.0, 0.0]), np.diag([1.0, 0.0]))
    with pytest.raises(ValueError):
        mu_phi_lower_bound(p, case)


# -- classification --------------------------------------------------------------------------


def test_classify_strongly_concave():
    assert classify_case(make(np.eye(2), np.ones((1, 2)), [[1.0]])) is CaseLabel.SC_SC


def test_classify_full_row_rank():
    assert classify_case(make(np.eye(2), np.eye(2), np.zeros((2, 2)))) is CaseLabel.SC_FULL_RANK


def test_classify_linear():
    p = make(np.eye(3), np.diag([1.0, 1.0, 0.0]), linear=True, b=[1.0, 2.0, 0.0])
    assert classify_case(p) is CaseLabel.SC_LINEAR


def test_classify_complementary_P():
    B, P = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert classify_case(make(np.eye(2), B, P)) is CaseLabel.ASSUMPTION2


def test_classify_complementary_P_with_l1_is_not_assumption2():
    # the assumption itself requires f2 = 0
    B, P = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    p = make(np.eye(2), B, P, f2="l1", weight=1.0)
    assert check_assumption2(p)[0]
    assert classify_case(p) is CaseLabel.UNCERTIFIED
    p = make(np.eye(2), B, P, f2="l1", weight=1.0, mu_phi=0.1)
    assert classify_case(p) is CaseLabel.DUAL_SC_ONLY


@pytest.mark.parametrize("scale", [1e-3, 0.5, 7.0, 1e3])
@pytest.mark.parametrize("case", ["SC_SC", "SC_FULL_RANK", "SC_LINEAR", "ASSUMPTION2"])
def test_classification_invariant_under_scaling(case, scale):
    p, _ = generate_quadratic_instance(InstanceSpec(seed=3, dims=(6, 4), case=case))
    g1 = p.g1
    g1_scaled = (linear_dual_term(g1.b) if g1.linear else StructuredDualSmooth(g1.P, g1.b))
    scaled = MinimaxProblem(p.f1, p.f2, scale * p.B.matrix, g1_scaled, p.g2)
    assert classify_case(scaled) is classify_case(p) is CaseLabel(case)


# -- predicted complexities ---------------------------------------------------------------------


def _constants(case, **kappa):
    from saddlekit import ProblemConstants

    return ProblemConstants(1, 1, 1, 0, 1, 0, 1, 0, 1, CaseLabel(case), 1, 1, kappa)


def test_prediction_strongly_concave_hand_values():
    out = predicted_complexities(_constants("SC_SC", x=4, xy=4, y=1))
    assert out == {"idapg_A": pytest.approx(4.0), "idapg_B": pytest.approx(2.0)}


def test_prediction_assumption2_pdpg_hand_value():
    out = predicted_complexities(_constants("ASSUMPTION2", x=4, xy2=8, xy3=2))
    assert out["pdpg"] == pytest.approx(8.0)
    assert out["idapg_B"] == pytest.approx(max(math.sqrt(8), math.sqrt(8)))


def test_prediction_unit_condition_numbers_collapse():
    out = predicted_complexities(_constants("SC_SC", x=1, xy=1, y=1))
    assert out == {"idapg_A": 1.0, "idapg_B": 1.0}


def test_prediction_missing_kappa():
    with pytest.raises(ValueError, match="undefined"):
        predicted_complexities(_constants("SC_SC", x=4, xy=None, y=1))


def test_prediction_uncertified():
    with pytest.raises(ValueError):
        predicted_complexities(_constants("UNCERTIFIED", x=4))


# -- closed-form dual ----------------------------------------------------------------------------


def test_dual_value_scalar_examples():
    p = make([[1.0]], [[1.0]], [[1.0]])
    # conjugate of x^2/2 at -y is y^2/2, plus g1 = y^2/2
    assert dual_value_quadratic(p, np.ones(1)) == pytest.approx(1.0)
    assert dual_value_quadratic(p, np.zeros(1)) == 0.0


def test_dual_value_with_linear_primal_term():
    p = make([[1.0]], [[1.0]], [[1.0]], q=[-1.0])
    # sup_x -xy - x^2/2 + x at y = 1 is 0, plus g1(1) = 1/2
    assert dual_value_quadratic(p, np.ones(1)) == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(3))
def test_dual_value_matches_inner_minimisation(seed):
    rng = np.random.default_rng(seed)
    Q = random_spd(rng, 4, 1.0, 5.0)
    q, B = rng.standard_normal(4), rng.standard_normal((3, 4))
    P = random_spd(rng, 3, 0.0, 1.0)
    b = rng.standard_normal(3)
    p = make(Q, B, P, b=b, q=q)
    y = rng.standard_normal(3)
    x = np.linalg.solve(Q, -(q + B.T @ y))
    # Phi(y) = g1(y) - min_x (f1(x) + <B^T y, x>)
    assert dual_value_quadratic(p, y) == pytest.approx(
        0.5 * y @ P @ y + b @ y - (0.5 * x @ Q @ x + q @ x + y @ B @ x), rel=1e-10)
    assert_allclose(primal_argmin_quadratic(p, y), x)
    h = 1e-6
    fd = [(dual_value_quadratic(p, y + h * e) - dual_value_quadratic(p, y - h * e)) / (2 * h)
          for e in np.eye(3)]
    assert_allclose(dual_gradient_quadratic(p, y), fd, rtol=1e-6, atol=1e-8)
    assert_allclose(dual_hessian_quadratic(p), P + B @ np.linalg.solve(Q, B.T))


def test_dual_requires_quadratic_f1_and_zero_f2():
    with pytest.raises(ValueError):
        dual_value_quadratic(make(np.eye(1), [[1.0]], [[1.0]], f2="l1"), np.ones(1))


@pytest.mark.parametrize("case", ["SC_SC", "SC_FULL_RANK", "SC_LINEAR", "ASSUMPTION2"])
@pytest.mark.parametrize("seed", range(3))
def test_dual_hessian_spectrum_within_bounds(case, seed):
    p, _ = generate_quadratic_instance(InstanceSpec(seed=seed, dims=(7, 5), case=case))
    H = dual_hessian_quadratic(p)
    ev = np.linalg.eigvalsh(H)
    assert ev[-1] <= p.L_y + p.B.sigma_max ** 2 / p.mu_x + 1e-8
    mu = mu_phi_lower_bound(p)
    if case == "SC_LINEAR":
        # strong convexity holds on Range(B) only
        U = np.linalg.svd(p.B.matrix)[0][:, : p.B.rank]
        ev = np.linalg.eigvalsh(U.T @ H @ U)
    assert ev[0] >= mu - 1e-8


@pytest.mark.parametrize("seed", range(10))
def test_weyl_bound(seed):
    p, _ = generate_quadratic_instance(InstanceSpec(seed=seed, dims=(6, 5), case="ASSUMPTION2"))
    assert lambda_min_coupled(p, p.L_x) <= p.B.sigma_max ** 2 + 1e-10
