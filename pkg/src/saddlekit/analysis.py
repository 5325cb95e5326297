"""Spectral constants, case classification and closed-form dual quantities."""

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .problem import StructuredDualSmooth


class CaseLabel(str, enum.Enum):
    SC_SC = "SC_SC"
    SC_FULL_RANK = "SC_FULL_RANK"
    SC_LINEAR = "SC_LINEAR"
    ASSUMPTION2 = "ASSUMPTION2"
    DUAL_SC_ONLY = "DUAL_SC_ONLY"
    UNCERTIFIED = "UNCERTIFIED"


@dataclass(frozen=True)
class Assumption2Witness:
    min_eigenvalue: float
    min_eigenvalue_small_c: float
    joint_rank: int
    dim: int
    checks_agree: bool


@dataclass(frozen=True)
class ProblemConstants:
    mu_x: float
    L_x: float
    L_y: float
    mu_y: float
    sigma_max_B: float
    sigma_min_B: float
    sigma_min_nz_B: float
    lambda_max_P: Optional[float]
    lambda_min_BBt_plus_LxP: Optional[float]
    case: CaseLabel
    mu_phi: float
    L_phi: float
    kappa: dict = field(default_factory=dict)

    def as_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "kappa"}
        out["case"] = self.case.value
        out["kappa"] = dict(self.kappa)
        return out


def _lambda_min_sym(M):
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def lambda_min_coupled(problem, c):
    """``lambda_min(B B^T + c P)`` for a structured ``g1``."""
    B = problem.B.matrix
    return _lambda_min_sym(B @ B.T + c * problem.g1.P)


def check_assumption2(problem, small_c=1e-6):
    """Decide whether ``B B^T + c P`` is positive definite for every ``c > 0``.

    That holds iff ``null(B^T)`` and ``null(P)`` meet only at 0.  The
    eigenvalue test at ``c = 1`` and ``c = small_c`` must agree with the
    joint rank test ``rank([B | P]) = d_y``; disagreement reports False.

    Returns ``(holds, witness)``.
    """
    if not isinstance(problem.g1, StructuredDualSmooth):
        raise TypeError("Assumption 2 needs g1 in structured form")
    B = problem.B.matrix
    P = problem.g1.P
    dy = B.shape[0]
    BBt = B @ B.T
    scale = max(1.0, float(np.abs(BBt).max(initial=0.0)), problem.g1.lambda_max_P)
    tol = 1e-12 * scale
    lam1 = _lambda_min_sym(BBt + P)
    lam_small = _lambda_min_sym(BBt + small_c * P)
    eig_ok = lam1 > tol and lam_small > tol * small_c
    rank = int(np.linalg.matrix_rank(np.hstack([B, P])))
    rank_ok = rank == dy
    witness = Assumption2Witness(lam1, lam_small, rank, dy, eig_ok == rank_ok)
    return bool(eig_ok and rank_ok), witness


def classify_case(problem):
    """Pick the first structural case that applies, in the fixed order
    SC_SC, SC_FULL_RANK, SC_LINEAR, ASSUMPTION2, DUAL_SC_ONLY, UNCERTIFIED.
    """
    dy = problem.dims[1]
    if problem.mu_y > 0:
        return CaseLabel.SC_SC
    f2_zero = problem.f2.is_zero
    if f2_zero and problem.B.rank == dy:
        return CaseLabel.SC_FULL_RANK
    structured = isinstance(problem.g1, StructuredDualSmooth)
    if f2_zero and problem.g2.is_zero and structured and problem.g1.linear:
        return CaseLabel.SC_LINEAR
    if f2_zero and structured and check_assumption2(problem)[0]:
        return CaseLabel.ASSUMPTION2
    if problem.declared_mu_phi:
        return CaseLabel.DUAL_SC_ONLY
    return CaseLabel.UNCERTIFIED


def mu_phi_lower_bound(problem, case=None):
    """Strong-convexity modulus of the dual function guaranteed by ``case``.

    For SC_LINEAR the modulus holds on ``Range(B)`` only.
    """
    case = classify_case(problem) if case is None else CaseLabel(case)
    Lx = problem.L_x
    if case is CaseLabel.SC_SC:
        if not problem.mu_y > 0:
            raise ValueError("SC_SC needs a strongly convex g1")
        return float(problem.mu_y)
    if case is CaseLabel.SC_FULL_RANK:
        if problem.B.sigma_min <= 0:
            raise ValueError("SC_FULL_RANK needs B with full row rank")
        return problem.B.sigma_min ** 2 / Lx
    if case is CaseLabel.SC_LINEAR:
        if problem.B.sigma_min_nz <= 0:
            raise ValueError("SC_LINEAR needs a nonzero B")
        return problem.B.sigma_min_nz ** 2 / Lx
    if case is CaseLabel.ASSUMPTION2:
        if not isinstance(problem.g1, StructuredDualSmooth):
            raise ValueError("ASSUMPTION2 needs g1 in structured form")
        lam = lambda_min_coupled(problem, Lx)
        if lam <= 0:
            raise ValueError("BB^T + L_x P is not positive definite")
        return lam / Lx
    if case is CaseLabel.DUAL_SC_ONLY:
        if not problem.declared_mu_phi:
            raise ValueError("DUAL_SC_ONLY needs a declared mu_phi")
        return float(problem.declared_mu_phi)
    return 0.0


def _ratio(num, den):
    return num / den if den > 0 else None


def derive_constants(problem):
    """All spectral constants and condition numbers of ``problem``.

    Condition numbers whose denominators vanish, or that need a structured
    ``g1``, are ``None`` rather than NaN.
    """
    mu_x, L_x = problem.mu_x, problem.L_x
    mu_y, L_y = problem.mu_y, problem.L_y
    smax, smin, snz = problem.B.sigma_max, problem.B.sigma_min, problem.B.sigma_min_nz
    structured = isinstance(problem.g1, StructuredDualSmooth)
    lam_P = problem.g1.lambda_max_P if structured else None
    lam_c = lambda_min_coupled(problem, L_x) if structured else None
    case = classify_case(problem)
    mu_phi = mu_phi_lower_bound(problem, case)
    L_phi = problem.L_phi
    lam_pos = lam_c if lam_c is not None and lam_c > 0 else 0.0
    kappa = {
        "x": L_x / mu_x,
        "y": _ratio(L_y, mu_y),
        "B": _ratio(smax ** 2, smin ** 2),
        "B_prime": _ratio(smax ** 2, snz ** 2),
        "xy": _ratio(smax ** 2, mu_x * mu_y),
        "xy_prime": _ratio(L_x * L_y, smin ** 2),
        "xy2": _ratio(L_x * L_y, lam_pos),
        "xy3": _ratio(smax ** 2, lam_pos),
        "phi": _ratio(L_phi, mu_phi),
    }
    return ProblemConstants(mu_x, L_x, L_y, mu_y, smax, smin, snz, lam_P, lam_c,
                            case, mu_phi, L_phi, kappa)


def predicted_complexities(constants, case=None):
    """Condition-number arguments of the linear rates for each oracle group.

    Returns ``{"idapg_A", "idapg_B"}`` and, in the ASSUMPTION2 case, also
    ``"pdpg"``; logarithmic factors and constants are dropped.
    """
    case = constants.case if case is None else CaseLabel(case)
    k = constants.kappa

    def need(*names):
        vals = [k.get(n) for n in names]
        if any(v is None for v in vals):
            missing = [n for n, v in zip(names, vals) if v is None]
            raise ValueError(f"case {case.value} needs undefined kappa entries {missing}")
        return vals

    out = {}
    if case is CaseLabel.SC_SC:
        kx, kxy, ky = need("x", "xy", "y")
        outer = max(math.sqrt(kxy), math.sqrt(ky))
    elif case is CaseLabel.SC_FULL_RANK:
        kx, kxyp, kB = need("x", "xy_prime", "B")
        outer = max(math.sqrt(kxyp), math.sqrt(kx * kB))
    elif case is CaseLabel.SC_LINEAR:
        kx, kBp = need("x", "B_prime")
        outer = math.sqrt(kx * kBp)
        out["idapg_A"] = kx * math.sqrt(kBp)
        out["idapg_B"] = outer
        return out
    elif case is CaseLabel.ASSUMPTION2:
        kx, k2, k3 = need("x", "xy2", "xy3")
        outer = max(math.sqrt(k2), math.sqrt(kx * k3))
        out["pdpg"] = max(k2, kx * k3)
    elif case is CaseLabel.DUAL_SC_ONLY:
        (kx,) = need("x")
        mu_phi = constants.mu_phi
        outer = max(math.sqrt(constants.L_y / mu_phi),
                    constants.sigma_max_B / math.sqrt(constants.mu_x * mu_phi))
    else:
        raise ValueError("no linear rate is certified in the UNCERTIFIED case")
    out["idapg_A"] = math.sqrt(kx) * outer
    out["idapg_B"] = outer
    return out


# -- closed-form dual for quadratic instances ---------------------------------


def _quadratic_parts(problem, allow_g3=False):
    if problem.f1.quadratic is None:
        raise ValueError("f1 must be an explicit quadratic")
    if not problem.f2.is_zero:
        raise ValueError("closed-form dual needs f2 = 0")
    if not isinstance(problem.g1, StructuredDualSmooth):
        raise ValueError("closed-form dual needs a structured g1")
    if problem.g1.g3 is not None and not allow_g3:
        raise ValueError("closed-form dual Hessian needs g3 = 0")
    Q, q = problem.f1.quadratic
    return Q, q


def primal_argmin_quadratic(problem, z):
    """``x*(z) = argmin_x f1(x) + <B^T z, x>`` by a linear solve."""
    Q, q = _quadratic_parts(problem, allow_g3=True)
    try:
        return np.linalg.solve(Q, -(q + problem.B.apply_t(z)))
    except np.linalg.LinAlgError as exc:
        raise ValueError("Q is singular") from exc


def dual_value_quadratic(problem, y):
    """``Phi(y) = g1(y) + f1*(-B^T y) + g2(y)`` with
    ``f1*(v) = 0.5 (v - q)^T Q^{-1} (v - q)``.
    """
    Q, q = _quadratic_parts(problem, allow_g3=True)
    y = np.asarray(y, dtype=float)
    w = problem.B.apply_t(y) + q
    try:
        conj = 0.5 * w @ np.linalg.solve(Q, w)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Q is singular") from exc
    return float(problem.g1.value(y) + conj + problem.g2.value(y))


def dual_gradient_quadratic(problem, y):
    """Gradient of the smooth part ``grad g1(y) - B x*(y)``."""
    return problem.g1.grad(y) - problem.B.apply(primal_argmin_quadratic(problem, y))


def dual_hessian_quadratic(problem):
    """``P + B Q^{-1} B^T``, the constant Hessian of the smooth dual part."""
    Q, _ = _quadratic_parts(problem)
    B = problem.B.matrix
    try:
        H = problem.g1.P + B @ np.linalg.solve(Q, B.T)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Q is singular") from exc
    return 0.5 * (H + H.T)
