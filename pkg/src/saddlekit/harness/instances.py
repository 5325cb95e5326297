"""Seeded instance generators and reference saddle points."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..analysis import CaseLabel, check_assumption2, classify_case
from ..apg import CompositeObjective, apg_minimize
from ..errors import InstanceError, NotConvergedError
from ..idapg import dual_constants, epsilon1_gap_bound, idapg_run, theorem3_schedule
from ..pdpg import StoppingRule
from ..problem import (MinimaxProblem, SmoothTerm, StructuredDualSmooth, saddle_certificate,
                       validate_problem)
from ..prox import linear_dual_term, prox_instantiate, quadratic_term, square_loss_conjugate

#: A reference point is accepted only below this certificate.
REFERENCE_TOL = 1e-11

GENERATED_CASES = (CaseLabel.SC_SC, CaseLabel.SC_FULL_RANK, CaseLabel.SC_LINEAR,
                   CaseLabel.ASSUMPTION2)


@dataclass(frozen=True)
class ReferenceSaddle:
    x_star: np.ndarray
    y_star: np.ndarray
    method: str
    certificate: float


@dataclass(frozen=True)
class InstanceSpec:
    """Recipe for a random quadratic instance.

    Parameters
    ----------
    seed : int
    dims : tuple
        ``(d_x, d_y)``.
    case : CaseLabel or str
        Target structural case; the generated instance must classify as it.
    mu_x, L_x : float
        Extreme eigenvalues of ``Q`` in ``f1 = 0.5 x^T Q x + q^T x``.
    mu_y, L_y : float
        Extreme eigenvalues of ``P`` for SC_SC; for SC_FULL_RANK and
        ASSUMPTION2 ``P`` is singular with largest eigenvalue ``L_y`` and
        smallest nonzero eigenvalue ``mu_y``.
    sigma : tuple
        ``(smallest nonzero, largest)`` singular value of ``B``.
    rank : int, optional
        Rank of ``B``; defaults to full for SC_SC/SC_FULL_RANK and to
        ``min(d_x, d_y) - 1`` otherwise.
    f2, g2 : str
        Catalog kinds of the nonsmooth terms; ``f2_params``/``g2_params``
        are passed to :func:`saddlekit.prox.prox_instantiate`.
    q, b : array, optional
        Explicit linear coefficients; drawn as scaled Gaussians otherwise.
    """

    seed: int = 0
    dims: tuple = (10, 8)
    case: str = CaseLabel.SC_SC
    mu_x: float = 1.0
    L_x: float = 4.0
    mu_y: float = 0.5
    L_y: float = 2.0
    sigma: tuple = (0.5, 2.0)
    rank: Optional[int] = None
    f2: str = "zero"
    g2: str = "zero"
    f2_params: dict = field(default_factory=dict)
    g2_params: dict = field(default_factory=dict)
    q: Optional[tuple] = None
    b: Optional[tuple] = None
    linear_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "case", CaseLabel(self.case))
        dx, dy = self.dims
        if dx < 1 or dy < 1:
            raise InstanceError("dimensions must be positive")
        if not 0 < self.mu_x <= self.L_x:
            raise InstanceError("need 0 < mu_x <= L_x")
        if dx == 1 and self.mu_x != self.L_x:
            raise InstanceError("a scalar f1 needs mu_x == L_x")
        lo, hi = self.sigma
        if not 0 < lo <= hi:
            raise InstanceError("need 0 < sigma_lo <= sigma_hi")
        if not 0 <= self.mu_y <= self.L_y:
            raise InstanceError("need 0 <= mu_y <= L_y")
        if self.case not in GENERATED_CASES:
            raise InstanceError(f"cannot generate case {self.case.value}")

    def as_dict(self):
        out = dict(self.__dict__)
        out["case"] = self.case.value
        out["dims"] = list(self.dims)
        out["sigma"] = list(self.sigma)
        return out


def orthogonal(rng, n):
    """Random rotation: QR of a Gaussian with ``diag(R)`` made positive, then
    the last column flipped if needed so that the determinant is +1.

    The determinant convention makes ``n = 1`` factors equal to 1, so scalar
    instances have exactly the requested signs.
    """
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    Q = Q * signs
    if np.linalg.det(Q) < 0:
        Q[:, -1] = -Q[:, -1]
    return Q


def _spectrum(rng, n, lo, hi):
    """``n`` values in ``[lo, hi]`` that include both endpoints when ``n >= 2``."""
    if n == 0:
        return np.zeros(0)
    if n == 1:
        return np.array([hi])
    inner = rng.uniform(lo, hi, n - 2)
    return np.sort(np.concatenate([[lo], inner, [hi]]))[::-1]


def _coupling(rng, dx, dy, rank, lo, hi):
    Uy, Vx = orthogonal(rng, dy), orthogonal(rng, dx)
    s = _spectrum(rng, rank, lo, hi)
    B = (Uy[:, :rank] * s) @ Vx[:, :rank].T
    return B, Uy


def _dual_part(rng, spec, Uy, rank, b):
    dy = spec.dims[1]
    case = spec.case
    if case is CaseLabel.SC_SC:
        U = orthogonal(rng, dy)
        P = (U * _spectrum(rng, dy, spec.mu_y, spec.L_y)) @ U.T
        return StructuredDualSmooth(P, b)
    if case is CaseLabel.SC_LINEAR:
        return linear_dual_term(b)
    if case is CaseLabel.SC_FULL_RANK:
        # singular P so that g1 is not strongly concave
        U = orthogonal(rng, dy)
        ev = _spectrum(rng, dy - 1, spec.mu_y, spec.L_y)
        P = (U[:, : dy - 1] * ev) @ U[:, : dy - 1].T
        return StructuredDualSmooth(P, b)
    # ASSUMPTION2: P definite on null(B^T), plus a rank-one range component
    # when that keeps P singular
    N = Uy[:, rank:]
    ev = _spectrum(rng, dy - rank, spec.mu_y if spec.mu_y > 0 else spec.L_y, spec.L_y)
    P = (N * ev) @ N.T
    if rank >= 2:
        u = Uy[:, 0]
        P = P + rng.uniform(spec.mu_y, spec.L_y) * np.outer(u, u)
    return StructuredDualSmooth(P, b)


def _default_rank(spec):
    dx, dy = spec.dims
    if spec.rank is not None:
        return spec.rank
    if spec.case in (CaseLabel.SC_SC, CaseLabel.SC_FULL_RANK):
        return min(dx, dy)
    return min(dx, dy) - 1


def generate_quadratic_instance(spec):
    """Build a random quadratic instance of ``spec.case`` and its saddle.

    ``f1`` has ``Q = U diag(eigs) U^T`` with eigenvalues spanning
    ``[mu_x, L_x]``; ``B = U_y diag(s) V_x^T`` with the requested singular
    values.  The instance is validated (sampled oracle checks and case
    classification) before it is returned.

    Returns
    -------
    (MinimaxProblem, ReferenceSaddle)
    """
    dx, dy = spec.dims
    rank = _default_rank(spec)
    case = spec.case
    if not 0 <= rank <= min(dx, dy):
        raise InstanceError(f"rank {rank} impossible for dims {spec.dims}")
    if case is CaseLabel.SC_FULL_RANK and (dy > dx or rank != dy):
        raise InstanceError("SC_FULL_RANK needs full row rank (d_y <= d_x)")
    if case in (CaseLabel.SC_LINEAR, CaseLabel.ASSUMPTION2) and rank >= dy:
        raise InstanceError(f"{case.value} generation needs a rank-deficient B (rank < d_y)")
    if case is CaseLabel.SC_LINEAR and rank == 0:
        raise InstanceError("SC_LINEAR needs a nonzero B")

    rng = np.random.default_rng(spec.seed)
    U = orthogonal(rng, dx)
    Q = (U * _spectrum(rng, dx, spec.mu_x, spec.L_x)) @ U.T
    Q = 0.5 * (Q + Q.T)
    B, Uy = _coupling(rng, dx, dy, rank, *spec.sigma)
    scale = spec.linear_scale
    q = rng.standard_normal(dx) * scale if spec.q is None else np.asarray(spec.q, float)
    if spec.b is not None:
        b = np.asarray(spec.b, float)
    elif case is CaseLabel.SC_LINEAR:
        b = B @ rng.standard_normal(dx) * scale
    else:
        b = rng.standard_normal(dy) * scale
    g1 = _dual_part(rng, spec, Uy, rank, b)
    f2 = prox_instantiate(spec.f2, **spec.f2_params)
    g2 = prox_instantiate(spec.g2, **spec.g2_params)
    problem = MinimaxProblem(quadratic_term(Q, q, "f1"), f2, B, g1, g2,
                             meta={"generator": "quadratic", **spec.as_dict()})
    failures = validate_problem(problem, rng=spec.seed)
    if failures:
        raise InstanceError("generated instance failed validation: " + "; ".join(failures))
    got = classify_case(problem)
    if got is not case:
        raise InstanceError(f"generated instance classifies as {got.value}, not {case.value}")
    return problem, reference_saddle(problem)


def generate_erm_instance(seed, p, d, mu=1.0, l1_weight=0.0, X=None, labels=None):
    """Regularised least squares in saddle form.

    ``min_theta max_lam  mu/2 |theta|^2 + w |theta|_1 + lam^T X theta - l*(lam)``
    with ``l(z) = |z - labels|^2 / (2p)``.  ``X`` (``p x d``) and ``labels``
    are drawn from a seeded Gaussian unless given.
    """
    if p < 1 or d < 1:
        raise InstanceError("need p >= 1 samples and d >= 1 features")
    if not mu > 0:
        raise InstanceError("ridge weight mu must be positive")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((p, d)) / math.sqrt(d) if X is None else np.atleast_2d(np.asarray(X, float))
    labels = rng.standard_normal(p) if labels is None else np.atleast_1d(np.asarray(labels, float))
    if X.shape != (p, d) or labels.shape != (p,):
        raise InstanceError("X must be p x d and labels of length p")
    f1 = quadratic_term(mu * np.eye(d), np.zeros(d), "ridge")
    f2 = prox_instantiate("l1", weight=l1_weight) if l1_weight > 0 else prox_instantiate("zero")
    loss = square_loss_conjugate(labels, p)
    problem = MinimaxProblem(f1, f2, X, loss.smooth_part, prox_instantiate("zero"),
                             meta={"generator": "erm", "seed": seed, "p": p, "d": d, "mu": mu,
                                   "l1_weight": l1_weight})
    if l1_weight == 0:
        theta = np.linalg.solve(mu * np.eye(d) + X.T @ X / p, X.T @ labels / p)
        lam = (X @ theta - labels) / p
        cert = saddle_certificate(problem, theta, lam)
        if cert > REFERENCE_TOL:
            raise InstanceError(f"closed-form ERM saddle has certificate {cert:.3g}")
        return problem, ReferenceSaddle(theta, lam, "kkt_solve", cert)
    return problem, high_accuracy_reference(problem)


def _kkt_capable(problem):
    g1 = problem.g1
    return (problem.f1.quadratic is not None and problem.f2.is_zero and problem.g2.is_zero
            and isinstance(g1, StructuredDualSmooth) and g1.g3 is None)


def kkt_reference(problem):
    """Saddle of a fully quadratic instance from its optimality system::

        [Q   B^T] [x]   [-q]
        [B   -P ] [y] = [ b]

    Under Assumption 2 (or strong concavity) the system is nonsingular.
    For a linear ``g1`` with rank-deficient ``B`` the dual solution is
    not unique and the minimum-norm one is returned.
    """
    if not _kkt_capable(problem):
        raise InstanceError("KKT reference needs quadratic f1, structured g1 and f2 = g2 = 0")
    Q, q = problem.f1.quadratic
    B = problem.B.matrix
    P, b = problem.g1.P, problem.g1.b
    dx, dy = problem.dims
    K = np.block([[Q, B.T], [B, -P]])
    rhs = np.concatenate([-q, b])
    if problem.g1.linear and problem.B.rank < dy:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    else:
        ok, witness = check_assumption2(problem)
        if problem.mu_y == 0 and not ok:
            raise InstanceError(f"KKT system is singular: Assumption 2 fails ({witness})")
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError as exc:
            raise InstanceError("KKT system is singular") from exc
    x, y = sol[:dx], sol[dx:]
    cert = saddle_certificate(problem, x, y)
    if cert > REFERENCE_TOL:
        raise InstanceError(f"KKT reference certificate {cert:.3g} exceeds {REFERENCE_TOL}")
    return ReferenceSaddle(x, y, "kkt_solve", cert)


def high_accuracy_reference(problem, max_iters=1_000_000, tol=1e-12):
    """Reference saddle from a long iDAPG run followed by a primal polish.

    The point is accepted only if its certificate is at most
    :data:`REFERENCE_TOL`.
    """
    constants = dual_constants(problem)
    if not constants.mu_phi > 0:
        raise InstanceError("high-accuracy reference needs a certified mu_phi > 0")
    dx, dy = problem.dims
    y0 = np.zeros(dy)
    gap = epsilon1_gap_bound(problem, y0, constants)
    schedule = theorem3_schedule(constants, 2.0, gap if gap > 0 else 1.0)
    try:
        trace = idapg_run(problem, constants, schedule, np.zeros(dx), y0,
                          StoppingRule(max_iters, tol), min_epsilon=1e-15)
        state = trace.final_state
    except NotConvergedError as exc:
        state = exc.result.final_state
    y = state.y
    x0 = state.x_hat if state.x_hat is not None else state.x
    w = problem.B.apply_t(y)
    f1 = problem.f1
    smooth = SmoothTerm(lambda x: f1.value(x) + float(w @ x), lambda x: f1.grad(x) + w,
                        f1.mu, f1.L)
    try:
        x = apg_minimize(CompositeObjective(smooth, problem.f2), x0, 1e-14).x
    except NotConvergedError as exc:
        x = exc.result.x
    cert = saddle_certificate(problem, x, y)
    if cert > REFERENCE_TOL:
        raise InstanceError(f"high-accuracy reference certificate {cert:.3g} exceeds {REFERENCE_TOL}")
    return ReferenceSaddle(x, y, "high_accuracy_run", cert)


def reference_saddle(problem):
    """KKT solve when the instance is fully quadratic, else a long run."""
    if _kkt_capable(problem):
        return kkt_reference(problem)
    return high_accuracy_reference(problem)
