"""Inexact dual accelerated proximal gradient (iDAPG).

The outer loop runs accelerated proximal gradient on the dual problem
``min_y Phi(y) = g1(y) + (f1 + f2)*(-B^T y) + g2(y)``.  Each dual gradient
needs ``x*(z) = argmin_x f1(x) + f2(x) + <B^T z, x>``, which is solved
inexactly by :func:`saddlekit.apg.apg_minimize`, warm-started at the
previous primal iterate and stopped once

    dist(0, d_x L(x, z)) <= mu_x * eps_{k+1} / sigma_max(B),

which certifies ``|x - x*(z)| <= eps_{k+1} / sigma_max(B)``.  The
tolerances shrink geometrically, ``eps_{k+1}^2 = theta eps_k^2``.
"""

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .apg import CompositeObjective, WarmStart, apg_minimize
from .errors import DivergenceError, NotConvergedError
from .harness.trace import Trace
from .pdpg import StoppingRule
from .problem import SmoothTerm, primal_residual_certificate, saddle_residuals


@dataclass(frozen=True)
class DualConstants:
    """Smoothness ``L_phi`` and strong convexity ``mu_phi`` of the dual."""

    L_phi: float
    mu_phi: float

    def __post_init__(self):
        if not self.L_phi > 0:
            raise ValueError("L_phi must be positive")
        if self.mu_phi < 0:
            raise ValueError("mu_phi must be nonnegative")
        if self.mu_phi > self.L_phi * (1 + 1e-12):
            raise ValueError("mu_phi cannot exceed L_phi")

    @property
    def kappa_phi(self):
        return self.L_phi / self.mu_phi if self.mu_phi > 0 else math.inf


def dual_constants(problem, mu_phi=None):
    """``L_phi = L_y + sigma_max^2 / mu_x`` and a strong-convexity modulus.

    ``mu_phi`` defaults to the structural lower bound for the problem's case.
    """
    if mu_phi is None:
        from .analysis import mu_phi_lower_bound

        mu_phi = mu_phi_lower_bound(problem)
    return DualConstants(problem.L_phi, float(mu_phi))


@dataclass(frozen=True)
class ToleranceSchedule:
    epsilon1: float
    theta: float
    c: Optional[float] = None

    def __post_init__(self):
        if not self.epsilon1 > 0:
            raise ValueError("epsilon1 must be positive")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")

    def epsilon(self, k):
        """Closed form ``eps_k = eps_1 theta^((k-1)/2)`` for ``k >= 1``."""
        return self.epsilon1 * self.theta ** ((k - 1) / 2)

    def squares(self):
        """Yield ``eps_1^2, eps_2^2, ...`` by the recursion ``e <- theta e``."""
        e = self.epsilon1 ** 2
        while True:
            yield e
            e = self.theta * e


def momentum_beta(k, constants):
    if constants.mu_phi > 0:
        r = math.sqrt(constants.kappa_phi)
        return (r - 1.0) / (r + 1.0)
    return k / (k + 3.0)


def theorem3_schedule(constants, c=2.0, phi_gap_bound=None):
    """Schedule with ``theta = 1 - 1/(c sqrt(kappa_phi))`` and

    ``eps_1 = (sqrt(theta) - sqrt(1 - 1/sqrt(kappa_phi))) sqrt(mu_phi * gap)``

    where ``gap`` bounds ``Phi(y0) - Phi(y*)`` from above.
    """
    if not c > 1:
        raise ValueError("c must exceed 1")
    if not constants.mu_phi > 0:
        raise ValueError("a certified schedule needs mu_phi > 0")
    if phi_gap_bound is None or not phi_gap_bound > 0:
        raise ValueError("phi_gap_bound must be positive")
    root = math.sqrt(constants.kappa_phi)
    theta = 1.0 - 1.0 / (c * root)
    eps1 = (math.sqrt(theta) - math.sqrt(1.0 - 1.0 / root)) * math.sqrt(constants.mu_phi * phi_gap_bound)
    if not eps1 > 0:
        raise ValueError(f"epsilon1 underflows for c={c}")
    return ToleranceSchedule(eps1, theta, c)


def _inner_objective(problem, w):
    f1 = problem.f1
    smooth = SmoothTerm(
        value=lambda x: f1.value(x) + float(w @ x),
        grad=lambda x: f1.grad(x) + w,
        mu=f1.mu, L=f1.L, name="f1+linear",
    )
    return CompositeObjective(smooth, problem.f2)


def epsilon1_gap_bound(problem, y0, constants, inner_tol=1e-10, max_inner=100_000):
    """Computable upper bound ``C >= Phi(y0) - Phi(y*)``.

    Solves the primal subproblem at ``y0`` to certified distance
    ``inner_tol`` giving ``x~``, then combines the exact dual residual at
    ``y0`` with the primal certificate::

        C = (dist(0, grad g1(y0) + d g2(y0) - B x~) + sigma_max/mu_x * r_x)^2 / (2 mu_phi)

    ``g2`` must expose ``subgradient_residual``.
    """
    if not constants.mu_phi > 0:
        raise ValueError("gap bound needs mu_phi > 0")
    if problem.g2.subgradient_residual is None:
        raise ValueError("g2 must provide subgradient_residual")
    y0 = np.asarray(y0, dtype=float)
    w = problem.B.apply_t(y0)
    res = apg_minimize(_inner_objective(problem, w), np.zeros(problem.dims[0]),
                       inner_tol, max_inner)
    primal_res = res.certified_distance * problem.mu_x
    v = problem.g1.grad(y0) - problem.B.apply(res.x)
    dual_res = float(np.linalg.norm(problem.g2.subgradient_residual(y0, v)))
    if not math.isfinite(dual_res):
        raise ValueError("y0 lies outside dom g2")
    lift = problem.B.sigma_max / problem.mu_x * primal_res
    return (dual_res + lift) ** 2 / (2.0 * constants.mu_phi)


@dataclass
class IdapgState:
    """Outer iterate.

    ``grad_f1``/``subgrad_f2`` certify ``x`` for reuse as a warm start and
    are ``None`` until known.  ``x_hat`` is the primal estimate paired with
    ``y`` (see :func:`primal_estimate`), filled in by :func:`idapg_run`.
    """

    x: np.ndarray
    y: np.ndarray
    y_prev: np.ndarray
    z: np.ndarray
    k: int = 0
    epsilon: Optional[float] = None
    grad_f1: Optional[np.ndarray] = None
    subgrad_f2: Optional[np.ndarray] = None
    x_hat: Optional[np.ndarray] = None

    @classmethod
    def initial(cls, x0, y0):
        x0 = np.array(x0, dtype=float)
        y0 = np.array(y0, dtype=float)
        return cls(x0, y0, y0.copy(), y0.copy())


def idapg_step(problem, state, constants, epsilon_next, counter=None, max_inner=100_000):
    """One outer iteration; returns ``(new_state, inner_iterations)``.

    Dual-side oracles (``B^T z``, ``grad g1(z)``, ``B x``, ``prox g2``) are
    called once each.  The inner solver's prox-gradient steps are tallied
    as ``grad_f1``/``prox_f2``; the gradients its certificate needs go to
    ``cert_grad_f1``.
    """
    counter = Counter() if counter is None else counter
    sigma = problem.B.sigma_max
    if not sigma > 0:
        raise ValueError("iDAPG needs a nonzero coupling matrix")
    w = problem.B.apply_t(state.z)
    counter["Bt"] += 1

    warm = None
    grad = state.grad_f1
    if state.subgrad_f2 is not None:
        warm = WarmStart(grad + w, state.subgrad_f2)
    elif problem.f2.subgradient_residual is not None:
        if grad is None:
            grad = problem.f1.grad(state.x)
            counter["cert_grad_f1"] += 1
        r = problem.f2.subgradient_residual(state.x, grad + w)
        if np.all(np.isfinite(r)):
            warm = WarmStart(grad + w, r - (grad + w))

    inner = Counter()
    res = apg_minimize(_inner_objective(problem, w), state.x, epsilon_next / sigma,
                       max_inner, warm=warm, counter=inner)
    counter["grad_f1"] += inner["grad"]
    counter["prox_f2"] += inner["prox"]
    counter["cert_grad_f1"] += inner["grad_cert"]

    L_phi = constants.L_phi
    x_new = res.x
    gz = problem.g1.grad(state.z)
    Bx = problem.B.apply(x_new)
    y_new = problem.g2.prox(1.0 / L_phi, state.z - (gz - Bx) / L_phi)
    counter.update(("grad_g1", "B", "prox_g2"))
    beta = momentum_beta(state.k, constants)
    z_new = y_new + beta * (y_new - state.y)
    new = IdapgState(x_new, y_new, state.y, z_new, state.k + 1, epsilon_next,
                     res.grad - w, res.subgrad)
    return new, res.iterations


def primal_estimate(problem, x, y):
    """One prox-gradient step on ``x -> L(x, y)`` from ``x`` with step ``1/L_x``.

    The outer iterate ``x^k`` approximates ``x*(z^{k-1})``; this step moves
    it towards ``x*(y^k)``, which is the primal point that matches ``y^k``.
    It is monitoring only and is not charged to the oracle counts.
    """
    return primal_residual_certificate(problem, x, y)[0]


def idapg_run(problem, constants, schedule, x0, y0, stop=StoppingRule(), reference=None,
              counter=None, max_inner=100_000, callback=None, min_epsilon=0.0):
    """Run iDAPG and return a :class:`Trace`.

    Record ``k`` describes ``(x^k, y^k)``; for ``k >= 1`` it also carries
    ``eps_k`` and the inner iteration count of the step that produced it.
    ``callback(prev_state, new_state, inner_iters)`` is invoked after every
    outer step.  Residuals are those of the pair ``(x_hat^k, y^k)`` where
    ``x_hat^k = primal_estimate(problem, x^k, y^k)``; that pair is the
    run's answer.  Distances are measured at the raw iterates.

    The run also ends, with ``stop_reason = "epsilon_floor"``, before any
    step whose tolerance would fall below ``min_epsilon``; the inner
    certificate cannot be met reliably near machine precision.
    """
    counter = Counter() if counter is None else counter
    state = IdapgState.initial(x0, y0)
    trace = Trace(meta={
        "algo": "idapg",
        "config": {"L_phi": constants.L_phi, "mu_phi": constants.mu_phi,
                   "epsilon1": schedule.epsilon1, "theta": schedule.theta, "c": schedule.c},
        "certified": constants.mu_phi > 0,
    })
    eps_sq = schedule.squares()
    converged = False
    reason = "max_iters"
    inner_total = 0
    extra = {}
    while True:
        state.x_hat = primal_estimate(problem, state.x, state.y)
        pb, db = saddle_residuals(problem, state.x_hat, state.y)
        if not np.isfinite(pb + db):
            raise DivergenceError(f"iDAPG residuals overflowed at k={state.k}", state)
        rec = {"k": state.k, **extra, "primal_cert": pb, "dual_cert": db}
        if reference is not None:
            rec["dist_x_sq"] = float(np.sum((state.x - reference.x_star) ** 2))
            rec["dist_y_sq"] = float(np.sum((state.y - reference.y_star) ** 2))
        trace.append(**rec)
        if max(pb, db) <= stop.tol:
            converged, reason = True, "tol"
            break
        if state.k >= stop.max_iters:
            break
        eps = math.sqrt(next(eps_sq))
        if eps < min_epsilon:
            reason = "epsilon_floor"
            break
        try:
            new, inner = idapg_step(problem, state, constants, eps, counter, max_inner)
        except NotConvergedError as exc:
            trace.meta.update(converged=False, stop_reason="inner_failure", iterations=state.k,
                              inner_iterations_total=inner_total, oracle_counts=dict(counter))
            trace.final_state = state
            raise NotConvergedError(f"inner solve failed at outer iteration {state.k + 1}: {exc}",
                                    trace) from exc
        if not (np.all(np.isfinite(new.x)) and np.all(np.isfinite(new.y))):
            raise DivergenceError(f"iDAPG iterate became non-finite at k={new.k}", state)
        if callback is not None:
            callback(state, new, inner)
        inner_total += inner
        state = new
        extra = {"eps_k": eps, "inner_iters": inner}
    trace.meta.update(converged=converged, stop_reason=reason, iterations=state.k,
                      inner_iterations_total=inner_total, oracle_counts=dict(counter))
    trace.final_state = state
    return trace
