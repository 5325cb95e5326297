"""Primal-dual proximal gradient (PDPG).

One iteration is::

    x+ = prox_{alpha f2}(x - alpha (grad f1(x) + B^T y))
    y+ = prox_{beta g2}(y - beta (grad g1(y) - B (x+ + theta (x+ - x))))

With ``theta = 0``, ``alpha < 1/L_x``, ``beta <= mu_x / (sigma_max(B)^2 +
mu_x lambda_max(P))`` and ``g1(y) = 0.5 y^T P y + b^T y``, the weighted
distance ``c_x |x - x*|^2 + c_y |y - y*|^2`` contracts by a factor ``delta``
per step (see :func:`pdpg_rate`).
"""

from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DivergenceError, UncertifiedConfigError
from .harness.trace import Trace
from .problem import saddle_residuals


@dataclass(frozen=True)
class PdpgConfig:
    alpha: float
    beta: float
    theta_extrap: float = 0.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("step sizes must be positive")
        if self.theta_extrap < 0:
            raise ValueError("extrapolation weight must be nonnegative")


@dataclass(frozen=True)
class PdpgRate:
    c_x: float
    c_y: float
    delta: float

    def lyapunov(self, dx_sq, dy_sq):
        return self.c_x * dx_sq + self.c_y * dy_sq


@dataclass
class PdpgState:
    x: np.ndarray
    y: np.ndarray
    k: int = 0


@dataclass(frozen=True)
class StoppingRule:
    """Stop when ``max(primal, dual certificate) <= tol`` or after ``max_iters``."""

    max_iters: int = 100_000
    tol: float = 1e-10


def _require_certified_form(problem):
    if not problem.structured:
        raise UncertifiedConfigError("g1 must be in structured form 0.5 y^T P y + b^T y")
    if problem.g1.g3 is not None:
        raise UncertifiedConfigError("rate certificate requires g3 = 0")
    if not problem.f2.is_zero:
        raise UncertifiedConfigError("rate certificate requires f2 = 0")


def beta_upper_bound(problem):
    s2 = problem.B.sigma_max ** 2
    return problem.mu_x / (s2 + problem.mu_x * problem.g1.lambda_max_P)


def pdpg_default_config(problem):
    """``alpha = 1/(2 L_x)`` and ``beta`` at its upper bound, no extrapolation."""
    from .analysis import check_assumption2

    _require_certified_form(problem)
    ok, witness = check_assumption2(problem)
    if not ok:
        raise UncertifiedConfigError(
            f"BB^T + cP is not positive definite (min eigenvalue {witness.min_eigenvalue:.3g})")
    return PdpgConfig(alpha=0.5 / problem.L_x, beta=beta_upper_bound(problem))


def pdpg_rate(config, problem):
    """Contraction certificate ``(c_x, c_y, delta)`` for ``config``.

    ``c_x = 1 - alpha beta sigma_max^2 / (1 - beta lambda_max(P))``,
    ``c_y = alpha / beta`` and ``delta = 1 - min(alpha mu_x (1 - alpha L_x),
    alpha beta lambda_min(BB^T + P/alpha))``.  Raises
    :class:`UncertifiedConfigError` outside the certified window.
    """
    _require_certified_form(problem)
    a, b = config.alpha, config.beta
    if config.theta_extrap != 0:
        raise UncertifiedConfigError("rate certificate requires theta_extrap = 0")
    if not a < 1.0 / problem.L_x:
        raise UncertifiedConfigError(f"alpha={a} must be strictly below 1/L_x={1 / problem.L_x}")
    bmax = beta_upper_bound(problem)
    if b > bmax * (1 + 1e-12):
        raise UncertifiedConfigError(f"beta={b} exceeds its bound {bmax}")
    lam_P = problem.g1.lambda_max_P
    Bm = problem.B.matrix
    s2 = problem.B.sigma_max ** 2
    c_x = 1.0 - a * b * s2 / (1.0 - b * lam_P)
    c_y = a / b
    M = Bm @ Bm.T + problem.g1.P / a
    lam = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    delta = 1.0 - min(a * problem.mu_x * (1.0 - a * problem.L_x), a * b * lam)
    if not c_x > 0:
        raise UncertifiedConfigError(f"c_x={c_x} is not positive")
    if not 0 < delta < 1:
        raise UncertifiedConfigError(f"delta={delta} outside (0, 1)")
    return PdpgRate(c_x, c_y, delta)


def pdpg_step(problem, state, config, counter=None):
    """One PDPG iteration; each of the six oracles is called exactly once."""
    counter = Counter() if counter is None else counter
    a, b, th = config.alpha, config.beta, config.theta_extrap
    x, y = state.x, state.y
    gx = problem.f1.grad(x)
    Bty = problem.B.apply_t(y)
    x_new = problem.f2.prox(a, x - a * (gx + Bty))
    x_bar = x_new if th == 0 else x_new + th * (x_new - x)
    Bx = problem.B.apply(x_bar)
    gy = problem.g1.grad(y)
    y_new = problem.g2.prox(b, y - b * (gy - Bx))
    counter.update(("grad_f1", "Bt", "prox_f2", "B", "grad_g1", "prox_g2"))
    return PdpgState(x_new, y_new, state.k + 1)


def pdpg_run(problem, config, x0, y0, stop=StoppingRule(), reference=None, counter=None):
    """Iterate PDPG until ``stop`` fires and return a :class:`Trace`.

    Each record ``k`` describes ``(x^k, y^k)``: the two residual
    certificates and, when ``reference`` (an object with ``x_star`` and
    ``y_star``) is given, squared distances to it and the Lyapunov value
    (certified configurations only).  Oracle calls made by the iteration
    itself are tallied in ``counter``; the monitoring certificates are not.
    """
    counter = Counter() if counter is None else counter
    try:
        rate = pdpg_rate(config, problem)
    except UncertifiedConfigError:
        rate = None
    state = PdpgState(np.array(x0, dtype=float), np.array(y0, dtype=float))
    trace = Trace(meta={
        "algo": "pdpg",
        "config": asdict(config),
        "certified": rate is not None,
        "rate": asdict(rate) if rate is not None else None,
    })
    converged = False
    while True:
        pb, db = saddle_residuals(problem, state.x, state.y)
        if not np.isfinite(pb + db):
            raise DivergenceError(f"PDPG residuals overflowed at k={state.k}", state)
        rec = {"k": state.k, "primal_cert": pb, "dual_cert": db}
        if reference is not None:
            dx2 = float(np.sum((state.x - reference.x_star) ** 2))
            dy2 = float(np.sum((state.y - reference.y_star) ** 2))
            rec.update(dist_x_sq=dx2, dist_y_sq=dy2)
            if rate is not None:
                rec["lyapunov"] = rate.lyapunov(dx2, dy2)
        trace.append(**rec)
        if max(pb, db) <= stop.tol:
            converged = True
            break
        if state.k >= stop.max_iters:
            break
        new = pdpg_step(problem, state, config, counter)
        if not (np.all(np.isfinite(new.x)) and np.all(np.isfinite(new.y))):
            raise DivergenceError(f"PDPG iterate became non-finite at k={new.k}", state)
        state = new
    trace.meta.update(converged=converged, stop_reason="tol" if converged else "max_iters",
                      iterations=state.k, oracle_counts=dict(counter))
    trace.final_state = state
    return trace
