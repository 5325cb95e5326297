"""Problem model for bilinearly coupled convex-concave saddle-point problems.

The model is::

    min_x max_y  f1(x) + f2(x) + y^T B x - g1(y) - g2(y)

with ``f1`` smooth and strongly convex, ``g1`` smooth and convex, and ``f2``,
``g2`` closed convex functions with cheap proximal maps.  Everything here is
immutable after construction so that one problem can be shared between
threads running independent solves.
"""

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import DimensionError, InfeasiblePointError

#: Oracle kinds tallied by the solvers.  The first two form the primal-side
#: group, the last four the dual-side group.
PRIMAL_ORACLES = ("grad_f1", "prox_f2")
DUAL_ORACLES = ("grad_g1", "prox_g2", "B", "Bt")
ORACLE_NAMES = PRIMAL_ORACLES + DUAL_ORACLES


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def sym_eigvalsh(M):
    """Eigenvalues of the symmetric part of ``M``, ascending."""
    M = np.asarray(M, dtype=float)
    return np.linalg.eigvalsh(0.5 * (M + M.T))


@dataclass(frozen=True)
class SmoothTerm:
    """A differentiable convex function with known moduli.

    Parameters
    ----------
    value, grad : callable
        Value and gradient oracles on ``R^d``.
    mu : float
        Strong-convexity modulus (0 for merely convex).
    L : float
        Lipschitz constant of the gradient.
    quadratic : tuple, optional
        ``(Q, q)`` when the term is exactly ``0.5 x^T Q x + q^T x``.  Used by
        closed-form dual evaluations; never needed by the solvers.
    """

    value: Callable
    grad: Callable
    mu: float
    L: float
    name: str = "smooth"
    quadratic: Optional[tuple] = None

    def __post_init__(self):
        if not (0.0 <= self.mu <= self.L * (1 + 1e-12) + 1e-300):
            raise ValueError(f"need 0 <= mu <= L, got mu={self.mu}, L={self.L}")


@dataclass(frozen=True)
class ProxTerm:
    """A closed convex function accessed through its proximal map.

    ``prox(t, v)`` returns ``argmin_u h(u) + |u - v|^2 / (2t)``.

    ``subgradient_residual(x, v)``, when supplied, returns ``v + s`` where
    ``s`` is the subgradient of ``h`` at ``x`` minimising ``|v + s|``; it
    returns an all-``inf`` vector when ``x`` is outside the domain.  It lets
    callers measure distances to subdifferentials at arbitrary points
    instead of only at prox outputs.
    """

    value: Callable
    prox: Callable
    name: str = "prox"
    params: Mapping = field(default_factory=dict)
    subgradient_residual: Optional[Callable] = None

    @property
    def is_zero(self):
        return self.name == "zero"


class Coupling:
    """Dense coupling matrix ``B`` (shape ``d_y x d_x``) with cached spectrum.

    ``sigma_min`` counts ``d_y`` singular values, padding with zeros when
    ``d_y > d_x``, so that ``|B^T v| >= sigma_min |v|`` for every ``v``.
    ``sigma_min_nz`` is the smallest singular value above the numerical rank
    threshold (0 when ``B`` vanishes).
    """

    __slots__ = ("matrix", "singular_values", "sigma_max", "sigma_min",
                 "sigma_min_nz", "rank")

    def __init__(self, matrix):
        B = np.atleast_2d(np.array(matrix, dtype=float))
        if B.ndim != 2:
            raise ValueError("coupling matrix must be two-dimensional")
        B.setflags(write=False)
        s = np.linalg.svd(B, compute_uv=False) if B.size else np.zeros(0)
        dy = B.shape[0]
        full = np.zeros(dy)
        full[: min(dy, s.size)] = s[:dy]
        smax = float(s.max()) if s.size else 0.0
        tol = max(B.shape) * np.finfo(float).eps * smax
        nz = s[s > tol]
        self.matrix = B
        self.singular_values = _frozen(s)
        self.sigma_max = smax
        self.sigma_min = float(full.min()) if dy else 0.0
        self.sigma_min_nz = float(nz.min()) if nz.size else 0.0
        self.rank = int(nz.size)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        return self.matrix @ x

    def apply_t(self, y):
        return self.matrix.T @ y

    def __repr__(self):
        return f"Coupling(shape={self.shape}, sigma_max={self.sigma_max:.4g})"


class StructuredDualSmooth:
    """``g1(y) = g3(y) + 0.5 y^T P y + b^T y`` with ``P`` symmetric PSD.

    ``linear=True`` marks an instance built as a pure linear function; the
    flag is declarative and drives case classification.
    """

    def __init__(self, P, b, g3=None, linear=False):
        P = np.atleast_2d(np.array(P, dtype=float))
        b = np.atleast_1d(np.array(b, dtype=float))
        if P.shape != (b.size, b.size):
            raise DimensionError("g1.P", (b.size, b.size), P.shape)
        if not np.allclose(P, P.T, rtol=0, atol=1e-12 * max(1.0, np.abs(P).max())):
            raise ValueError("P must be symmetric")
        P = 0.5 * (P + P.T)
        ev = np.linalg.eigvalsh(P)
        if ev.size and ev[0] < -1e-10 * max(1.0, ev[-1]):
            raise ValueError(f"P must be PSD, smallest eigenvalue {ev[0]:.3g}")
        if linear and (np.any(P != 0) or g3 is not None):
            raise ValueError("a linear g1 has P = 0 and no g3 part")
        P.setflags(write=False)
        b.setflags(write=False)
        self.P = P
        self.b = b
        self.g3 = g3
        self.linear = bool(linear)
        self.lambda_max_P = float(max(ev[-1], 0.0)) if ev.size else 0.0
        lmin = float(ev[0]) if ev.size else 0.0
        self.lambda_min_P = lmin if lmin > 1e-10 * max(1.0, self.lambda_max_P) else 0.0
        self.mu = self.lambda_min_P + (g3.mu if g3 is not None else 0.0)
        self.L = self.lambda_max_P + (g3.L if g3 is not None else 0.0)
        self.name = "linear" if linear else "structured"

    @property
    def dim(self):
        return self.b.size

    def value(self, y):
        v = 0.5 * y @ (self.P @ y) + self.b @ y
        if self.g3 is not None:
            v += self.g3.value(y)
        return float(v)

    def grad(self, y):
        g = self.P @ y + self.b
        if self.g3 is not None:
            g = g + self.g3.grad(y)
        return g


@dataclass(frozen=True)
class MinimaxProblem:
    """The five-part saddle-point model.

    ``B`` may be given as an array; it is wrapped in a :class:`Coupling`.
    ``declared_mu_phi`` is a user-asserted strong-convexity modulus of the
    dual function, used only when no structural case applies.  ``meta``
    holds a JSON-able description when the problem came from the harness.
    """

    f1: SmoothTerm
    f2: ProxTerm
    B: Coupling
    g1: object
    g2: ProxTerm
    declared_mu_phi: Optional[float] = None
    meta: Optional[Mapping] = None

    def __post_init__(self):
        if not isinstance(self.B, Coupling):
            object.__setattr__(self, "B", Coupling(self.B))
        if not self.f1.mu > 0:
            raise ValueError("f1 must be strongly convex (mu_x > 0)")
        dy, dx = self.B.shape
        zx, zy = np.zeros(dx), np.zeros(dy)
        _probe("f1.grad", lambda: self.f1.grad(zx), (dx,))
        _probe("f2.prox", lambda: self.f2.prox(1.0, zx), (dx,))
        _probe("g1.grad", lambda: self.g1.grad(zy), (dy,))
        _probe("g2.prox", lambda: self.g2.prox(1.0, zy), (dy,))
        if self.declared_mu_phi is not None and self.declared_mu_phi < 0:
            raise ValueError("declared_mu_phi must be nonnegative")

    @property
    def dims(self):
        dy, dx = self.B.shape
        return dx, dy

    @property
    def structured(self):
        return isinstance(self.g1, StructuredDualSmooth)

    @property
    def mu_x(self):
        return self.f1.mu

    @property
    def L_x(self):
        return self.f1.L

    @property
    def mu_y(self):
        return self.g1.mu

    @property
    def L_y(self):
        return self.g1.L

    @property
    def L_phi(self):
        """Smoothness bound ``L_y + sigma_max(B)^2 / mu_x`` of the dual function."""
        return self.L_y + self.B.sigma_max ** 2 / self.mu_x


def _check_shape(oracle, out, expected):
    shape = np.shape(out)
    if shape != expected:
        raise DimensionError(oracle, expected, shape)


def _probe(oracle, call, expected):
    try:
        out = call()
    except ValueError as exc:
        raise DimensionError(oracle, expected, f"failure ({exc})") from exc
    _check_shape(oracle, out, expected)


def _check_dims(problem, x, y=None):
    dx, dy = problem.dims
    if np.shape(x) != (dx,):
        raise DimensionError("x", (dx,), np.shape(x))
    if y is not None and np.shape(y) != (dy,):
        raise DimensionError("y", (dy,), np.shape(y))


def eval_lagrangian(problem, x, y):
    """``f1(x) + f2(x) + y^T B x - g1(y) - g2(y)`` as an extended real.

    Returns ``+inf`` when ``x`` is outside ``dom f2`` and ``-inf`` when ``y``
    is outside ``dom g2``.  Both at once raise :class:`InfeasiblePointError`.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_dims(problem, x, y)
    f2 = problem.f2.value(x)
    g2 = problem.g2.value(y)
    if np.isposinf(f2) and np.isposinf(g2):
        raise InfeasiblePointError("x outside dom f2 and y outside dom g2")
    if np.isposinf(f2):
        return np.inf
    if np.isposinf(g2):
        return -np.inf
    return float(problem.f1.value(x) + f2 + y @ problem.B.apply(x)
                 - problem.g1.value(y) - g2)


def primal_residual_certificate(problem, x, z, t=None):
    """Certify the primal subproblem ``min_u f1(u) + f2(u) + <B^T z, u>``.

    Takes one prox-gradient step ``x_hat = prox_{t f2}(x - t(grad f1(x) + B^T z))``
    and returns ``(x_hat, bound)`` with::

        bound = |grad f1(x_hat) - grad f1(x) + (x - x_hat)/t|

    which upper-bounds ``dist(0, d_x L(x_hat, z))`` because
    ``(x - x_hat)/t - grad f1(x) - B^T z`` lies in ``d f2(x_hat)``.
    Dividing by ``mu_x`` bounds ``|x_hat - x*(z)|``.  ``t`` defaults to
    ``1 / L_x``.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_dims(problem, x, z)
    t = 1.0 / problem.L_x if t is None else float(t)
    if not t > 0:
        raise ValueError("step t must be positive")
    gx = problem.f1.grad(x)
    x_hat = problem.f2.prox(t, x - t * (gx + problem.B.apply_t(z)))
    bound = np.linalg.norm(problem.f1.grad(x_hat) - gx + (x - x_hat) / t)
    return x_hat, float(bound)


def _default_dual_step(problem):
    return 1.0 / problem.L_y if problem.L_y > 0 else 1.0


def dual_residual_certificate(problem, x_tilde, y, t=None):
    """Mirror of :func:`primal_residual_certificate` on the dual block.

    ``y_hat = prox_{t g2}(y - t(grad g1(y) - B x_tilde))`` and the bound
    ``|grad g1(y_hat) - grad g1(y) + (y - y_hat)/t|`` dominates the distance
    from 0 to ``grad g1(y_hat) + d g2(y_hat) - B x_tilde``.  ``t`` defaults
    to ``1 / L_y`` (or 1 when ``g1`` is linear).
    """
    x_tilde = np.asarray(x_tilde, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_dims(problem, x_tilde, y)
    t = _default_dual_step(problem) if t is None else float(t)
    if not t > 0:
        raise ValueError("step t must be positive")
    gy = problem.g1.grad(y)
    y_hat = problem.g2.prox(t, y - t * (gy - problem.B.apply(x_tilde)))
    bound = np.linalg.norm(problem.g1.grad(y_hat) - gy + (y - y_hat) / t)
    return y_hat, float(bound)


def saddle_residuals(problem, x, y):
    """Stationarity of the pair ``(x, y)``, used by the solvers' stopping rules.

    With ``x_hat, r = primal_residual_certificate(problem, x, y)`` (step
    ``1/L_x``) and ``y_hat`` the prox-gradient step of the dual function
    taken at ``y`` with ``x_hat`` in place of ``x*(y)`` (step ``1/L_phi``)::

        primal = L_x |x - x_hat| + r                      >= mu_x |x - x*(y)|
        dual   = L_phi |y - y_hat| + sigma_max(B) r / mu_x >= |G(y)|

    where ``G`` is the exact gradient mapping of the dual problem.  Both
    vanish iff ``(x, y)`` is a saddle point.
    """
    tx = 1.0 / problem.L_x
    x_hat, r = primal_residual_certificate(problem, x, y, tx)
    primal = float(np.linalg.norm(np.asarray(x, dtype=float) - x_hat)) / tx + r
    ty = 1.0 / problem.L_phi
    y = np.asarray(y, dtype=float)
    y_hat = problem.g2.prox(ty, y - ty * (problem.g1.grad(y) - problem.B.apply(x_hat)))
    dual = float(np.linalg.norm(y - y_hat)) / ty + problem.B.sigma_max * r / problem.mu_x
    return primal, dual


def saddle_certificate(problem, x, y):
    """Max of both certificates and both gradient-mapping norms at ``(x, y)``.

    It is zero iff ``(x, y)`` is a fixed point of both prox-gradient maps.
    Reference saddles are accepted against this measure.
    """
    tx = 1.0 / problem.L_x
    ty = _default_dual_step(problem)
    x_hat, pb = primal_residual_certificate(problem, x, y, tx)
    y_hat, db = dual_residual_certificate(problem, x, y, ty)
    gm_x = np.linalg.norm(x - x_hat) / tx
    gm_y = np.linalg.norm(y - y_hat) / ty
    return float(max(pb, db, gm_x, gm_y))


# -- sampled assumption checks ------------------------------------------------


def check_smooth_term(term, dim, rng=None, probes=8, scale=1.0):
    """Sampled checks of the moduli and gradient consistency of ``term``.

    Returns a list of failure messages (empty when all probes pass).
    """
    rng = np.random.default_rng(rng)
    failures = []
    for _ in range(probes):
        u = scale * rng.standard_normal(dim)
        v = scale * rng.standard_normal(dim)
        gu, gv = term.grad(u), term.grad(v)
        d = u - v
        dn2 = d @ d
        gd = gu - gv
        if np.linalg.norm(gd) > term.L * np.sqrt(dn2) * (1 + 1e-8) + 1e-12:
            failures.append(f"{term.name}: gradient Lipschitz bound L={term.L} violated")
        if gd @ d < term.mu * dn2 * (1 - 1e-8) - 1e-12:
            failures.append(f"{term.name}: strong monotonicity mu={term.mu} violated")
        h = 1e-5 * max(1.0, np.linalg.norm(u))
        fd = np.array([(term.value(u + h * e) - term.value(u - h * e)) / (2 * h)
                       for e in np.eye(dim)])
        if np.linalg.norm(fd - gu) > 1e-5 * max(1.0, np.linalg.norm(gu)):
            failures.append(f"{term.name}: gradient disagrees with finite differences")
    return failures


def check_prox_term(term, dim, rng=None, probes=8, scale=1.0):
    """Sampled checks of (firm) nonexpansiveness and prox optimality."""
    rng = np.random.default_rng(rng)
    failures = []
    for _ in range(probes):
        t = float(np.exp(rng.uniform(-2, 2)))
        u = scale * rng.standard_normal(dim)
        v = scale * rng.standard_normal(dim)
        pu, pv = term.prox(t, u), term.prox(t, v)
        dp = pu - pv
        if np.linalg.norm(dp) > np.linalg.norm(u - v) * (1 + 1e-12) + 1e-14:
            failures.append(f"{term.name}: prox is not nonexpansive")
        if dp @ (u - v) < dp @ dp - 1e-10 * max(1.0, dp @ dp):
            failures.append(f"{term.name}: prox is not firmly nonexpansive")
        s = (v - pv) / t
        fp = term.value(pv)
        if not np.isfinite(fp):
            failures.append(f"{term.name}: prox output outside the domain")
            continue
        for w in (pv + scale * rng.standard_normal(dim), term.prox(1.0, scale * rng.standard_normal(dim))):
            lhs = term.value(w)
            rhs = fp + s @ (w - pv)
            if lhs < rhs - 1e-9 * max(1.0, abs(rhs)):
                failures.append(f"{term.name}: prox optimality (subgradient inequality) violated")
    return failures


def check_coupling(coupling, rng=None, probes=8):
    rng = np.random.default_rng(rng)
    failures = []
    c = coupling
    if not c.sigma_max >= c.sigma_min_nz >= c.sigma_min >= 0:
        failures.append("coupling: singular value ordering violated")
    dy, dx = c.shape
    for _ in range(probes):
        v = rng.standard_normal(dx)
        if np.linalg.norm(c.apply(v)) > c.sigma_max * np.linalg.norm(v) * (1 + 1e-12) + 1e-14:
            failures.append("coupling: |Bv| exceeds sigma_max |v|")
    fresh = np.linalg.svd(c.matrix, compute_uv=False)
    if not np.allclose(fresh, c.singular_values, rtol=1e-10, atol=1e-14):
        failures.append("coupling: cached singular values are stale")
    return failures


def check_structured(g1, rng=None, probes=8):
    rng = np.random.default_rng(rng)
    failures = []
    P = g1.P
    if np.abs(P - P.T).max(initial=0.0) > 1e-12:
        failures.append("g1: P not symmetric")
    if P.size and np.linalg.eigvalsh(P)[0] < -1e-10:
        failures.append("g1: P not PSD")
    for _ in range(probes):
        y = rng.standard_normal(g1.dim)
        expect = P @ y + g1.b + (g1.g3.grad(y) if g1.g3 is not None else 0.0)
        if not np.allclose(g1.grad(y), expect, rtol=1e-12, atol=1e-12):
            failures.append("g1: gradient inconsistent with g3 + Py + b")
    return failures


def validate_problem(problem, rng=None, probes=6):
    """Run every sampled assumption check; return the list of failures."""
    rng = np.random.default_rng(rng)
    dx, dy = problem.dims
    out = []
    out += check_smooth_term(problem.f1, dx, rng, probes)
    out += check_prox_term(problem.f2, dx, rng, probes)
    out += check_coupling(problem.B, rng, probes)
    out += check_smooth_term(problem.g1, dy, rng, probes)
    out += check_prox_term(problem.g2, dy, rng, probes)
    if problem.structured:
        out += check_structured(problem.g1, rng, probes)
    return out
