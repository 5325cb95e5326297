"""Accelerated proximal gradient for strongly convex composite problems.

Minimises ``F(x) = g(x) + h(x)`` with ``g`` ``mu``-strongly convex and
``L``-smooth and ``h`` prox-friendly.  The scheme uses the fixed step
``1/L`` and the strongly convex momentum recursion started from
``theta_0 = 1``::

    L theta_k^2 = (1 - theta_k) L theta_{k-1}^2 + mu theta_k

which keeps ``F(x_k) - F* <= (1 - 1/sqrt(kappa))^(k-1) * L/2 |x_0 - x*|^2``
for every ``k >= 1``.  ``theta_k`` decreases to ``1/sqrt(kappa)``, so the
effective momentum tends to ``(sqrt(kappa) - 1)/(sqrt(kappa) + 1)``.

Termination is by certificate: after each step the prox-gradient residual
of the new iterate, divided by ``mu``, bounds its distance to the minimiser.
"""

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NotConvergedError
from .problem import ProxTerm, SmoothTerm


@dataclass(frozen=True)
class CompositeObjective:
    smooth: SmoothTerm
    prox: ProxTerm

    def __post_init__(self):
        if not self.smooth.mu > 0:
            raise ValueError("composite objective needs a strongly convex smooth part")

    @property
    def kappa(self):
        return self.smooth.L / self.smooth.mu

    def value(self, x):
        return self.smooth.value(x) + self.prox.value(x)


@dataclass(frozen=True)
class WarmStart:
    """First-order information already known at the starting point.

    ``grad`` is the smooth gradient at ``x0`` and ``subgrad`` an element of
    the prox term's subdifferential there; together they certify ``x0``
    without any new oracle call.
    """

    grad: np.ndarray
    subgrad: np.ndarray


@dataclass
class ApgResult:
    x: np.ndarray
    certified_distance: float
    iterations: int
    grad: Optional[np.ndarray] = None
    subgrad: Optional[np.ndarray] = None

    def warm_start(self):
        return WarmStart(self.grad, self.subgrad)


def _next_theta(theta, kappa_inv):
    # root in (0, 1] of theta'^2 = (1 - theta') theta^2 + theta' / kappa
    gamma = theta * theta
    a = gamma - kappa_inv
    return 0.5 * (-a + math.sqrt(a * a + 4.0 * gamma))


def apg_minimize(obj, x0, target_distance, max_iters=100_000, warm=None, counter=None,
                 callback=None):
    """Minimise ``obj`` from ``x0`` until ``|x - argmin| <= target_distance``
    is certified.

    Parameters
    ----------
    obj : CompositeObjective
    x0 : ndarray
        Starting point.
    target_distance : float
        Required certified distance to the minimiser.
    max_iters : int
        Iteration budget; :class:`NotConvergedError` is raised when it runs
        out, with the best certified iterate attached as ``.result``.
    warm : WarmStart, optional
        If given and already certifying ``x0``, the call returns ``x0`` after
        zero iterations.
    counter : collections.Counter, optional
        Receives ``grad`` (gradients at extrapolated points), ``grad_cert``
        (gradients at new iterates, used by the certificate) and ``prox``.
    callback : callable, optional
        Called as ``callback(k, x_k, certified_distance)`` after every step.

    Returns
    -------
    ApgResult
    """
    if not target_distance > 0:
        raise ValueError("target_distance must be positive")
    counter = Counter() if counter is None else counter
    smooth, h = obj.smooth, obj.prox
    mu, L = smooth.mu, smooth.L
    t = 1.0 / L
    kappa_inv = mu / L
    x = np.array(x0, dtype=float)

    best = None
    if warm is not None:
        dist = float(np.linalg.norm(warm.grad + warm.subgrad)) / mu
        best = ApgResult(x.copy(), dist, 0, warm.grad, warm.subgrad)
        if dist <= target_distance:
            return best

    v = x.copy()
    theta = 1.0
    for k in range(1, max_iters + 1):
        if k == 1:
            y = x
        else:
            prev = theta
            theta = _next_theta(prev, kappa_inv)
            gamma = prev * prev
            y = x + (theta * gamma / (gamma + kappa_inv * theta)) * (v - x)
        gy = smooth.grad(y)
        counter["grad"] += 1
        x_new = h.prox(t, y - t * gy)
        counter["prox"] += 1
        v = x + (x_new - x) / theta
        x = x_new
        gx = smooth.grad(x)
        counter["grad_cert"] += 1
        if not np.all(np.isfinite(x)):
            raise NotConvergedError("APG produced a non-finite iterate", best)
        subgrad = (y - x) / t - gy
        dist = float(np.linalg.norm(gx + subgrad)) / mu
        if callback is not None:
            callback(k, x, dist)
        if best is None or dist < best.certified_distance:
            best = ApgResult(x.copy(), dist, k, gx, subgrad)
        if dist <= target_distance:
            return ApgResult(x, dist, k, gx, subgrad)
    raise NotConvergedError(
        f"APG did not certify distance {target_distance:.3g} in {max_iters} iterations "
        f"(best {best.certified_distance:.3g})", best)


def apg_iteration_bound(kappa, initial_distance, target_distance):
    """A-priori APG iteration count ``ceil(sqrt(k) log(k d0^2 / eps^2)) + 1``.

    The logarithm is clipped at zero, so an already-met target gives 1.
    """
    if kappa < 1:
        raise ValueError("condition number must be at least 1")
    if not (initial_distance > 0 and target_distance > 0):
        raise ValueError("distances must be positive")
    arg = kappa * (initial_distance / target_distance) ** 2
    return int(math.ceil(math.sqrt(kappa) * max(math.log(arg), 0.0))) + 1
