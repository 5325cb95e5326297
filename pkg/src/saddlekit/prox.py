"""Catalog of proximal-friendly terms and smooth building blocks.

Catalog names double as the ``kind`` strings of the instance JSON format.
"""

from dataclasses import dataclass

import numpy as np

from .problem import ProxTerm, SmoothTerm, StructuredDualSmooth

PROX_KINDS = ("zero", "l1", "squared_l2", "box_indicator", "linear")


def soft_threshold(v, width):
    """Componentwise shrinkage; exact kinks map to 0."""
    return np.sign(v) * np.maximum(np.abs(v) - width, 0.0)


def _zero():
    return ProxTerm(
        value=lambda x: 0.0,
        prox=lambda t, v: np.array(v, dtype=float),
        name="zero",
        params={},
        subgradient_residual=lambda x, v: np.array(v, dtype=float),
    )


def _l1(weight):
    w = float(weight)

    def residual(x, v):
        r = np.where(x != 0, v + w * np.sign(x), soft_threshold(v, w))
        return r

    return ProxTerm(
        value=lambda x: w * float(np.abs(x).sum()),
        prox=lambda t, v: soft_threshold(v, t * w),
        name="l1",
        params={"weight": w},
        subgradient_residual=residual,
    )


def _squared_l2(weight):
    w = float(weight)
    return ProxTerm(
        value=lambda x: 0.5 * w * float(x @ x),
        prox=lambda t, v: v / (1.0 + t * w),
        name="squared_l2",
        params={"weight": w},
        subgradient_residual=lambda x, v: v + w * x,
    )


def _box(lower, upper):
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if np.any(lo > hi):
        raise ValueError("box_indicator needs lower <= upper")

    def value(x):
        return 0.0 if np.all((x >= lo) & (x <= hi)) else np.inf

    def residual(x, v):
        if not np.all((x >= lo) & (x <= hi)):
            return np.full(np.shape(v), np.inf)
        at_lo = x <= lo
        at_hi = x >= hi
        # normal cone: (-inf, 0] at the lower face, [0, inf) at the upper face
        r = np.array(v, dtype=float)
        r = np.where(at_lo & ~at_hi, np.minimum(r, 0.0), r)
        r = np.where(at_hi & ~at_lo, np.maximum(r, 0.0), r)
        r = np.where(at_lo & at_hi, 0.0, r)
        return r

    params = {"lower": lo.tolist(), "upper": hi.tolist()}
    return ProxTerm(
        value=value,
        prox=lambda t, v: np.clip(v, lo, hi),
        name="box_indicator",
        params=params,
        subgradient_residual=residual,
    )


def _linear(c):
    c = np.asarray(c, dtype=float)
    c.setflags(write=False)
    return ProxTerm(
        value=lambda x: float(c @ x),
        prox=lambda t, v: v - t * c,
        name="linear",
        params={"c": c.tolist()},
        subgradient_residual=lambda x, v: v + c,
    )


def prox_instantiate(name, **params):
    """Build a catalog :class:`ProxTerm`.

    ======================  =============================  ======================
    name                    term                           prox
    ======================  =============================  ======================
    ``zero``                0                              identity
    ``l1``                  ``weight * |x|_1``             soft threshold ``t*w``
    ``squared_l2``          ``weight/2 * |x|^2``           ``v / (1 + t*w)``
    ``box_indicator``       indicator of ``[lower, upper]``  clamp
    ``linear``              ``c^T x``                      ``v - t*c``
    ======================  =============================  ======================
    """
    if name == "zero":
        return _zero()
    if name in ("l1", "squared_l2"):
        weight = params.get("weight", 1.0)
        if not weight > 0:
            raise ValueError(f"{name}: weight must be positive, got {weight}")
        return _l1(weight) if name == "l1" else _squared_l2(weight)
    if name == "box_indicator":
        return _box(params.get("lower", 0.0), params.get("upper", 1.0))
    if name == "linear":
        if "c" not in params:
            raise ValueError("linear: missing coefficient vector c")
        return _linear(params["c"])
    raise ValueError(f"unknown prox kind {name!r}; expected one of {PROX_KINDS}")


# -- smooth pieces -------------------------------------------------------------


def quadratic_term(Q, q=None, name="quadratic"):
    """``0.5 x^T Q x + q^T x`` with moduli read off the spectrum of ``Q``."""
    Q = np.atleast_2d(np.array(Q, dtype=float))
    Q = 0.5 * (Q + Q.T)
    q = np.zeros(Q.shape[0]) if q is None else np.atleast_1d(np.array(q, dtype=float))
    if q.shape != (Q.shape[0],):
        raise ValueError("q must match Q")
    ev = np.linalg.eigvalsh(Q)
    if ev[0] < -1e-12 * max(1.0, ev[-1]):
        raise ValueError("Q must be positive semidefinite")
    Q.setflags(write=False)
    q.setflags(write=False)
    return SmoothTerm(
        value=lambda x: float(0.5 * x @ (Q @ x) + q @ x),
        grad=lambda x: Q @ x + q,
        mu=float(max(ev[0], 0.0)),
        L=float(ev[-1]),
        name=name,
        quadratic=(Q, q),
    )


def logistic_ridge_term(A, weight, ridge, q=None):
    """``weight * sum log(1 + exp(A x)) + ridge/2 |x|^2 + q^T x``.

    A non-quadratic strongly convex term; ``L = ridge + weight |A|^2 / 4``.
    """
    A = np.atleast_2d(np.array(A, dtype=float))
    w, r = float(weight), float(ridge)
    q = np.zeros(A.shape[1]) if q is None else np.asarray(q, dtype=float)

    def value(x):
        return float(w * np.logaddexp(0.0, A @ x).sum() + 0.5 * r * x @ x + q @ x)

    def grad(x):
        s = 0.5 * (1.0 + np.tanh(0.5 * (A @ x)))
        return w * (A.T @ s) + r * x + q

    smax = np.linalg.norm(A, 2) if A.size else 0.0
    return SmoothTerm(value=value, grad=grad, mu=r, L=r + 0.25 * w * smax ** 2,
                      name="logistic_ridge")


def linear_dual_term(b):
    """A linear ``g1(y) = b^T y``, flagged for the linear-constraint case."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    return StructuredDualSmooth(np.zeros((b.size, b.size)), b, linear=True)


@dataclass(frozen=True)
class ConjugateLoss:
    """Conjugate ``l*`` of a data-fitting loss, packaged as a dual smooth term."""

    name: str
    smooth_part: StructuredDualSmooth
    labels: np.ndarray
    p: int


def square_loss_conjugate(labels, p=None):
    """Conjugate of ``l(z) = |z - labels|^2 / (2p)``.

    ``l*(lam) = p/2 |lam|^2 + lam^T labels`` with gradient ``p lam + labels``;
    it is ``p``-strongly convex and ``p``-smooth.
    """
    labels = np.atleast_1d(np.asarray(labels, dtype=float))
    p = labels.size if p is None else int(p)
    if p < 1:
        raise ValueError("square loss needs at least one sample")
    if labels.size != p:
        raise ValueError(f"expected {p} labels, got {labels.size}")
    g = StructuredDualSmooth(p * np.eye(p), labels)
    return ConjugateLoss("square", g, labels, p)
