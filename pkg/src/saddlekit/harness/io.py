"""Instance JSON format.

An instance file is one JSON object::

    {
      "name": "scalar",                                   (optional)
      "f1": {"kind": "quadratic", "Q": [[1.0]], "q": [0.0]},
      "f2": {"kind": "l1", "weight": 0.1},                (any prox kind)
      "B": [[1.0]],
      "g1": {"kind": "quadratic", "P": [[0.0]], "b": [0.0]},
      "g2": {"kind": "zero"},
      "mu_phi": 0.5,                                      (optional)
      "x0": [1.0], "y0": [1.0],                           (optional)
      "reference": {"x_star": [...], "y_star": [...]}     (optional)
    }

``g1`` kinds are ``quadratic`` (``P``, ``b``), ``linear`` (``b``) and
``square_loss_conjugate`` (``labels``).  Prox parameters may be given
inline or under a ``"params"`` object; ``box`` is accepted for
``box_indicator``.
"""

import hashlib
import json

import numpy as np

from ..errors import InstanceError
from ..problem import MinimaxProblem, StructuredDualSmooth, saddle_certificate
from ..prox import PROX_KINDS, linear_dual_term, prox_instantiate, quadratic_term, square_loss_conjugate
from .instances import REFERENCE_TOL, ReferenceSaddle

PROX_ALIASES = {"box": "box_indicator", "indicator_box": "box_indicator"}
G1_KINDS = ("quadratic", "linear", "square_loss_conjugate")


class InstanceFormatError(InstanceError):
    """Malformed instance input; ``kind`` is ``parse`` or ``schema``."""

    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


def _array(obj, key, ndim, where):
    if key not in obj:
        raise InstanceFormatError("schema", f"{where}: missing field {key!r}")
    try:
        a = np.array(obj[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError("schema", f"{where}.{key}: not numeric") from exc
    if ndim == 2:
        a = np.atleast_2d(a)
    elif ndim == 1:
        a = np.atleast_1d(a)
    if a.ndim != ndim or not np.all(np.isfinite(a)):
        raise InstanceFormatError("schema", f"{where}.{key}: expected a finite {ndim}-d array")
    return a


def _section(data, key):
    sec = data.get(key)
    if not isinstance(sec, dict) or "kind" not in sec:
        raise InstanceFormatError("schema", f"{key}: expected an object with a 'kind' field")
    return sec


def _prox(sec, where):
    kind = PROX_ALIASES.get(sec["kind"], sec["kind"])
    if kind not in PROX_KINDS:
        raise InstanceFormatError("schema", f"{where}: unknown kind {sec['kind']!r}")
    params = dict(sec.get("params", {}))
    params.update({k: v for k, v in sec.items() if k not in ("kind", "params")})
    try:
        return prox_instantiate(kind, **params)
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError("schema", f"{where}: {exc}") from exc


def _g1(sec):
    kind = sec["kind"]
    if kind == "quadratic":
        return StructuredDualSmooth(_array(sec, "P", 2, "g1"), _array(sec, "b", 1, "g1"))
    if kind == "linear":
        return linear_dual_term(_array(sec, "b", 1, "g1"))
    if kind == "square_loss_conjugate":
        return square_loss_conjugate(_array(sec, "labels", 1, "g1")).smooth_part
    raise InstanceFormatError("schema", f"g1: unknown kind {kind!r}; expected one of {G1_KINDS}")


def parse_instance(data):
    """Build ``(problem, reference_or_None, extras)`` from a decoded object.

    ``extras`` holds the optional ``x0``/``y0`` starting points and the name.
    """
    if not isinstance(data, dict):
        raise InstanceFormatError("schema", "instance must be a JSON object")
    f1 = _section(data, "f1")
    if f1["kind"] != "quadratic":
        raise InstanceFormatError("schema", "f1: only kind 'quadratic' is supported")
    try:
        problem = MinimaxProblem(
            quadratic_term(_array(f1, "Q", 2, "f1"), _array(f1, "q", 1, "f1"), "f1"),
            _prox(_section(data, "f2"), "f2"),
            _array(data, "B", 2, "instance"),
            _g1(_section(data, "g1")),
            _prox(_section(data, "g2"), "g2"),
            declared_mu_phi=data.get("mu_phi"),
            meta={"name": data.get("name"), "fingerprint": fingerprint(data)},
        )
    except InstanceFormatError:
        raise
    except ValueError as exc:
        raise InstanceFormatError("schema", str(exc)) from exc
    dx, dy = problem.dims
    extras = {"name": data.get("name")}
    for key, dim in (("x0", dx), ("y0", dy)):
        if key in data:
            v = _array(data, key, 1, "instance")
            if v.shape != (dim,):
                raise InstanceFormatError("schema", f"{key}: expected length {dim}")
            extras[key] = v
    reference = None
    if "reference" in data:
        ref = data["reference"]
        x, y = _array(ref, "x_star", 1, "reference"), _array(ref, "y_star", 1, "reference")
        if x.shape != (dx,) or y.shape != (dy,):
            raise InstanceFormatError("schema", "reference: dimension mismatch")
        cert = saddle_certificate(problem, x, y)
        if cert > REFERENCE_TOL:
            raise InstanceFormatError("schema", f"reference: certificate {cert:.3g} exceeds {REFERENCE_TOL}")
        reference = ReferenceSaddle(x, y, ref.get("method", "kkt_solve"), cert)
    return problem, reference, extras


def loads_instance(text):
    if not text.strip():
        raise InstanceFormatError("parse", "empty instance")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError("parse", f"invalid JSON: {exc}") from exc
    return parse_instance(data)


def load_instance(path):
    with open(path) as fh:
        return loads_instance(fh.read())


def _prox_dict(term):
    return {"kind": term.name, **{k: (np.asarray(v).tolist()) for k, v in term.params.items()}}


def instance_to_dict(problem, reference=None, name=None, x0=None, y0=None):
    """Inverse of :func:`parse_instance` for quadratic instances."""
    if problem.f1.quadratic is None:
        raise InstanceError("only quadratic f1 can be serialized")
    g1 = problem.g1
    if not isinstance(g1, StructuredDualSmooth) or g1.g3 is not None:
        raise InstanceError("only structured g1 without g3 can be serialized")
    Q, q = problem.f1.quadratic
    out = {
        "f1": {"kind": "quadratic", "Q": Q.tolist(), "q": q.tolist()},
        "f2": _prox_dict(problem.f2),
        "B": problem.B.matrix.tolist(),
        "g1": ({"kind": "linear", "b": g1.b.tolist()} if g1.linear else
               {"kind": "quadratic", "P": g1.P.tolist(), "b": g1.b.tolist()}),
        "g2": _prox_dict(problem.g2),
    }
    if name is not None:
        out["name"] = name
    if problem.declared_mu_phi is not None:
        out["mu_phi"] = problem.declared_mu_phi
    if x0 is not None:
        out["x0"] = np.asarray(x0, float).tolist()
    if y0 is not None:
        out["y0"] = np.asarray(y0, float).tolist()
    if reference is not None:
        out["reference"] = {"x_star": reference.x_star.tolist(),
                            "y_star": reference.y_star.tolist(), "method": reference.method}
    return out


def dumps_instance(problem, reference=None, **kw):
    return json.dumps(instance_to_dict(problem, reference, **kw), indent=1)


def fingerprint(data):
    """SHA-256 of the canonical JSON encoding, ignoring any ``reference``."""
    core = {k: v for k, v in data.items() if k != "reference"}
    blob = json.dumps(core, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
