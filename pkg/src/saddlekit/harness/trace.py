"""Per-iteration traces, their JSON-lines/CSV persistence, and rate fitting."""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1

#: Column order used by CSV export; absent columns are skipped.
COLUMNS = ("k", "eps_k", "inner_iters", "primal_cert", "dual_cert",
           "dist_x_sq", "dist_y_sq", "lyapunov")


@dataclass
class Trace:
    """Iteration records plus run metadata.

    Each record is a dict keyed by a subset of :data:`COLUMNS`; ``k`` is
    strictly increasing and every real is finite.
    """

    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    final_state: object = field(default=None, repr=False, compare=False)

    def append(self, **rec):
        if self.records and rec["k"] <= self.records[-1]["k"]:
            raise ValueError("trace iteration index must increase")
        for key, val in rec.items():
            if isinstance(val, float) and not math.isfinite(val):
                raise ValueError(f"non-finite value recorded for {key}")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def column(self, name):
        """Values of ``name`` over records that carry it, as a float array."""
        return np.array([r[name] for r in self.records if name in r], dtype=float)

    def ks(self, name):
        return np.array([r["k"] for r in self.records if name in r], dtype=float)

    @property
    def columns(self):
        present = {key for r in self.records for key in r}
        return [c for c in COLUMNS if c in present]

    # -- persistence -----------------------------------------------------

    def dumps_jsonl(self):
        header = {"schema": SCHEMA_VERSION, **self.meta}
        lines = [json.dumps(header, sort_keys=True)]
        lines += [json.dumps(r) for r in self.records]
        return "\n".join(lines) + "\n"

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps_jsonl())

    @classmethod
    def loads_jsonl(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty trace")
        header = json.loads(lines[0])
        if header.pop("schema", None) != SCHEMA_VERSION:
            raise ValueError("unsupported trace schema")
        return cls([json.loads(ln) for ln in lines[1:]], header)

    @classmethod
    def read_jsonl(cls, path):
        with open(path) as fh:
            return cls.loads_jsonl(fh.read())

    def dumps_csv(self):
        buf = io.StringIO()
        cols = self.columns
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(cols)
        for r in self.records:
            writer.writerow(["" if c not in r else repr(r[c]) for c in cols])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps_csv())


def empirical_rate(trace, column, tail_fraction=0.5, floor=0.0):
    """Fitted per-iteration contraction factor of ``column``.

    Least-squares slope of ``log(value)`` against ``k`` over the trailing
    ``tail_fraction`` of the records, returned as ``exp(slope)``.  Values at
    or below ``floor`` (and anything after them) are treated as having hit
    the floating-point floor and are dropped first.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    if isinstance(trace, Trace):
        ks, vals = trace.ks(column), trace.column(column)
    else:
        vals = np.asarray(trace, dtype=float)
        ks = np.arange(vals.size, dtype=float)
    bad = np.flatnonzero(~(vals > floor) | ~np.isfinite(vals))
    if bad.size:
        ks, vals = ks[: bad[0]], vals[: bad[0]]
    n = int(math.ceil(tail_fraction * vals.size))
    if n < 5:
        raise ValueError(f"need at least 5 tail points above the floor, have {n}")
    slope = np.polyfit(ks[-n:], np.log(vals[-n:]), 1)[0]
    return float(np.exp(slope))
