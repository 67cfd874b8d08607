"""Covering / packing instances: data model, validation, generators and JSON I/O.

A :class:`CoveringInstance` stores the sparse matrix ``A`` as ``(i, j, a_ij)``
triplets together with demands ``w``, costs ``c``, optional upper bounds
``u`` (``None`` means unbounded) and the set ``I`` of integer variables.  The
same object describes the packing dual ``max w.y  s.t.  A^T y <= c``; a
:class:`PackingInstance` is only a relabelled view of it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "ConstraintView",
    "CoveringInstance",
    "InstanceFormatError",
    "InvalidInstanceError",
    "PackingInstance",
    "ValidationReport",
    "gen_cmip",
    "gen_cmip2",
    "gen_fractional",
    "gen_hypergraph_bmatching",
    "gen_wvc",
    "read_instance",
    "validate",
    "write_instance",
]


class InvalidInstanceError(ValueError):
    """Raised when an instance violates a structural invariant."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{code}: {msg}" for code, msg in self.errors))


class InstanceFormatError(ValueError):
    """Raised when an instance document cannot be parsed."""


class ConstraintView(NamedTuple):
    """One covering constraint with the per-variable data needed to evaluate it."""

    index: int
    vars: tuple
    coefs: tuple
    demand: float
    costs: tuple
    integer: tuple
    bounds: tuple

    @property
    def arity(self):
        return len(self.vars)


@dataclass(frozen=True, eq=True)
class CoveringInstance:
    n_vars: int
    n_cons: int
    entries: tuple
    demands: tuple
    costs: tuple
    upper_bounds: tuple
    integer_vars: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        entries = tuple(sorted((int(i), int(j), float(a)) for i, j, a in self.entries))
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "demands", tuple(float(v) for v in self.demands))
        object.__setattr__(self, "costs", tuple(float(v) for v in self.costs))
        object.__setattr__(
            self,
            "upper_bounds",
            tuple(None if v is None else float(v) for v in self.upper_bounds),
        )
        object.__setattr__(self, "integer_vars", frozenset(int(j) for j in self.integer_vars))
        object.__setattr__(self, "n_vars", int(self.n_vars))
        object.__setattr__(self, "n_cons", int(self.n_cons))

    # adjacency indexes are built lazily so that invalid instances can still
    # be constructed and reported on by validate()
    @cached_property
    def cons_vars(self):
        """Per constraint: tuple of ``(j, a_ij)`` sorted by variable index."""
        rows = [[] for _ in range(self.n_cons)]
        for i, j, a in self.entries:
            rows[i].append((j, a))
        return tuple(tuple(r) for r in rows)

    @cached_property
    def var_cons(self):
        """Per variable: tuple of ``(i, a_ij)`` sorted by constraint index."""
        cols = [[] for _ in range(self.n_vars)]
        for i, j, a in self.entries:
            cols[j].append((i, a))
        return tuple(tuple(c) for c in cols)

    @cached_property
    def _views(self):
        views = []
        for i, row in enumerate(self.cons_vars):
            js = tuple(j for j, _ in row)
            views.append(
                ConstraintView(
                    index=i,
                    vars=js,
                    coefs=tuple(a for _, a in row),
                    demand=self.demands[i],
                    costs=tuple(self.costs[j] for j in js),
                    integer=tuple(j in self.integer_vars for j in js),
                    bounds=tuple(self.upper_bounds[j] for j in js),
                )
            )
        return tuple(views)

    def constraint(self, i):
        return self._views[i]

    def constraints(self):
        return self._views

    @property
    def rho(self):
        return max((len(r) for r in self.cons_vars), default=0)

    @property
    def delta(self):
        return max((len(c) for c in self.var_cons), default=0)

    @property
    def is_fractional(self):
        """No integer variables and no upper bounds (pure Fractional Covering)."""
        return not self.integer_vars and all(u is None for u in self.upper_bounds)

    @property
    def is_zero_one(self):
        return all(a == 1.0 for _, _, a in self.entries)

    def neighbors(self, i):
        """Constraints sharing at least one variable with constraint ``i``."""
        out = set()
        for j, _ in self.cons_vars[i]:
            out.update(k for k, _ in self.var_cons[j])
        out.discard(i)
        return sorted(out)

    def cost(self, x):
        return math.fsum(c * v for c, v in zip(self.costs, x))

    def value(self, y):
        return math.fsum(w * v for w, v in zip(self.demands, y))

    def dual(self):
        return PackingInstance(self)

    def restrict(self, keep_cons):
        """Sub-instance with only the constraints in ``keep_cons`` (indices kept)."""
        keep = set(keep_cons)
        return CoveringInstance(
            n_vars=self.n_vars,
            n_cons=self.n_cons,
            entries=[e for e in self.entries if e[0] in keep],
            demands=[w if i in keep else 0.0 for i, w in enumerate(self.demands)],
            costs=self.costs,
            upper_bounds=self.upper_bounds,
            integer_vars=self.integer_vars,
        )


@dataclass(frozen=True)
class PackingInstance:
    """``maximize w.y  s.t.  A^T y <= c, y >= 0`` -- the dual of ``covering``.

    Packing variable ``y_i`` corresponds to covering constraint ``i``; packing
    constraint ``j`` (capacity ``c_j``) corresponds to covering variable ``j``.
    """

    covering: CoveringInstance

    @property
    def n_vars(self):
        return self.covering.n_cons

    @property
    def n_cons(self):
        return self.covering.n_vars

    @property
    def weights(self):
        return self.covering.demands

    @property
    def capacities(self):
        return self.covering.costs

    @property
    def rho(self):
        return self.covering.rho

    @property
    def is_bmatching(self):
        cov = self.covering
        return cov.is_zero_one and all(float(c).is_integer() for c in cov.costs)

    def edges(self):
        """Hyperedges as tuples of vertex indices (one per packing variable)."""
        return [tuple(j for j, _ in row) for row in self.covering.cons_vars]


class ValidationReport(NamedTuple):
    ok: bool
    errors: list
    rho: int
    delta: int


def validate(instance):
    """Check every structural invariant; never raises.

    >>> validate(CoveringInstance(2, 1, [(0, 0, 0.5), (0, 1, 3)], [5], [1, 1], [None, 1])).rho
    2
    """
    errs = []
    n, m = instance.n_vars, instance.n_cons
    if n < 0 or m < 0:
        errs.append(("negative-size", f"n_vars={n}, n_cons={m}"))
    if len(instance.demands) != m:
        errs.append(("length-mismatch", f"demands has {len(instance.demands)} entries, n_cons={m}"))
    if len(instance.costs) != n:
        errs.append(("length-mismatch", f"costs has {len(instance.costs)} entries, n_vars={n}"))
    if len(instance.upper_bounds) != n:
        errs.append(
            ("length-mismatch", f"upper_bounds has {len(instance.upper_bounds)} entries, n_vars={n}")
        )
    for j, c in enumerate(instance.costs):
        if not (c > 0 and math.isfinite(c)):
            errs.append(("nonpositive-cost", f"c[{j}] = {c}"))
    for i, w in enumerate(instance.demands):
        if not (w >= 0 and math.isfinite(w)):
            errs.append(("negative-demand", f"w[{i}] = {w}"))
    for j, u in enumerate(instance.upper_bounds):
        if u is not None and not (u > 0 and math.isfinite(u)):
            errs.append(("nonpositive-upper-bound", f"u[{j}] = {u}"))
    for j in instance.integer_vars:
        if not 0 <= j < n:
            errs.append(("index-out-of-range", f"integer variable {j}"))
    seen = set()
    in_range = True
    for i, j, a in instance.entries:
        if not (0 <= i < m and 0 <= j < n):
            errs.append(("index-out-of-range", f"entry ({i}, {j})"))
            in_range = False
            continue
        if not (a > 0 and math.isfinite(a)):
            errs.append(("nonpositive-coefficient", f"A[{i},{j}] = {a}"))
        if (i, j) in seen:
            errs.append(("duplicate-entry", f"({i}, {j})"))
        seen.add((i, j))
    rho = delta = 0
    if in_range and not errs:
        for i, row in enumerate(instance.cons_vars):
            if not row:
                # a packing variable with an empty column would be unbounded
                errs.append(("empty-constraint", f"constraint {i} has no variables"))
        rho, delta = instance.rho, instance.delta
    return ValidationReport(not errs, errs, rho, delta)


# --------------------------------------------------------------------------
# generators


def _rng(seed):
    return np.random.default_rng(seed)


def _draw(rng, lo, hi, size=None):
    if float(lo).is_integer() and float(hi).is_integer():
        return rng.integers(int(lo), int(hi), endpoint=True, size=size).astype(float)
    return rng.uniform(lo, hi, size=size)


def gen_wvc(n, edge_prob, cost_range=(1, 100), seed=None):
    """Weighted vertex cover on an Erdos-Renyi graph G(n, edge_prob).

    Each edge ``(u, v)`` becomes the constraint ``x_u + x_v >= 1`` with every
    variable integral and unbounded, so any cover is read off as
    ``floor(x)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    costs = _draw(rng, *cost_range, size=n)
    edges = []
    for u in range(n - 1):
        hits = np.flatnonzero(rng.random(n - u - 1) < edge_prob)
        edges.extend((u, u + 1 + int(k)) for k in hits)
    entries = []
    for i, (u, v) in enumerate(edges):
        entries.append((i, u, 1.0))
        entries.append((i, v, 1.0))
    return CoveringInstance(
        n_vars=n,
        n_cons=len(edges),
        entries=entries,
        demands=[1.0] * len(edges),
        costs=costs,
        upper_bounds=[None] * n,
        integer_vars=range(n),
    )


def _feasible_at_max(view):
    if view.demand <= 0:
        return True
    total = 0.0
    for a, integer, u in zip(view.coefs, view.integer, view.bounds):
        if u is None:
            return True
        total += a * (math.floor(u) if integer else u)
    return total >= view.demand


def gen_cmip(
    n,
    m,
    rho,
    seed=None,
    *,
    single_prob=0.1,
    integer_prob=0.5,
    bound_prob=0.3,
    coef_range=(0.5, 3.0),
    demand_range=(1.0, 5.0),
    cost_range=(1.0, 10.0),
    bound_range=(1, 5),
    fractional=False,
):
    """Random CMIP with at most ``rho`` variables per constraint.

    Constraint arity is uniform on ``2..min(rho, n)``, or 1 with probability
    ``single_prob``.  Constraints that cannot be met even with every variable
    at its upper bound get the bound of their first variable removed.  With
    ``fractional=True`` there are no integer variables and no bounds.
    """
    if n < 1 or m < 0 or rho < 1:
        raise ValueError("need n >= 1, m >= 0, rho >= 1")
    rng = _rng(seed)
    costs = _draw(rng, *cost_range, size=n)
    if fractional:
        integer = []
        bounds = [None] * n
    else:
        integer = [j for j in range(n) if rng.random() < integer_prob]
        bounds = [
            float(_draw(rng, *bound_range)) if rng.random() < bound_prob else None for j in range(n)
        ]
    top = min(rho, n)
    rows = []
    for _ in range(m):
        if top == 1 or rng.random() < single_prob:
            k = 1
        else:
            k = int(rng.integers(2, top, endpoint=True))
        js = sorted(int(j) for j in rng.choice(n, size=k, replace=False))
        coefs = [float(a) for a in rng.uniform(*coef_range, size=k)]
        rows.append((js, coefs, float(rng.uniform(*demand_range))))
    entries = [(i, j, a) for i, (js, coefs, _) in enumerate(rows) for j, a in zip(js, coefs)]
    inst = CoveringInstance(n, m, entries, [r[2] for r in rows], costs, bounds, integer)
    if fractional:
        return inst
    bounds = list(inst.upper_bounds)
    for view in inst.constraints():
        if not _feasible_at_max(view):
            bounds[view.vars[0]] = None
            view = view._replace(bounds=(None,) + view.bounds[1:])
    return CoveringInstance(n, m, inst.entries, inst.demands, inst.costs, bounds, inst.integer_vars)


def gen_cmip2(n, m, seed=None, **opts):
    """Random CMIP_2 instance: every constraint has one or two variables."""
    return gen_cmip(n, m, 2, seed, **opts)


def gen_fractional(n, m, rho, seed=None, **opts):
    """Random Fractional Covering instance (no integrality, no bounds)."""
    return gen_cmip(n, m, rho, seed, fractional=True, **opts)


def gen_hypergraph_bmatching(
    n_vertices, n_edges, rho, cap_range=(1, 5), seed=None, weight_range=(1, 10)
):
    """Random weighted b-matching on a hypergraph with edge size in ``2..rho``.

    Returns the packing view; its covering dual has one unit-coefficient
    constraint per hyperedge and one variable per vertex.
    """
    if rho < 2:
        raise ValueError("rho must be >= 2")
    if rho > n_vertices:
        raise ValueError(f"rho={rho} exceeds n_vertices={n_vertices}")
    if n_edges < 0:
        raise ValueError("n_edges must be >= 0")
    rng = _rng(seed)
    caps = rng.integers(int(cap_range[0]), int(cap_range[1]), endpoint=True, size=n_vertices)
    entries = []
    weights = []
    for i in range(n_edges):
        k = int(rng.integers(2, rho, endpoint=True))
        for j in sorted(int(v) for v in rng.choice(n_vertices, size=k, replace=False)):
            entries.append((i, j, 1.0))
        weights.append(float(_draw(rng, *weight_range)))
    cov = CoveringInstance(
        n_vars=n_vertices,
        n_cons=n_edges,
        entries=entries,
        demands=weights,
        costs=caps.astype(float),
        upper_bounds=[None] * n_vertices,
    )
    return PackingInstance(cov)


# --------------------------------------------------------------------------
# serialization

_KEYS = ("n_vars", "n_cons", "entries", "demands", "costs", "upper_bounds", "integer_vars")


def instance_to_dict(instance):
    return {
        "n_vars": instance.n_vars,
        "n_cons": instance.n_cons,
        "entries": [[i, j, a] for i, j, a in instance.entries],
        "demands": list(instance.demands),
        "costs": list(instance.costs),
        "upper_bounds": list(instance.upper_bounds),
        "integer_vars": sorted(instance.integer_vars),
    }


def instance_from_dict(doc):
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    missing = [k for k in _KEYS if k not in doc]
    if missing:
        raise InstanceFormatError(f"missing keys: {', '.join(missing)}")
    try:
        inst = CoveringInstance(
            n_vars=doc["n_vars"],
            n_cons=doc["n_cons"],
            entries=[tuple(e) for e in doc["entries"]],
            demands=doc["demands"],
            costs=doc["costs"],
            upper_bounds=doc["upper_bounds"],
            integer_vars=doc["integer_vars"],
        )
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"malformed instance: {exc}") from exc
    report = validate(inst)
    if not report.ok:
        raise InvalidInstanceError(report.errors)
    return inst


def write_instance(instance):
    """Serialize to the UTF-8 JSON interchange format."""
    if isinstance(instance, PackingInstance):
        instance = instance.covering
    return json.dumps(instance_to_dict(instance), sort_keys=False).encode("utf-8")


def read_instance(data):
    """Parse an instance document (bytes or str); validates on load."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"not valid JSON: {exc}") from exc
    return instance_from_dict(doc)


def from_rows(rows: Sequence, demands: Iterable, costs: Iterable, upper_bounds=None, integer_vars=()):
    """Build an instance from dense-ish rows ``[{j: a_ij, ...}, ...]``."""
    costs = list(costs)
    entries = [(i, j, a) for i, row in enumerate(rows) for j, a in sorted(row.items())]
    if upper_bounds is None:
        upper_bounds = [None] * len(costs)
    return CoveringInstance(len(costs), len(rows), entries, list(demands), costs, upper_bounds, integer_vars)
