"""Randomized star protocol for covering programs with at most two variables per row.

Nodes are variables.  Initialization steps each node's single-variable
rows until they hold.  Every algorithm round then takes three communication
rounds (announce value and role, leaves pick a star row, roots step), as in
the vertex-cover protocol, but rows are "hit" when their relaxation
potential drops and roots order their star rows by a threshold on the
root's value.

With ``pack=True`` (plain fractional rows only) the protocol also builds
the dual packing: each row's owner raises its ``y`` maximally once the row
and every row sharing a variable with it are satisfied and every such row
stepped later already has its final ``y``.  Ownership: the root that
stepped the row, the node itself for single-variable rows, and the lower
endpoint for rows that were never stepped.
"""

from __future__ import annotations

import math

from ..cover import (
    FLOOR,
    CAP,
    StepRecord,
    _relaxations,
    _target,
    _term,
    is_satisfied,
    min_targets,
    phi,
    step,
    stepsize_cmip,
    stepsize_fractional,
    tolerance,
)
from .base import CoveringProtocol, pack_value

SUBROUNDS = 3
HIT_SLACK = 1e-12


def _can_hit(vals, view, p):
    """Whether raising only position ``p`` by ``stepsize / c_p`` lowers the potential."""
    targets = min_targets(vals, view)
    if targets[p] == math.inf:
        return False
    mine = view.costs[p] * (targets[p] - vals[p])
    best = min(c * (t - v) for c, t, v in zip(view.costs, targets, vals) if t != math.inf)
    return mine <= best * (1 + HIT_SLACK)


def leaf_threshold(view, pv, pw, vals):
    """Least root value at which the row is hit or the leaf stops being able to hit it.

    ``pv``/``pw`` are the positions of the leaf and root in ``view``; ``vals``
    their current values.  Returns ``math.inf`` when raising the root alone
    never hits the row.
    """
    w = view.demand
    tol = tolerance(w)
    lim = w - tol
    av, aw = view.coefs[pv], view.coefs[pw]
    cv, cw = view.costs[pv], view.costs[pw]
    uv, uw = view.bounds[pv], view.bounds[pw]
    xv, x0 = vals[pv], vals[pw]
    rel = []
    for modes in _relaxations(view):
        tv = av * _term(xv, modes[pv], uv)
        tw = aw * _term(x0, modes[pw], uw)
        if tv + tw < lim:
            rel.append((modes[pv], modes[pw], tv))
    if not rel:
        return x0
    h = min(_target(x0, aw, w - tv, mw, uw, tol) for _, mw, tv in rel)
    if h == math.inf:
        return math.inf

    def gaps(xp):
        # leaf's cheapest raise per relaxation minus the root's, at root value xp
        out = []
        for mv, mw, _ in rel:
            need = w - aw * _term(xp, mw, uw)
            t = _target(xv, av, need, mv, uv, tol)
            out.append(cv * (t - xv) - cw * (h - xp) * (1 + HIT_SLACK) if t != math.inf else math.inf)
        return out

    def lost(xp):
        return min(gaps(xp)) > 0

    # breakpoints where some relaxation's leaf target changes its formula
    pts = set()
    if any(mw & FLOOR for _, mw, _ in rel):
        pts.update(float(k) for k in range(math.floor(x0) + 1, math.ceil(h)))
    if uw is not None:
        pts.add(uw)
    linear = [mv for mv, mw, _ in rel if not mw & FLOOR]
    if linear:
        need_hi = w - aw * x0
        need_lo = w - aw * h
        if any(mv & FLOOR for mv in linear):
            k_lo = math.floor((need_lo - tol) / av) - 1
            k_hi = math.ceil((need_hi - tol) / av) + 1
            pts.update((w - tol - av * k) / aw for k in range(k_lo, k_hi + 1))
        if uv is not None and any(mv & CAP for mv in linear):
            pts.add((w - tol - av * uv) / aw)
            pts.add((w - av * uv) / aw)
    cuts = sorted(p for p in pts if x0 < p < h)
    edges = [x0] + cuts + [h]
    for a, b in zip(edges, edges[1:]):
        if lost(a):
            return a
        m1 = a + (b - a) / 3
        m2 = a + 2 * (b - a) / 3
        if m2 <= m1:
            # interval below float resolution; its left end was checked above
            continue
        lo, hi = a, b
        for g1, g2 in zip(gaps(m1), gaps(m2)):
            if g1 == math.inf and g2 == math.inf:
                continue
            slope = (g2 - g1) / (m2 - m1)
            if slope == 0:
                if g1 <= 0:
                    lo, hi = b, a
                    break
                continue
            root = m1 - g1 / slope
            if slope > 0:
                lo = max(lo, root)
            else:
                hi = min(hi, root)
        if lo < hi:
            return lo
    return h


class _Node:
    __slots__ = (
        "x",
        "nbr_x",
        "rows",
        "finished",
        "role",
        "allsat",
        "table",
        "nbr_tab",
        "nbr_allsat",
        "stars",
        "owned_idle",
        "outbox",
        "retired",
        "told",
    )

    def __init__(self):
        self.x = 0.0
        self.nbr_x = {}
        self.rows = []  # (cons, other var or None)
        self.finished = False
        self.role = None
        self.allsat = False
        # packing: per incident row [time, done, y]
        self.table = {}
        self.nbr_tab = {}
        self.nbr_allsat = {}
        self.stars = []
        self.owned_idle = []
        self.outbox = {}
        self.retired = False
        self.told = False


class CMIP2Protocol(CoveringProtocol):
    """Distributed 2-approximation for covering rows over at most two variables.

    ``pack=True`` additionally computes the dual packing ``y`` (fractional
    instances only).
    """

    comm_per_round = SUBROUNDS

    def __init__(self, instance, pack=False):
        if instance.rho > 2:
            raise ValueError(f"instance has rows with {instance.rho} variables; at most 2 allowed")
        if pack and not instance.is_fractional:
            raise ValueError("packing requires a fractional instance (no integers, no bounds)")
        super().__init__(instance)
        self.pack = pack

    # ------------------------------------------------------------------ setup
    def setup(self, network, seed):
        super().setup(network, seed)
        n = self.instance.n_vars
        self.nodes = [_Node() for _ in range(n)]
        for view in self.instance.constraints():
            if view.arity == 1:
                self.nodes[view.vars[0]].rows.append((view.index, None))
            else:
                a, b = view.vars
                self.nodes[a].rows.append((view.index, b))
                self.nodes[b].rows.append((view.index, a))
        for v, node in enumerate(self.nodes):
            node.table = {i: [None, False, 0.0] for i, _ in node.rows}
            node.owned_idle = [i for i, other in node.rows if other is None or v < other]
        self.n_finished = 0
        self.y = [0.0] * self.instance.n_cons
        self.done = [False] * self.instance.n_cons
        self.n_done = 0
        self.set_round = [None] * self.instance.n_cons
        self.finish_round = [None] * n
        self.cover_round = None

    def reported_rounds(self, comm_rounds):
        return -(-comm_rounds // SUBROUNDS)

    # --------------------------------------------------------------- helpers
    def _view(self, i):
        return self.instance.constraint(i)

    def _vals(self, node, v, view):
        return [node.x if j == v else node.nbr_x.get(j, 0.0) for j in view.vars]

    def _xmap(self, node, v, view):
        return {j: (node.x if j == v else node.nbr_x.get(j, 0.0)) for j in view.vars}

    def _step(self, xs, view, t):
        beta = stepsize_cmip(xs, view)
        if self.instance.is_fractional:
            ref = stepsize_fractional(xs, view)
            if not math.isclose(beta, ref, rel_tol=1e-12, abs_tol=1e-15):
                raise AssertionError(f"row {view.index}: step {beta} differs from closed form {ref}")
        step(xs, view, beta)
        self.record(StepRecord(view.index, beta, t))
        return beta

    # ----------------------------------------------------------------- rounds
    def on_round(self, ctx, inbox):
        node = self.nodes[ctx.node]
        v = ctx.node
        alg_round = self.reported_rounds(ctx.round)
        q = (ctx.round - 1) % SUBROUNDS
        if self.pack:
            self._absorb_pack(node, inbox)
        if not node.finished:
            if q == 0:
                if ctx.round == 1:
                    self._initialize(node, v)
                self._announce(ctx, node, inbox)
            elif q == 1:
                self._choose_star(ctx, node, v, inbox)
            else:
                self._root(ctx, node, v, inbox, alg_round)
        if self.pack:
            # a node finishes exactly when all of its rows are met
            node.allsat = node.finished
            self._try_pack(node, v, alg_round)
            self._flush_pack(ctx, node)
            if node.finished and all(e[1] for e in node.table.values()) and not node.outbox:
                node.retired = True
        if node.finished:
            ctx.halt()

    def _initialize(self, node, v):
        singles = [i for i, other in node.rows if other is None]
        ts = 0
        while True:
            unmet = [i for i in singles if not is_satisfied({v: node.x}, self._view(i))]
            if not unmet:
                break
            best = max(unmet, key=lambda i: (stepsize_cmip({v: node.x}, self._view(i)), -i))
            xs = {v: node.x}
            ts += 1
            self._step(xs, self._view(best), (1, ts))
            node.x = xs[v]
            self.publish(v, node.x)
            if self.pack:
                node.table[best][0] = (1, ts)
                node.outbox[best] = True
        if ts and self.pack:
            node.stars.append(self._star_order(node, [i for i in singles if node.table[i][0] is not None]))

    def _announce(self, ctx, node, inbox):
        for _, parts in inbox:
            for part in parts:
                if part[0] == "u":
                    _, xv, i, t = part
                    node.x = xv
                    if self.pack:
                        node.table[i][0] = tuple(t)
                        node.outbox[i] = True
        node.role = "leaf" if ctx.rng.coin() else "root"
        ctx.broadcast(("x", node.x, node.role))

    def _choose_star(self, ctx, node, v, inbox):
        roles = {}
        for sender, parts in inbox:
            for part in parts:
                if part[0] == "x":
                    node.nbr_x[sender] = part[1]
                    roles[sender] = part[2]
        unmet = []
        for i, other in node.rows:
            view = self._view(i)
            if not is_satisfied(self._xmap(node, v, view), view):
                unmet.append((i, other))
        if not unmet:
            node.finished = True
            self.n_finished += 1
            self.finish_round[v] = self.reported_rounds(ctx.round)
            return
        if node.role != "leaf":
            return
        active = []
        for i, other in unmet:
            if other is None or roles.get(other) != "root":
                continue
            view = self._view(i)
            if _can_hit(self._vals(node, v, view), view, view.vars.index(v)):
                active.append((i, other))
        if active:
            i, w = ctx.rng.choice(active)
            ctx.send(w, ("s", i))

    def _plan_heads(self, node, w, stars):
        """Simulate heads on a scratch copy; returns the rows it would step in order."""
        xs = {w: node.x}
        for v, _ in stars:
            xs[v] = node.nbr_x.get(v, 0.0)
        views = {i: self._view(i) for _, i in stars}
        start_phi = {i: phi(xs, views[i]) for _, i in stars}
        thresholds = {}
        for v, i in stars:
            view = views[i]
            pv, pw = view.vars.index(v), view.vars.index(w)
            thresholds[i] = leaf_threshold(view, pv, pw, [xs[j] for j in view.vars])
        order = sorted((i for _, i in stars), key=lambda i: (-thresholds[i], i))
        hit = set()
        plan = []
        for i in order:
            view = views[i]
            if i not in hit and xs[w] < thresholds[i] and not is_satisfied(xs, view):
                step(xs, view, stepsize_cmip(xs, view))
                plan.append(i)
                hit.update(k for k in order if k not in hit and phi(xs, views[k]) < start_phi[k])
                hit.add(i)
                continue
            runts = [k for k in order if k not in hit and not is_satisfied(xs, views[k])]
            if runts:
                runt = max(runts, key=lambda k: (stepsize_cmip(xs, views[k]), -k))
                plan.append(runt)
            break
        return plan

    def _root(self, ctx, node, w, inbox, alg_round):
        if node.role != "root":
            return
        stars = sorted((s, part[1]) for s, parts in inbox for part in parts if part[0] == "s")
        if not stars:
            return
        heads = ctx.rng.coin()
        plan = self._plan_heads(node, w, stars)
        if not heads:
            plan = plan[-1:]
        leaf_of = {i: v for v, i in stars}
        tr = alg_round + 1
        stepped = []
        for ts, i in enumerate(plan, start=1):
            view = self._view(i)
            v = leaf_of[i]
            xs = {v: node.nbr_x.get(v, 0.0), w: node.x}
            self._step(xs, view, (tr, ts))
            node.x = xs[w]
            node.nbr_x[v] = xs[v]
            self.publish(v, xs[v])
            self.publish(w, xs[w])
            ctx.send(v, ("u", xs[v], i, (tr, ts)))
            if self.pack:
                node.table[i][0] = (tr, ts)
                node.outbox[i] = True
            stepped.append(i)
        if self.pack and stepped:
            node.stars.append(self._star_order(node, stepped))

    # ---------------------------------------------------------------- packing
    @staticmethod
    def _star_order(node, rows):
        return sorted(rows, key=lambda i: node.table[i][0], reverse=True)

    def _absorb_pack(self, node, inbox):
        for sender, parts in inbox:
            for part in parts:
                if part[0] != "p":
                    continue
                _, allsat, entries = part
                if allsat:
                    node.nbr_allsat[sender] = True
                tab = node.nbr_tab.setdefault(sender, {})
                for i, t, done, y in entries:
                    t = None if t is None else tuple(t)
                    tab[i] = (t, done, y)
                    mine = node.table.get(i)
                    if mine is None:
                        continue
                    changed = False
                    if t is not None and mine[0] is None:
                        mine[0] = t
                        changed = True
                    if done and not mine[1]:
                        mine[1], mine[2] = True, y
                        changed = True
                    if changed:
                        node.outbox[i] = True

    def _column(self, node, v, u):
        """Known ``(time, done, y)`` for every row on variable ``u``."""
        if u == v:
            return {i: tuple(e) for i, e in node.table.items()}
        return node.nbr_tab.get(u, {})

    def _ready(self, node, v, i):
        view = self._view(i)
        for u in view.vars:
            if u == v:
                if not node.allsat:
                    return False
            elif not node.nbr_allsat.get(u):
                return False
        return True

    def _pack_one(self, node, v, i, alg_round):
        """Try to set ``y_i``; returns True when done."""
        if node.table[i][1]:
            return True
        if not self._ready(node, v, i):
            return False
        t = node.table[i][0]
        view = self._view(i)
        if t is not None:
            for u in view.vars:
                for k, (tk, dk, _) in self._column(node, v, u).items():
                    if k != i and tk is not None and tk > t and not dk:
                        return False
            cols = {}
            for u in view.vars:
                cols[u] = {k: yk for k, (_, dk, yk) in self._column(node, v, u).items() if dk}
            value = pack_value(self.instance, i, cols)
        else:
            value = 0.0
        node.table[i][1] = True
        node.table[i][2] = value
        node.outbox[i] = True
        self._set_y(i, value, alg_round)
        return True

    def _set_y(self, i, value, alg_round):
        if self.done[i]:
            raise AssertionError(f"y[{i}] set twice")
        self.y[i] = value
        self.done[i] = True
        self.n_done += 1
        self.set_round[i] = alg_round
        for j, _ in self.instance.cons_vars[i]:
            load = math.fsum(a * self.y[k] for k, a in self.instance.var_cons[j])
            if load > self.instance.costs[j] * (1 + 1e-9):
                raise AssertionError(f"packing constraint {j} exceeded after setting y[{i}]")

    def _try_pack(self, node, v, alg_round):
        for star in node.stars:
            for i in star:
                if not self._pack_one(node, v, i, alg_round):
                    break
        for i in node.owned_idle:
            if node.table[i][0] is None and not node.table[i][1]:
                self._pack_one(node, v, i, alg_round)

    def _flush_pack(self, ctx, node):
        if node.retired:
            return
        if node.outbox or (node.allsat and not node.told):
            entries = [(i, *node.table[i]) for i in sorted(node.outbox)]
            ctx.broadcast(("p", node.allsat, entries))
            node.outbox = {}
            node.told = node.allsat

    # --------------------------------------------------------------- observer
    def end_of_round(self, round_):
        if round_ % SUBROUNDS == 0 or self.is_done(round_):
            row = self.counter.row(self.reported_rounds(round_))
            if self.cover_round is None and row["satisfied"] == self.instance.n_cons:
                self.cover_round = row["round"]
            if self.pack:
                row["packed"] = self.n_done
            return row
        return None

    def is_done(self, round_):
        if self.pack:
            return self.n_done == self.instance.n_cons
        return self.n_finished == self.instance.n_vars

    def node_state(self, v):
        node = self.nodes[v]
        return (node.x, node.finished, tuple(sorted((i, tuple(e[:1]) + tuple(e[1:])) for i, e in node.table.items())))

