"""Batch runs: one algorithm over seeds, with a summary table and per-run traces."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .estimators import (
    DistributedCMIP2,
    DistributedPacking2,
    DistributedPackingGeneral,
    DistributedSubmodularCover,
    DistributedWeightedVertexCover,
    FractionalPacking,
    SequentialCover,
)
from .instances import (
    PackingInstance,
    gen_cmip,
    gen_cmip2,
    gen_fractional,
    gen_hypergraph_bmatching,
    gen_wvc,
    read_instance,
)

__all__ = [
    "ALGORITHMS",
    "COLUMNS",
    "GENERATORS",
    "ExperimentSpec",
    "IncompatibleAlgorithmError",
    "RunReport",
    "ScalingRow",
    "check_compatible",
    "make_estimator",
    "run_experiment",
    "run_one",
    "scaling_table",
]

COLUMNS = ("algo", "n_vars", "n_cons", "rho", "seed", "rounds", "cost_x", "value_y", "ratio", "feasible", "wall_ms")

ALGORITHMS = {
    "seq-cover": lambda seed, max_rounds, **kw: SequentialCover(**kw),
    "seq-pack": lambda seed, max_rounds, **kw: FractionalPacking(**kw),
    "wvc": lambda seed, max_rounds, **kw: DistributedWeightedVertexCover(seed, max_rounds, **kw),
    "cmip2": lambda seed, max_rounds, **kw: DistributedCMIP2(seed, max_rounds, **kw),
    "submod-cover": lambda seed, max_rounds, **kw: DistributedSubmodularCover(seed, max_rounds, **kw),
    "pack2": lambda seed, max_rounds, **kw: DistributedPacking2(seed, max_rounds, **kw),
    "pack-general": lambda seed, max_rounds, **kw: DistributedPackingGeneral(seed, max_rounds, **kw),
}

GENERATORS = {
    "wvc": gen_wvc,
    "cmip": gen_cmip,
    "cmip2": gen_cmip2,
    "fractional": gen_fractional,
    "bmatching": gen_hypergraph_bmatching,
}

RATIO_TOL = 1e-6


class IncompatibleAlgorithmError(ValueError):
    pass


def _is_vc(inst):
    return all(v.arity == 2 and v.coefs == (1.0, 1.0) and v.demand == 1.0 for v in inst.constraints())


def check_compatible(algo, inst):
    """Raise :class:`IncompatibleAlgorithmError` if ``algo`` cannot run on ``inst``."""
    if algo not in ALGORITHMS:
        raise IncompatibleAlgorithmError(f"unknown algorithm {algo!r}")
    problems = []
    if algo == "wvc" and not _is_vc(inst):
        problems.append("wvc needs rows of the form x_u + x_w >= 1")
    if algo in ("cmip2", "pack2") and inst.rho > 2:
        problems.append(f"{algo} needs rows with at most 2 variables (rho is {inst.rho})")
    if algo in ("seq-pack", "pack2", "pack-general") and not inst.is_fractional:
        problems.append(f"{algo} needs a fractional instance (no integer variables, no upper bounds)")
    if problems:
        raise IncompatibleAlgorithmError("; ".join(problems))


def make_estimator(algo, seed=0, max_rounds=None, **params):
    return ALGORITHMS[algo](seed, max_rounds, **params)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_one(algo, inst, seed, max_rounds=None, timing=False, **params):
    """Fit one estimator; returns ``(row, trace)`` where ``trace`` may be ``None``."""
    check_compatible(algo, inst)
    est = make_estimator(algo, seed, max_rounds, **params)
    t0 = time.perf_counter()
    est.fit(inst)
    wall = (time.perf_counter() - t0) * 1000.0
    rep = est.report_
    terminated = getattr(est, "outcome_", None) is None or est.outcome_.terminated
    feasible = rep.covering_feasible and rep.packing_feasible and terminated
    within = rep.ratio is None or rep.ratio <= rep.rho + RATIO_TOL
    row = {
        "algo": algo,
        "n_vars": inst.n_vars,
        "n_cons": inst.n_cons,
        "rho": rep.rho,
        "seed": seed,
        "rounds": est.rounds_,
        "cost_x": rep.cx,
        "value_y": rep.wy,
        "ratio": rep.ratio,
        "feasible": feasible,
        "wall_ms": round(wall, 3) if timing else None,
        "_ok": feasible and within and rep.ok,
    }
    return row, getattr(est, "trace_", None)


@dataclass
class ExperimentSpec:
    algo: str
    instance: str | None = None
    generator: str | None = None
    gen_args: dict = field(default_factory=dict)
    seeds: tuple = (0,)
    max_rounds: int | None = None
    out: str | None = None
    fmt: str = "csv"
    timing: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise IncompatibleAlgorithmError(f"unknown algorithm {self.algo!r}")
        if (self.instance is None) == (self.generator is None):
            raise ValueError("give exactly one of an instance file or a generator")
        if self.generator is not None and self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.fmt not in ("csv", "jsonl"):
            raise ValueError("format must be csv or jsonl")

    def instance_for(self, seed):
        if self.instance is not None:
            inst = read_instance(Path(self.instance).read_bytes())
        else:
            args = dict(self.gen_args)
            args.setdefault("seed", seed)
            inst = GENERATORS[self.generator](**args)
        return inst.covering if isinstance(inst, PackingInstance) else inst


class RunReport(NamedTuple):
    rows: list
    ok: bool
    summary: str


def render(rows, fmt="csv"):
    """Serialize run rows (internal keys dropped) deterministically."""
    if fmt == "jsonl":
        return "".join(json.dumps({k: r[k] for k in COLUMNS}, separators=(",", ":")) + "\n" for r in rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in COLUMNS])
    return buf.getvalue()


def run_experiment(spec):
    """Run every seed; write the summary and traces when ``spec.out`` is set.

    Returns a :class:`RunReport`; ``ok`` is false if any run is infeasible,
    timed out, or exceeds its approximation ratio.
    """
    rows = []
    traces = {}
    cache = None
    for seed in spec.seeds:
        if spec.instance is not None:
            if cache is None:
                cache = spec.instance_for(seed)
            inst = cache
        else:
            inst = spec.instance_for(seed)
        row, trace = run_one(spec.algo, inst, seed, spec.max_rounds, spec.timing, **spec.params)
        rows.append(row)
        if trace is not None:
            traces[seed] = trace
    rows.sort(key=lambda r: (r["n_vars"], r["n_cons"], r["seed"]))
    text = render(rows, spec.fmt)
    if spec.out is not None:
        out = Path(spec.out)
        (out / "traces").mkdir(parents=True, exist_ok=True)
        (out / f"runs.{spec.fmt}").write_text(text)
        for seed, trace in sorted(traces.items()):
            (out / "traces" / f"{spec.algo}-seed{seed}.jsonl").write_text(trace.to_jsonl())
    return RunReport(rows, all(r["_ok"] for r in rows), text)


class ScalingRow(NamedTuple):
    n: int
    median_rounds: float
    max_rounds: int
    median_over_ln: float
    median_over_ln2: float
    timeouts: int


def _default_generator(algo):
    if algo == "wvc":
        return lambda n, seed: gen_wvc(n, min(1.0, 8.0 / max(1, n - 1)), seed=seed)
    if algo in ("cmip2", "pack2"):
        if algo == "pack2":
            return lambda m, seed: gen_fractional(max(2, m // 2), m, 2, seed)
        return lambda m, seed: gen_cmip2(max(2, m // 2), m, seed)
    if algo == "pack-general":
        return lambda m, seed: gen_fractional(m, m, 3, seed)
    return lambda m, seed: gen_cmip(m, m, 3, seed)


def scaling_table(algo, sizes, seeds_per_size, params=None, generator=None, max_rounds=None):
    """Round statistics per size: median, max, and the median over ``ln n`` and ``ln^2 n``.

    ``generator(size, seed)`` builds the instance; the default depends on the
    algorithm (vertex cover graphs of expected degree 8, two-variable rows
    with ``n = m / 2``, or width-3 rows with ``n = m``).
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    gen = generator or _default_generator(algo)
    table = []
    for n in sizes:
        rounds = []
        timeouts = 0
        for seed in range(seeds_per_size):
            est = make_estimator(algo, seed, max_rounds, **(params or {}))
            est.fit(gen(n, seed))
            rounds.append(est.rounds_)
            outcome = getattr(est, "outcome_", None)
            timeouts += outcome is not None and not outcome.terminated
        med = statistics.median(rounds)
        ln = math.log(n)
        table.append(ScalingRow(n, med, max(rounds), med / ln, med / ln**2, timeouts))
    return table
