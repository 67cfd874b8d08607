"""Acceptance criteria A1-A11, one PASS/FAIL line each (see ``record``)."""

import math
import random
import statistics
import time

import pytest

from conftest import two_row_instance, record
from distcover.cover import is_satisfied, phi, sequential_cover, stepsize_cmip
from distcover.estimators import (
    DistributedCMIP2,
    DistributedPacking2,
    DistributedPackingGeneral,
    DistributedSubmodularCover,
    DistributedWeightedVertexCover,
    FractionalPacking,
)
from distcover.experiment import ExperimentSpec, run_experiment
from distcover.instances import gen_cmip, gen_cmip2, gen_fractional, gen_hypergraph_bmatching, gen_wvc
from distcover.oracles import distance_oracle, exact_bmatching, exact_vertex_cover
from distcover.poset import build_poset, random_linear_extension, sequential_pack

pytestmark = pytest.mark.acceptance

EXACT = 1e-12
CERT_TOL = 1e-6
INT_TOL = 1e-9
STEP_TOL = 1e-9
FAST_MS = 1.0

SEEDS = 30
WVC_SIZES = (64, 256, 1024, 4096)
CMIP2_SIZES = (64, 256, 1024, 4096)
CLUSTER_SIZES = (64, 256, 1024)


def best_ms(fn, repeat=50):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


class Audit:
    """Certificate (A5) and replay (A8) checks over every run in this module."""

    def __init__(self):
        self.runs = 0
        self.cert_runs = 0
        self.cert_bad = []
        self.replays = 0
        self.replay_bad = []

    def __call__(self, est, inst, label):
        self.runs += 1
        rep = est.report_
        if est.y_ is not None:
            self.cert_runs += 1
            ok = rep.covering_feasible and rep.packing_feasible and rep.cx <= rep.rho * rep.wy + CERT_TOL
            if not ok:
                self.cert_bad.append(label)
        if hasattr(est, "protocol_"):
            self.replays += 1
            rule = "wvc" if isinstance(est, DistributedWeightedVertexCover) else "phi"
            if sequential_cover(inst, order=est.step_log_, rule=rule).x_raw != est.x_raw_:
                self.replay_bad.append(label)
        return est


@pytest.fixture(scope="module")
def audit():
    return Audit()


def test_a1_worked_example(worked_example):
    res = sequential_cover(worked_example)
    view = worked_example.constraint(0)
    x = [0.0, 0.0]
    phis, betas = [phi(x, view)], []
    for rec in res.log:
        betas.append(rec.beta)
        x = [v + rec.beta / c for v, c in zip(x, worked_example.costs)]
        phis.append(phi(x, view))
    expected_beta = (5 / 3, 1 / 3, 2.0)
    ok = (
        phis == [8, 6, 4, 0]
        and len(betas) == 3
        and all(abs(b - e) <= EXACT for b, e in zip(betas, expected_beta))
        and res.x == [4.0, 1.0]
    )
    ms = best_ms(lambda: sequential_cover(worked_example))
    ok = ok and ms < FAST_MS
    record("A1", ok, f"phi={phis} beta={[round(b, 12) for b in betas]} x={res.x} best={ms:.3f}ms")
    assert ok


def test_a2_two_row_pair():
    results = []
    ok = True
    for demand, cost, y, wy in ((5.0, 10.0, [0.0, 1.0], 5.0), (0.0, 2.0, [1.0, 0.0], 1.0)):
        inst = two_row_instance(demand)
        for order in ([0, 1], [1, 0]):
            est = FractionalPacking(order=order).fit(inst)
            good = est.cost_ == cost and est.y_ == y and est.value_ == wy
            ok &= good
            results.append(f"({demand:g},{order}):c={est.cost_:g},y={est.y_}")
    ms = best_ms(lambda: FractionalPacking(order=[1, 0]).fit(two_row_instance(5.0)))
    ok = ok and ms < FAST_MS
    record("A2", ok, " ".join(results) + f" best={ms:.3f}ms")
    assert ok


def _scale(label, sizes, make_inst, make_est, audit):
    out = {}
    for n in sizes:
        rounds = []
        timeouts = 0
        for seed in range(SEEDS):
            inst = make_inst(n, seed)
            est = audit(make_est(seed).fit(inst), inst, f"{label}/{n}/{seed}")
            timeouts += not est.outcome_.terminated
            rounds.append(est.rounds_)
        out[n] = (statistics.median(rounds), max(rounds), timeouts)
    return out


def test_a3_round_scaling(audit):
    t0 = time.perf_counter()
    checks = []
    wvc = _scale("wvc", WVC_SIZES, lambda n, s: gen_wvc(n, 8.0 / (n - 1), seed=s), DistributedWeightedVertexCover, audit)
    for n, (med, top, to) in wvc.items():
        checks.append((f"wvc n={n} med={med} max={top}", to == 0 and top <= 448 * math.log(n) and med <= 20 * math.log(n)))
    cm2 = _scale("cmip2", CMIP2_SIZES, lambda m, s: gen_cmip2(m // 2, m, s), DistributedCMIP2, audit)
    for m, (med, top, to) in cm2.items():
        checks.append((f"cmip2 m={m} med={med}", to == 0 and med <= 30 * math.log(m)))
    sub = _scale("submod", CLUSTER_SIZES, lambda m, s: gen_cmip(m, m, 3, s), DistributedSubmodularCover, audit)
    pkg = _scale("packgen", CLUSTER_SIZES, lambda m, s: gen_fractional(m, m, 3, s), DistributedPackingGeneral, audit)
    for name, res in (("submod", sub), ("packgen", pkg)):
        for m, (med, top, to) in res.items():
            checks.append((f"{name} m={m} med={med}", to == 0 and med <= 40 * math.log(m) ** 2))
    secs = time.perf_counter() - t0
    ok = all(c for _, c in checks) and secs <= 600
    record("A3", ok, "; ".join(d for d, _ in checks) + f"; {secs:.0f}s")
    assert ok


def test_a4_against_exact_oracles(audit):
    t0 = time.perf_counter()
    bad = []
    count = 0
    rng = random.Random(4)
    for seed in range(100):
        n = rng.randint(4, 24)
        inst = gen_wvc(n, rng.uniform(0.1, 0.5), seed=seed)
        if inst.n_cons == 0:
            continue
        opt = exact_vertex_cover(inst).value
        est = audit(DistributedWeightedVertexCover(seed=seed).fit(inst), inst, f"a4-wvc/{seed}")
        count += 1
        if est.cost_ > 2 * opt + CERT_TOL:
            bad.append(f"wvc{seed}")
    for seed in range(120):
        rho = (2, 3, 4)[seed % 3]
        pk = gen_hypergraph_bmatching(rng.randint(4, 12), rng.randint(2, 20), rho, seed=seed)
        inst = pk.covering
        opt = exact_bmatching(pk).value
        ests = [DistributedPackingGeneral(seed=seed)]
        if inst.rho <= 2:
            ests.append(DistributedPacking2(seed=seed))
        for est in ests:
            audit(est.fit(inst), inst, f"a4-bm/{seed}")
            count += 1
            if est.value_ * inst.rho < opt - CERT_TOL or not est.report_.packing_feasible:
                bad.append(f"bm{seed}/{type(est).__name__}")
    secs = time.perf_counter() - t0
    ok = count >= 200 and not bad and secs <= 120
    record("A4", ok, f"{count} runs, violations={bad[:5]}, {secs:.1f}s")
    assert ok


def test_a6_integrality(audit):
    bad = []
    count = 0
    for seed in range(100):
        pk = gen_hypergraph_bmatching(8 + seed % 9, 6 + seed % 15, 2 + seed % 3, seed=seed)
        inst = pk.covering
        ests = [FractionalPacking(order="random", seed=seed), DistributedPackingGeneral(seed=seed)]
        if inst.rho <= 2:
            ests.append(DistributedPacking2(seed=seed))
        for est in ests:
            audit(est.fit(inst), inst, f"a6/{seed}")
            count += 1
            if any(abs(v - round(v)) > INT_TOL for v in est.y_):
                bad.append(seed)
    ok = not bad
    record("A6", ok, f"{count} packings on 100 instances, non-integral={bad[:5]}")
    assert ok


def test_a7_order_invariance(audit):
    bad = []
    for seed in range(60):
        rho = 2 + seed % 3
        inst = gen_fractional(6 + seed % 10, 8 + seed % 12, rho, seed)
        res = sequential_cover(inst, order="random", seed=seed, rule="fractional")
        poset = build_poset(res.log, inst)
        base = sequential_pack(inst, poset).y
        for e in range(10):
            if sequential_pack(inst, poset, random_linear_extension(poset, 1000 * seed + e)).y != base:
                bad.append(f"seq{seed}/{e}")
        ests = [DistributedPackingGeneral(seed=seed)]
        if rho == 2:
            ests.append(DistributedPacking2(seed=seed))
        for est in ests:
            audit(est.fit(inst), inst, f"a7/{seed}")
            if sequential_pack(inst, build_poset(est.step_log_, inst)).y != est.y_:
                bad.append(f"dist{seed}/{type(est).__name__}")
    ok = not bad
    record("A7", ok, f"60 instances x 10 extensions plus distributed runs, mismatches={bad[:5]}")
    assert ok


def test_a5_certificates(audit):
    ok = audit.cert_runs > 0 and not audit.cert_bad
    record("A5", ok, f"{audit.cert_runs} runs with a dual, violations={audit.cert_bad[:5]}")
    assert ok


def test_a8_replay(audit):
    ok = audit.replays > 0 and not audit.replay_bad
    record("A8", ok, f"{audit.replays} distributed runs replayed, mismatches={audit.replay_bad[:5]}")
    assert ok


def test_a9_stepsize_soundness():
    rng = random.Random(9)
    pairs = 0
    bad = 0
    seed = 0
    while pairs < 10_000:
        inst = gen_cmip(6, 8, rng.randint(1, 3), seed)
        seed += 1
        for view in inst.constraints():
            for _ in range(4):
                x = [rng.choice([0.0, float(rng.randint(0, 4)), rng.uniform(0, 4)]) for _ in range(inst.n_vars)]
                if is_satisfied(x, view):
                    continue
                pairs += 1
                if stepsize_cmip(x, view) > distance_oracle(x, view) + STEP_TOL:
                    bad += 1
    ok = bad == 0
    record("A9", ok, f"{pairs} unsatisfied (constraint, x) pairs, violations={bad}")
    assert ok


def test_a10_per_round_progress():
    fracs = []
    for seed in range(100):
        inst = gen_wvc(256, 8.0 / 255, seed=seed)
        est = DistributedWeightedVertexCover(seed=seed).fit(inst)
        m = inst.n_cons
        prev = 0
        for row in est.trace_:
            if prev < m:
                fracs.append((row["satisfied"] - prev) / (m - prev))
            prev = row["satisfied"]
    mean = statistics.fmean(fracs)
    ok = mean >= 1 / 224
    record("A10", ok, f"mean covered fraction per round {mean:.4f} over {len(fracs)} rounds (floor {1 / 224:.4f})")
    assert ok


def test_a11_determinism(tmp_path):
    specs = [
        ExperimentSpec("wvc", generator="wvc", gen_args={"n": 64, "edge_prob": 0.1}, seeds=tuple(range(5))),
        ExperimentSpec("pack-general", generator="fractional", gen_args={"n": 20, "m": 20, "rho": 3}, seeds=(0, 1, 2)),
        ExperimentSpec("cmip2", generator="cmip2", gen_args={"n": 20, "m": 40}, seeds=(0, 1), fmt="jsonl"),
    ]
    same = True
    files = 0
    for k, spec in enumerate(specs):
        trees = []
        for rep in ("a", "b"):
            spec.out = str(tmp_path / f"{k}{rep}")
            run_experiment(spec)
            trees.append({p.relative_to(spec.out): p.read_bytes() for p in sorted((tmp_path / f"{k}{rep}").rglob("*.*"))})
        files += len(trees[0])
        same &= trees[0] == trees[1] and len(trees[0]) > 1
    record("A11", same, f"{files} output files byte-identical across repeated runs")
    assert same
