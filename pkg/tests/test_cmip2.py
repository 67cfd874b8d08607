import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distcover.cover import is_satisfied, phi, sequential_cover
from distcover.estimators import DistributedCMIP2, DistributedPacking2
from distcover.instances import from_rows, gen_cmip, gen_cmip2, gen_fractional, gen_hypergraph_bmatching
from distcover.poset import build_poset, random_linear_extension, sequential_pack
from distcover.protocols import CMIP2Protocol, leaf_threshold
from distcover.protocols.cmip2 import _can_hit

seeds = st.integers(0, 10**6)


def test_rejects_wide_rows():
    with pytest.raises(ValueError):
        CMIP2Protocol(gen_cmip(6, 6, 3, seed=0) if gen_cmip(6, 6, 3, seed=0).rho > 2 else gen_cmip(6, 6, 3, seed=1))


def test_packing_needs_fractional_rows():
    with pytest.raises(ValueError):
        CMIP2Protocol(gen_cmip2(6, 6, seed=0, integer_prob=1.0), pack=True)


@settings(max_examples=200)
@given(seeds, st.sampled_from([(0, 1), (1, 0)]))
def test_leaf_threshold_against_grid(seed, positions):
    pv, pw = positions
    inst = gen_cmip2(3, 4, seed, single_prob=0.0)
    rng = random.Random(seed)
    for view in inst.constraints():
        vals = [rng.choice([0.0, rng.uniform(0, 2), float(rng.randint(0, 2))]) for _ in range(2)]
        xs = dict(zip(view.vars, vals))
        if is_satisfied(xs, view) or not _can_hit(vals, view, pv):
            continue
        t = leaf_threshold(view, pv, pw, vals)
        x0 = vals[pw]
        start = phi(xs, view)
        top = t if t != math.inf else x0 + 10
        # below the threshold the leaf can still hit and the row is not yet hit
        for f in (0.0, 0.25, 0.5, 0.75, 0.999):
            xp = x0 + f * (top - x0)
            if xp >= t:
                continue
            probe = list(vals)
            probe[pw] = xp
            assert _can_hit(probe, view, pv)
            assert phi(dict(zip(view.vars, probe)), view) == start
        # just past it, the row is hit or the leaf has lost it
        if t != math.inf:
            probe = list(vals)
            probe[pw] = t + 1e-7 * max(1.0, t)
            hit = phi(dict(zip(view.vars, probe)), view) < start
            assert hit or not _can_hit(probe, view, pv)


@settings(max_examples=25)
@given(seeds, st.integers(4, 30))
def test_cover_is_feasible_and_replays(seed, n):
    inst = gen_cmip2(n, 2 * n, seed)
    est = DistributedCMIP2(seed=seed).fit(inst)
    assert est.outcome_.terminated and est.report_.covering_feasible
    assert sequential_cover(inst, order=est.step_log_).x_raw == est.x_raw_


@settings(max_examples=25)
@given(seeds, st.integers(4, 30))
def test_packing_matches_sequential_reconstruction(seed, n):
    inst = gen_fractional(n, 2 * n, 2, seed)
    est = DistributedPacking2(seed=seed).fit(inst)
    assert est.report_.ok
    poset = build_poset(est.step_log_, inst)
    assert sequential_pack(inst, poset).y == est.y_
    ext = random_linear_extension(poset, seed)
    assert sequential_pack(inst, poset, ext).y == est.y_


@settings(max_examples=20)
@given(seeds)
def test_packing_latency(seed):
    inst = gen_fractional(20, 40, 2, seed)
    est = DistributedPacking2(seed=seed).fit(inst)
    T = est.cover_round_
    times = {r.cons: r.t for r in est.step_log_}
    for i, set_at in enumerate(est.set_round_):
        assert set_at is not None
        if i in times:
            t = T - (times[i][0] - 1)
            assert set_at <= T + t + 1


def test_never_stepped_row_gets_zero():
    # the second row is already met once the first is stepped
    inst = from_rows([{0: 1.0, 1: 1.0}, {0: 1.0, 1: 1.0}], [2.0, 1.0], [1.0, 1.0])
    for seed in range(10):
        est = DistributedPacking2(seed=seed).fit(inst)
        stepped = {r.cons for r in est.step_log_}
        for i in range(2):
            if i not in stepped:
                assert est.y_[i] == 0.0


def test_tight_pair_forced_order(tight_pair):
    found = False
    for seed in range(200):
        est = DistributedPacking2(seed=seed).fit(tight_pair)
        if [r.cons for r in est.step_log_] == [0, 1]:
            found = True
            assert est.y_ == [0.0, 1.0]
            assert tight_pair.value(est.y_) == 5.0
            assert est.cost_ == 10.0 and est.ratio_ == 2.0
    assert found


def test_bmatching_duals_are_integral():
    for seed in range(10):
        inst = gen_hypergraph_bmatching(16, 24, 2, seed=seed).covering
        est = DistributedPacking2(seed=seed).fit(inst)
        assert all(v == round(v) for v in est.y_)


def test_initialization_steps_single_rows():
    inst = from_rows([{0: 2.0}, {0: 1.0}], [4.0, 3.0], [1.0])
    est = DistributedCMIP2(seed=0).fit(inst)
    assert est.x_ == [3.0]
    assert all(r.t[0] == 1 for r in est.step_log_)


def test_threshold_breakpoints_closer_than_float_resolution():
    # this seed produces two threshold breakpoints one ulp apart
    inst = gen_cmip2(512, 1024, 8)
    est = DistributedCMIP2(seed=8).fit(inst)
    assert est.report_.covering_feasible
