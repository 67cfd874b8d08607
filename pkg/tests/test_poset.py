import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from distcover.cover import StepLog, StepRecord, sequential_cover
from distcover.instances import from_rows, gen_fractional, gen_hypergraph_bmatching
from distcover.poset import (
    DuplicateTimestampError,
    FeasibilityError,
    NotALinearExtensionError,
    RatioViolationError,
    build_poset,
    is_linear_extension,
    packing_slack,
    raise_maximally,
    random_linear_extension,
    sequential_pack,
    verify_ratio,
)

seeds = st.integers(0, 2**32 - 1)


def solve(inst, order="input", seed=None):
    res = sequential_cover(inst, order=order, seed=seed, rule="fractional")
    poset = build_poset(res.log, inst)
    return res, poset, sequential_pack(inst, poset)


def test_tight_pair_poset_order(tight_pair):
    log = StepLog([StepRecord(0, 1.0, 1), StepRecord(1, 4.0, 2)])
    poset = build_poset(log, tight_pair)
    assert poset.precedes(0, 1) and not poset.precedes(1, 0)


def test_disjoint_rows_incomparable():
    inst = from_rows([{0: 1.0}, {1: 1.0}], [1.0, 1.0], [1.0, 1.0])
    poset = build_poset(StepLog([StepRecord(0, 1.0, 1), StepRecord(1, 1.0, 2)]), inst)
    assert not poset.precedes(0, 1) and not poset.precedes(1, 0)


def test_empty_log(tight_pair):
    assert build_poset(StepLog(), tight_pair).nodes == []


def test_duplicate_time_on_shared_variable(tight_pair):
    log = StepLog([StepRecord(0, 1.0, (1, 1)), StepRecord(1, 4.0, (1, 1))])
    with pytest.raises(DuplicateTimestampError):
        build_poset(log, tight_pair)


def test_pair_times_are_lexicographic(tight_pair):
    log = StepLog([StepRecord(0, 1.0, (2, 1)), StepRecord(1, 4.0, (1, 7))])
    assert build_poset(log, tight_pair).precedes(1, 0)


@pytest.mark.parametrize("order", ["input", [1, 0]])
def test_tight_pair_packing(tight_pair, order):
    res, _, sol = solve(tight_pair, order)
    assert tight_pair.cost(res.x) == 10.0
    assert sol.y == [0.0, 1.0]
    assert tight_pair.value(sol.y) == 5.0


def test_loose_pair_packing(loose_pair):
    res, _, sol = solve(loose_pair)
    assert loose_pair.cost(res.x) == 2.0
    assert sol.y == [1.0, 0.0] and loose_pair.value(sol.y) == 1.0


def test_single_wvc_edge_tight_at_two():
    inst = from_rows([{0: 1.0, 1: 1.0}], [1.0], [3.0, 5.0])
    res, _, sol = solve(inst)
    assert sol.y == [3.0]
    assert inst.cost(res.x_raw) == 2 * 3.0


def test_raise_maximally_examples():
    inst = from_rows([{0: 1.0, 1: 1.0}], [1.0], [2.0, 3.0])
    assert raise_maximally([0.0], 0, inst) == 2.0
    tight = from_rows([{0: 1.0}, {0: 1.0}], [1.0, 1.0], [1.0])
    assert raise_maximally([1.0, 0.0], 1, tight) == 0.0


def test_raise_maximally_empty_column():
    inst = from_rows([{}], [0.0], [1.0])
    with pytest.raises(ValueError):
        raise_maximally([0.0], 0, inst)


def test_rejects_non_extension(tight_pair):
    poset = build_poset(StepLog([StepRecord(0, 1.0, 1), StepRecord(1, 4.0, 2)]), tight_pair)
    assert not is_linear_extension(poset, [1, 0])
    with pytest.raises(NotALinearExtensionError):
        sequential_pack(tight_pair, poset, [1, 0])


def test_verify_ratio_tight_pair(tight_pair):
    res, _, sol = solve(tight_pair)
    rep = verify_ratio(tight_pair, res.x, sol.y)
    assert (rep.cx, rep.wy, rep.ratio) == (10.0, 5.0, 2.0)


def test_verify_ratio_zero_instance():
    inst = from_rows([{0: 1.0}], [0.0], [1.0])
    rep = verify_ratio(inst, [0.0], [0.0])
    assert rep.cx == 0.0 and rep.wy == 0.0 and rep.ok


def test_verify_ratio_reports_violations(tight_pair):
    with pytest.raises(FeasibilityError) as err:
        verify_ratio(tight_pair, [0.0, 0.0, 0.0], [0.0, 0.0])
    assert err.value.index == 0
    with pytest.raises(FeasibilityError):
        verify_ratio(tight_pair, [5.0, 0.0, 0.0], [1.0, 1.0])
    with pytest.raises(RatioViolationError):
        verify_ratio(tight_pair, [5.0, 1.0, 1.0], [0.0, 0.0])


@given(seeds, st.integers(2, 4))
def test_extensions_give_identical_packing(seed, rho):
    inst = gen_fractional(10, 14, rho, seed)
    res, poset, base = solve(inst, "random", seed)
    rng = random.Random(seed)
    for _ in range(10):
        ext = random_linear_extension(poset, rng)
        assert is_linear_extension(poset, ext)
        assert sequential_pack(inst, poset, ext).y == base.y


@given(seeds, st.integers(2, 4))
def test_certificate_holds(seed, rho):
    inst = gen_fractional(10, 14, rho, seed)
    res, _, sol = solve(inst, "random", seed)
    rep = verify_ratio(inst, res.x, sol.y)
    assert rep.ok
    for j in range(inst.n_vars):
        assert packing_slack(sol.y, j, inst) >= -1e-9


@given(seeds, st.integers(2, 4))
def test_zero_one_packing_is_integral(seed, rho):
    inst = gen_hypergraph_bmatching(12, 16, rho, seed=seed).covering
    _, _, sol = solve(inst, "random", seed)
    assert all(abs(v - round(v)) <= 1e-9 for v in sol.y)


@given(seeds)
def test_weak_duality_against_sampled_covers(seed):
    inst = gen_fractional(6, 8, 3, seed)
    _, _, sol = solve(inst)
    rng = random.Random(seed)
    for _ in range(20):
        x = [rng.uniform(0, 10) for _ in range(inst.n_vars)]
        if verify_ratio(inst, x, strict=False).covering_feasible:
            assert inst.value(sol.y) <= inst.cost(x) + 1e-9


def test_never_stepped_rows_are_zero_and_done(tight_pair):
    _, poset, sol = solve(tight_pair, [1, 0])
    assert 0 not in poset
    assert sol.y[0] == 0.0 and sol.done == [True, True]


def test_solution_json(tight_pair):
    _, _, sol = solve(tight_pair)
    assert json.loads(sol.to_json(tight_pair))["value"] == 5.0
