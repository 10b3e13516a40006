import json

import numpy as np
import pytest

from stowrl.model import (
    EMPTY,
    ContainerRef,
    FeasibilityError,
    InvalidReferenceError,
    MaskMismatchError,
    ProblemFormatError,
    ShipPlan,
    Yard,
    ensure_feasible,
    feasibility_deficits,
    load_problem,
    mask_of,
    matching_candidates,
    pick_container,
    plan_cost,
    problem_from_dict,
    problem_to_dict,
    save_problem,
    shuffle_count,
    uncovered_good,
)
from tests.conftest import make_problem


def test_mask_of_reads_positions():
    yard = Yard([[1, 2], [3]])
    assert mask_of(yard, ContainerRef(0, 0)) == 1
    assert mask_of(yard, ContainerRef(0, 1)) == 2
    assert mask_of(yard, ContainerRef(1, 0)) == 3


def test_mask_of_rejects_out_of_range():
    yard = Yard([[1]])
    with pytest.raises(InvalidReferenceError):
        mask_of(yard, ContainerRef(0, 1))
    with pytest.raises(InvalidReferenceError):
        mask_of(yard, ContainerRef(1, 0))
    with pytest.raises(InvalidReferenceError):
        mask_of(yard, ContainerRef(-1, 0))


def test_shuffle_count_counts_containers_above():
    yard = Yard([[5, 1, 1, 2]])
    assert shuffle_count(yard, ContainerRef(0, 3)) == 0  # top
    assert shuffle_count(yard, ContainerRef(0, 0)) == 3
    # a container with three above it costs three relocations
    deep = Yard([[4, 9, 9, 9]])
    assert shuffle_count(deep, ContainerRef(0, 0)) == 3


def test_shuffle_count_zero_iff_top():
    rng = np.random.default_rng(0)
    for _ in range(50):
        stacks = [
            [int(m) for m in rng.integers(1, 5, size=rng.integers(1, 6))]
            for _ in range(3)
        ]
        yard = Yard(stacks)
        for si, stack in enumerate(stacks):
            for tier in range(len(stack)):
                is_top = tier == len(stack) - 1
                assert (shuffle_count(yard, ContainerRef(si, tier)) == 0) == is_top


def test_matching_candidates_topmost_per_stack():
    assert matching_candidates(Yard([[1, 2], [1]]), 1) == [
        ContainerRef(0, 0),
        ContainerRef(1, 0),
    ]
    # two matches in one stack: only the higher tier is offered
    assert matching_candidates(Yard([[1, 1], [2]]), 1) == [ContainerRef(0, 1)]
    assert matching_candidates(Yard([[2], [3]]), 1) == []


def test_matching_candidates_properties(rng):
    for _ in range(100):
        stacks = [
            [int(m) for m in rng.integers(1, 4, size=rng.integers(0, 6))]
            for _ in range(4)
        ]
        yard = Yard(stacks)
        mask = int(rng.integers(1, 4))
        cands = matching_candidates(yard, mask)
        seen_stacks = [c.stack for c in cands]
        assert seen_stacks == sorted(set(seen_stacks))
        for c in cands:
            assert mask_of(yard, c) == mask
            above = stacks[c.stack][c.tier + 1 :]
            assert mask not in above  # maximal-tier match in its stack


def test_matching_candidates_rejects_empty_mask():
    with pytest.raises(ValueError):
        matching_candidates(Yard([[1]]), 0)


def test_pick_container_examples():
    yard, cost = pick_container(Yard([[1, 2, 3]]), ContainerRef(0, 2))
    assert (yard.stacks, cost) == ([[1, 2]], 0)
    yard, cost = pick_container(Yard([[1, 2, 3]]), ContainerRef(0, 0))
    assert (yard.stacks, cost) == ([[2, 3]], 2)
    yard, cost = pick_container(Yard([[1], [2]]), ContainerRef(1, 0))
    assert (yard.stacks, cost) == ([[1], []], 0)


def test_pick_container_value_semantics_and_conservation(rng):
    for _ in range(100):
        stacks = [
            [int(m) for m in rng.integers(1, 5, size=rng.integers(1, 6))]
            for _ in range(3)
        ]
        yard = Yard(stacks)
        before = yard.mask_counts()
        si = int(rng.integers(3))
        tier = int(rng.integers(len(stacks[si])))
        ref = ContainerRef(si, tier)
        picked_mask = mask_of(yard, ref)
        new_yard, cost = pick_container(yard, ref)
        assert yard.stacks == stacks  # input untouched
        assert new_yard.container_count() == yard.container_count() - 1
        after = new_yard.mask_counts()
        before[picked_mask] -= 1
        assert after == +before
        assert cost == shuffle_count(yard, ref)


def test_pick_lowers_shuffle_counts_below_only(rng):
    for _ in range(50):
        stacks = [
            [int(m) for m in rng.integers(1, 5, size=rng.integers(2, 6))]
            for _ in range(3)
        ]
        yard = Yard(stacks)
        si = int(rng.integers(3))
        tier = int(rng.integers(len(stacks[si]) - 1))  # ensure something above
        new_yard, cost = pick_container(yard, ContainerRef(si, tier))
        assert cost >= 1
        for below in range(tier):
            assert (
                shuffle_count(new_yard, ContainerRef(si, below))
                == shuffle_count(yard, ContainerRef(si, below)) - 1
            )
        for other in range(3):
            if other != si:
                assert new_yard.stacks[other] == yard.stacks[other]


def test_uncovered_good_counts_matches_below():
    assert uncovered_good(Yard([[4, 4, 9]]), ContainerRef(0, 0), [4, 4]) == 0
    assert uncovered_good(Yard([[4, 4, 9]]), ContainerRef(0, 2), [4, 4]) == 2
    # count is capped even when more useful containers sit below
    tall = Yard([[4, 4, 4, 4, 4, 4, 4]])
    assert uncovered_good(tall, ContainerRef(0, 6), [4] * 6) == 6
    assert uncovered_good(Yard([[4, 5, 9]]), ContainerRef(0, 2), [4]) == 1
    assert uncovered_good(Yard([[4, 5, 9]]), ContainerRef(0, 2), [7]) == 0


def test_plan_cost_replays_picks():
    p = make_problem([1], [[1, 2]])
    # the only mask-1 container sits under one other container
    assert plan_cost(p, [ContainerRef(0, 0)]) == 1
    p = make_problem([1, 1], [[1, 2, 1]])
    assert plan_cost(p, [ContainerRef(0, 2), ContainerRef(0, 0)]) == 0 + 1
    p = make_problem([1], [[2]])
    with pytest.raises(MaskMismatchError):
        plan_cost(p, [ContainerRef(0, 0)])


def test_plan_cost_length_check():
    p = make_problem([1, 0, 1], [[1, 1]])
    with pytest.raises(ValueError):
        plan_cost(p, [ContainerRef(0, 1)])


def test_plan_cost_mask_relabel_invariance(rng):
    from stowrl.baselines import lookahead

    for _ in range(20):
        stacks = [
            [int(m) for m in rng.integers(1, 4, size=rng.integers(1, 4))]
            for _ in range(3)
        ]
        yard = Yard(stacks)
        counts = yard.mask_counts()
        slots = []
        for m, c in counts.items():
            slots.extend([m] * min(c, 2))
        p = make_problem(slots, stacks)
        plan = lookahead(p, 0).plan
        base = plan_cost(p, plan)
        perm = {1: 3, 2: 1, 3: 2}
        relabeled = make_problem(
            [perm.get(m, 0) for m in slots],
            [[perm[m] for m in s] for s in stacks],
        )
        assert plan_cost(relabeled, plan) == base


def test_feasibility_checks():
    ok = make_problem([1, 0, 2], [[2, 1]])
    ensure_feasible(ok)
    broken = make_problem([1, 1, 3], [[1], [2]])
    deficits = feasibility_deficits(broken)
    assert deficits == {1: 1, 3: 1}
    with pytest.raises(FeasibilityError) as err:
        ensure_feasible(broken)
    assert err.value.deficits == {1: 1, 3: 1}


def test_yard_validation():
    with pytest.raises(ValueError):
        Yard([[1, 1, 1]], max_height=2)
    with pytest.raises(ValueError):
        Yard([[0]])
    with pytest.raises(ValueError):
        ShipPlan([1, -2])


def test_problem_file_round_trip(tmp_path):
    p = make_problem([1, 0, 2, 2], [[2, 1], [2]], problem_id="roundtrip")
    path = tmp_path / "p.json"
    save_problem(p, path)
    again = load_problem(path)
    assert problem_to_dict(again) == problem_to_dict(p)
    # byte-identical re-serialization
    save_problem(again, tmp_path / "q.json")
    assert (tmp_path / "q.json").read_bytes() == path.read_bytes()


def test_problem_file_rejects_bad_versions_and_masks(tmp_path):
    doc = problem_to_dict(make_problem([1], [[1]]))
    bad = dict(doc, version=2)
    with pytest.raises(ProblemFormatError):
        problem_from_dict(bad)
    bad = dict(doc, slots=[-1])
    with pytest.raises(ProblemFormatError):
        problem_from_dict(bad)
    bad = dict(doc, yard=[[0]])
    with pytest.raises(ProblemFormatError):
        problem_from_dict(bad)
    bad = dict(doc, yard=[[1] * 99])
    with pytest.raises(ProblemFormatError):
        problem_from_dict(bad)
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ProblemFormatError):
        load_problem(path)
