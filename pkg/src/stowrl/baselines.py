"""Reference policies: random picks, k-step lookahead, and exact backtrack search.

All solvers share the environment's candidate rule (topmost matching
container per stack), which keeps the branching factor at the number of
stacks and makes their plans directly comparable with agent episodes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .model import (
    ContainerRef,
    ProblemInstance,
    ensure_feasible,
    fill_sequence,
)

DEFAULT_NODE_BUDGET = 50_000_000


@dataclass
class SolveResult:
    plan: list[ContainerRef]
    total_shuffles: int
    nodes_explored: int
    elapsed: float
    optimal: bool


def _candidates(stacks: list[list[int]], mask: int) -> list[tuple[int, int, int]]:
    """(cost, stack, tier) of the topmost match per stack, ascending stack."""
    out = []
    for si, stack in enumerate(stacks):
        for tier in range(len(stack) - 1, -1, -1):
            if stack[tier] == mask:
                out.append((len(stack) - 1 - tier, si, tier))
                break
    return out


def random_policy(problem: ProblemInstance, rng: np.random.Generator) -> SolveResult:
    """Pick uniformly among the matching candidates of every slot in turn."""
    ensure_feasible(problem)
    start = time.perf_counter()
    stacks = [list(stack) for stack in problem.yard.stacks]
    plan: list[ContainerRef] = []
    total = 0
    nodes = 0
    for _, mask in fill_sequence(problem.ship):
        cands = _candidates(stacks, mask)
        cost, si, tier = cands[int(rng.integers(len(cands)))]
        del stacks[si][tier]
        plan.append(ContainerRef(si, tier))
        total += cost
        nodes += 1
    return SolveResult(plan, total, nodes, time.perf_counter() - start, False)


def lookahead(problem: ProblemInstance, k: int) -> SolveResult:
    """Greedy solve scoring each candidate by its cost plus the cheapest
    completion of the next k slots; ties break on stack index, then tier."""
    if k < 0:
        raise ValueError(f"lookahead depth must be >= 0, got {k}")
    ensure_feasible(problem)
    start = time.perf_counter()
    fill = fill_sequence(problem.ship)
    stacks = [list(stack) for stack in problem.yard.stacks]
    nodes = 0

    def min_completion(pos: int, depth: int) -> int:
        nonlocal nodes
        if depth == 0 or pos == len(fill):
            return 0
        best = None
        for cost, si, tier in _candidates(stacks, fill[pos][1]):
            nodes += 1
            mask = stacks[si][tier]
            del stacks[si][tier]
            value = cost + min_completion(pos + 1, depth - 1)
            stacks[si].insert(tier, mask)
            if best is None or value < best:
                best = value
        return best

    plan: list[ContainerRef] = []
    total = 0
    for pos in range(len(fill)):
        best_key = None
        chosen = None
        for cost, si, tier in _candidates(stacks, fill[pos][1]):
            nodes += 1
            mask = stacks[si][tier]
            del stacks[si][tier]
            future = min_completion(pos + 1, k)
            stacks[si].insert(tier, mask)
            key = (cost + future, si, tier)
            if best_key is None or key < best_key:
                best_key = key
                chosen = (cost, si, tier)
        cost, si, tier = chosen
        del stacks[si][tier]
        plan.append(ContainerRef(si, tier))
        total += cost
    return SolveResult(plan, total, nodes, time.perf_counter() - start, False)


def exact_solve(
    problem: ProblemInstance, node_budget: int = DEFAULT_NODE_BUDGET
) -> SolveResult:
    """Depth-first branch and bound over the per-slot candidate choices.

    Children are expanded cheapest-first, so the first descent is the greedy
    plan and the incumbent tightens early. Any branch whose accumulated cost
    reaches the incumbent is cut. When the node budget runs out the best plan
    found so far is returned with optimal=False.
    """
    if node_budget < 1:
        raise ValueError(f"node budget must be >= 1, got {node_budget}")
    ensure_feasible(problem)
    start = time.perf_counter()
    masks = [mask for _, mask in fill_sequence(problem.ship)]
    stacks = [list(stack) for stack in problem.yard.stacks]
    n = len(masks)

    best_total = 0
    best_plan: list[ContainerRef] | None = None
    current: list[ContainerRef] = []
    nodes = 0
    out_of_budget = False

    def greedy_completion(depth: int, acc: int) -> tuple[list[ContainerRef], int]:
        suffix: list[ContainerRef] = []
        applied: list[tuple[int, int, int]] = []
        total = acc
        for d in range(depth, n):
            cost, si, tier = min(_candidates(stacks, masks[d]))
            applied.append((si, tier, stacks[si][tier]))
            del stacks[si][tier]
            suffix.append(ContainerRef(si, tier))
            total += cost
        for si, tier, mask in reversed(applied):
            stacks[si].insert(tier, mask)
        return suffix, total

    def descend(depth: int, acc: int) -> None:
        nonlocal best_total, best_plan, nodes, out_of_budget
        if best_plan is not None and acc >= best_total:
            return
        if depth == n:
            best_total = acc
            best_plan = current.copy()
            return
        cands = _candidates(stacks, masks[depth])
        cands.sort()
        for cost, si, tier in cands:
            if out_of_budget:
                return
            if best_plan is not None and acc + cost >= best_total:
                break  # candidates are cost-sorted: the rest prune too
            nodes += 1
            if nodes > node_budget:
                out_of_budget = True
                if best_plan is None:
                    # Budget died inside the first (greedy) descent; finish it
                    # so a valid plan is always returned.
                    suffix, total = greedy_completion(depth, acc)
                    best_plan = current + suffix
                    best_total = total
                return
            mask = stacks[si][tier]
            del stacks[si][tier]
            current.append(ContainerRef(si, tier))
            descend(depth + 1, acc + cost)
            current.pop()
            stacks[si].insert(tier, mask)

    descend(0, 0)
    assert best_plan is not None  # feasibility guarantees at least one plan
    return SolveResult(
        best_plan, best_total, nodes, time.perf_counter() - start, not out_of_budget
    )
