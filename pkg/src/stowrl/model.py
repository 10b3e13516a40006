"""Domain model: ship slots, yard stacks, mask matching, and shuffle accounting.

A problem instance pairs an ordered list of ship slots with a yard of
container stacks. Slots are filled strictly in index order, and a container
may only fill a slot carrying the same mask-id. Picking a container that is
not on top of its stack costs one shuffle per container above it; containers
that had to be lifted are restacked onto the same stack in their original
order, so every pick simply removes one element from a stack.

All operations here are pure: yard mutations return new yards.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

EMPTY = 0  # mask-id reserved for filled/skip slots and consumed containers

DEFAULT_MAX_STACK_HEIGHT = 7
PROBLEM_FILE_VERSION = 1

# Ceiling on the "uncovered good containers" count; with stacks capped at 7
# there can be at most 6 containers below a pick.
UNCOVER_CAP = 6


class InvalidReferenceError(IndexError):
    """A container reference points outside the yard."""


class MaskMismatchError(ValueError):
    """A planned pick does not carry the mask-id its slot requires."""


class FeasibilityError(ValueError):
    """The yard cannot supply every slot; carries the deficient mask-ids."""

    def __init__(self, deficits: dict[int, int]):
        self.deficits = dict(deficits)
        short = ", ".join(f"mask {m} short by {n}" for m, n in sorted(deficits.items()))
        super().__init__(f"infeasible problem: {short}")


class ProblemFormatError(ValueError):
    """A problem file violates the documented on-disk format."""


class ContainerRef(NamedTuple):
    """Position of a container in the yard (tier 0 is the bottom)."""

    stack: int
    tier: int


@dataclass
class Yard:
    """Ordered container stacks; each stack lists mask-ids bottom to top."""

    stacks: list[list[int]]
    max_height: int = DEFAULT_MAX_STACK_HEIGHT

    def __post_init__(self):
        if self.max_height < 1:
            raise ValueError(f"max_height must be >= 1, got {self.max_height}")
        for si, stack in enumerate(self.stacks):
            if len(stack) > self.max_height:
                raise ValueError(
                    f"stack {si} has {len(stack)} containers, max height is {self.max_height}"
                )
            for mask in stack:
                if mask < 1:
                    raise ValueError(f"stack {si} holds invalid mask-id {mask}")

    def container_count(self) -> int:
        return sum(len(stack) for stack in self.stacks)

    def mask_counts(self) -> Counter:
        return Counter(mask for stack in self.stacks for mask in stack)

    def copy(self) -> "Yard":
        return Yard([list(stack) for stack in self.stacks], self.max_height)


@dataclass
class ShipPlan:
    """Slot mask-ids in loading order; EMPTY slots are skipped."""

    slots: list[int]

    def __post_init__(self):
        for i, mask in enumerate(self.slots):
            if mask < 0:
                raise ValueError(f"slot {i} has negative mask-id {mask}")

    def fill_indices(self) -> list[int]:
        return [i for i, mask in enumerate(self.slots) if mask != EMPTY]

    def fill_count(self) -> int:
        return sum(1 for mask in self.slots if mask != EMPTY)

    def mask_counts(self) -> Counter:
        return Counter(mask for mask in self.slots if mask != EMPTY)

    def copy(self) -> "ShipPlan":
        return ShipPlan(list(self.slots))


@dataclass
class ProblemInstance:
    id: str
    ship: ShipPlan
    yard: Yard

    def copy(self) -> "ProblemInstance":
        return ProblemInstance(self.id, self.ship.copy(), self.yard.copy())


def _check_ref(yard: Yard, ref: ContainerRef) -> None:
    stack, tier = ref
    if not (0 <= stack < len(yard.stacks)) or not (0 <= tier < len(yard.stacks[stack])):
        raise InvalidReferenceError(f"reference {ref!r} outside yard")


def mask_of(yard: Yard, ref: ContainerRef) -> int:
    """Mask-id stored at a yard position."""
    _check_ref(yard, ref)
    return yard.stacks[ref.stack][ref.tier]


def shuffle_count(yard: Yard, ref: ContainerRef) -> int:
    """Number of containers currently stacked above the referenced one."""
    _check_ref(yard, ref)
    return len(yard.stacks[ref.stack]) - 1 - ref.tier


def matching_candidates(yard: Yard, slot_mask: int) -> list[ContainerRef]:
    """Topmost container with the given mask in each stack, ascending stack index.

    At most one candidate per stack; stacks without a match contribute nothing.
    """
    if slot_mask < 1:
        raise ValueError(f"slot mask must be >= 1, got {slot_mask}")
    out = []
    for si, stack in enumerate(yard.stacks):
        for tier in range(len(stack) - 1, -1, -1):
            if stack[tier] == slot_mask:
                out.append(ContainerRef(si, tier))
                break
    return out


def pick_container(yard: Yard, ref: ContainerRef) -> tuple[Yard, int]:
    """Remove a container, restacking anything above it in place.

    Returns the new yard and the shuffle cost of the pick (the number of
    containers that had to be lifted). The input yard is left untouched.
    """
    cost = shuffle_count(yard, ref)
    stacks = [list(stack) for stack in yard.stacks]
    del stacks[ref.stack][ref.tier]
    return Yard(stacks, yard.max_height), cost


def uncovered_good(yard: Yard, ref: ContainerRef, remaining: Iterable[int]) -> int:
    """Count useful containers below a pick, capped at UNCOVER_CAP.

    A container below the pick counts when its mask-id matches some
    still-upcoming slot: picking above it lowers its future shuffle cost.
    """
    _check_ref(yard, ref)
    wanted = set(remaining)
    stack = yard.stacks[ref.stack]
    n = sum(1 for tier in range(ref.tier) if stack[tier] in wanted)
    return min(n, UNCOVER_CAP)


def fill_sequence(ship: ShipPlan) -> list[tuple[int, int]]:
    """(slot index, mask-id) pairs for the slots that need filling, in order."""
    return [(i, mask) for i, mask in enumerate(ship.slots) if mask != EMPTY]


def remaining_fill_masks(ship: ShipPlan, after_index: int) -> list[int]:
    """Mask-ids of unfilled slots strictly after the given slot index."""
    return [
        mask
        for i, mask in enumerate(ship.slots)
        if i > after_index and mask != EMPTY
    ]


def plan_cost(problem: ProblemInstance, plan: list[ContainerRef]) -> int:
    """Total shuffle count of replaying a pick sequence against the problem."""
    fill = fill_sequence(problem.ship)
    if len(plan) != len(fill):
        raise ValueError(
            f"plan has {len(plan)} picks but the ship needs {len(fill)} fills"
        )
    yard = problem.yard
    total = 0
    for step, (ref, (slot_idx, slot_mask)) in enumerate(zip(plan, fill)):
        got = mask_of(yard, ref)
        if got != slot_mask:
            raise MaskMismatchError(
                f"step {step}: slot {slot_idx} needs mask {slot_mask}, "
                f"pick {tuple(ref)} carries mask {got}"
            )
        yard, cost = pick_container(yard, ref)
        total += cost
    return total


def feasibility_deficits(problem: ProblemInstance) -> dict[int, int]:
    """Per-mask shortfall of yard supply versus slot demand (empty when feasible)."""
    demand = problem.ship.mask_counts()
    supply = problem.yard.mask_counts()
    return {
        mask: need - supply.get(mask, 0)
        for mask, need in demand.items()
        if supply.get(mask, 0) < need
    }


def ensure_feasible(problem: ProblemInstance) -> None:
    deficits = feasibility_deficits(problem)
    if deficits:
        raise FeasibilityError(deficits)


# ---------------------------------------------------------------------------
# Problem files: version 1, JSON with fields version/id/slots/yard/max_stack_height.


def problem_to_dict(problem: ProblemInstance) -> dict:
    return {
        "version": PROBLEM_FILE_VERSION,
        "id": problem.id,
        "slots": list(problem.ship.slots),
        "yard": [list(stack) for stack in problem.yard.stacks],
        "max_stack_height": problem.yard.max_height,
    }


def _require_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProblemFormatError(f"{what} must be an integer, got {value!r}")
    return value


def problem_from_dict(doc: dict) -> ProblemInstance:
    if not isinstance(doc, dict):
        raise ProblemFormatError("problem document must be a mapping")
    version = _require_int(doc.get("version"), "version")
    if version != PROBLEM_FILE_VERSION:
        raise ProblemFormatError(
            f"unknown problem file version {version}, expected {PROBLEM_FILE_VERSION}"
        )
    problem_id = doc.get("id")
    if not isinstance(problem_id, str):
        raise ProblemFormatError("id must be a string")
    slots_raw = doc.get("slots")
    if not isinstance(slots_raw, list):
        raise ProblemFormatError("slots must be an array of integers")
    slots = []
    for i, mask in enumerate(slots_raw):
        mask = _require_int(mask, f"slot {i}")
        if mask < 0:
            raise ProblemFormatError(f"slot {i} has negative mask-id {mask}")
        slots.append(mask)
    yard_raw = doc.get("yard")
    if not isinstance(yard_raw, list):
        raise ProblemFormatError("yard must be an array of stacks")
    stacks = []
    for si, stack_raw in enumerate(yard_raw):
        if not isinstance(stack_raw, list):
            raise ProblemFormatError(f"yard stack {si} must be an array")
        stack = []
        for ti, mask in enumerate(stack_raw):
            mask = _require_int(mask, f"yard container ({si},{ti})")
            if mask < 1:
                raise ProblemFormatError(
                    f"yard container ({si},{ti}) has invalid mask-id {mask}"
                )
            stack.append(mask)
        stacks.append(stack)
    max_height = _require_int(
        doc.get("max_stack_height", DEFAULT_MAX_STACK_HEIGHT), "max_stack_height"
    )
    try:
        yard = Yard(stacks, max_height)
    except ValueError as exc:
        raise ProblemFormatError(str(exc)) from exc
    return ProblemInstance(problem_id, ShipPlan(slots), yard)


def dump_problem(problem: ProblemInstance) -> str:
    return json.dumps(problem_to_dict(problem), sort_keys=True) + "\n"


def save_problem(problem: ProblemInstance, path) -> None:
    Path(path).write_text(dump_problem(problem), encoding="utf-8")


def load_problem(path) -> ProblemInstance:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{path}: not valid JSON ({exc})") from exc
    return problem_from_dict(doc)
