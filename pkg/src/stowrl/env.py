"""Episodic accept/reject loading environment.

Each episode walks the ship's non-empty slots in order. For the current slot
the environment proposes one matching container drawn uniformly at random
from the topmost matches; the agent either agrees (the container is picked
and its shuffle cost paid) or disagrees (the proposal joins the rejected set
and another candidate is drawn). Once every candidate for a slot has been
rejected, the environment overrides the agent and loads the last rejected
candidate at zero intermediate reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    EMPTY,
    ContainerRef,
    ProblemInstance,
    ShipPlan,
    Yard,
    ensure_feasible,
    matching_candidates,
    pick_container,
    remaining_fill_masks,
    shuffle_count,
    uncovered_good,
)

AGREE = 0
DISAGREE = 1

REWARD_DELAYED_ONLY = "delayed_only"
REWARD_INTERMEDIATE_AND_DELAYED = "intermediate_and_delayed"
REWARD_MODES = (REWARD_DELAYED_ONLY, REWARD_INTERMEDIATE_AND_DELAYED)

THETA0_LOOKAHEAD_PLUS_1 = "lookahead0_plus_1"
THETA0_CONSTANT = "constant"
THETA0_RULES = (THETA0_LOOKAHEAD_PLUS_1, THETA0_CONSTANT)


class EpisodeFinishedError(RuntimeError):
    """step() was called on a finished episode."""


@dataclass
class EnvConfig:
    gamma: float = 0.99
    theta0_rule: str = THETA0_LOOKAHEAD_PLUS_1
    theta0_value: float = 0.0
    reward_mode: str = REWARD_INTERMEDIATE_AND_DELAYED
    rng_seed: int = 0
    # Normalization divisor for mask-id entries in observations; None derives
    # the maximum mask-id present in the problem at reset time.
    max_mask_id: int | None = None

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if self.theta0_rule not in THETA0_RULES:
            raise ValueError(f"unknown initial-threshold rule {self.theta0_rule!r}")


@dataclass
class EnvState:
    ship: ShipPlan
    yard: Yard
    target_slot: int | None
    proposed: ContainerRef | None
    rejected: set[ContainerRef] = field(default_factory=set)
    steps_taken: int = 0
    shuffles_so_far: int = 0

    @property
    def done(self) -> bool:
        return self.target_slot is None or self.yard.container_count() == 0


@dataclass
class StepOutcome:
    observation: np.ndarray
    r_intermediate: float
    done: bool
    info: dict


def intermediate_reward(q: int, u: int) -> float:
    """Per-pick reward from the pick's shuffle cost q and uncover count u."""
    if q == 0:
        return 0.1
    if q in (1, 2):
        return 0.05 + 0.1 * u / 6.0
    if q == 3:
        return 0.1 * u / 6.0
    return 0.0


def final_reward(total_shuffles: int, theta: float, best_so_far: float) -> float:
    """End-of-episode reward against the threshold and running best.

    Strictly beating the best episode seen so far for this problem earns 2;
    otherwise beating the threshold earns 1, and anything else (ties
    included) earns -1.
    """
    if total_shuffles < best_so_far:
        return 2.0
    if total_shuffles < theta:
        return 1.0
    return -1.0


def derive_max_mask_id(problem: ProblemInstance) -> int:
    masks = [m for m in problem.ship.slots if m != EMPTY]
    masks += [m for stack in problem.yard.stacks for m in stack]
    return max(masks, default=1)


def obs_width(problem: ProblemInstance) -> int:
    """Observation length for a problem's geometry."""
    cells = len(problem.yard.stacks) * problem.yard.max_height
    return 2 * cells + 2 * len(problem.ship.slots)


def encode_observation(state: EnvState, max_mask_id: int) -> np.ndarray:
    """Flat observation vector.

    Layout: yard mask-ids (stack-major, tier-minor, zero above stack tops),
    then a one-hot for the proposed container over the same yard cells, then
    the ship slot mask-ids, then a one-hot for the target slot. Mask-id
    entries are scaled by 1/max_mask_id into [0, 1].
    """
    stacks = state.yard.stacks
    height = state.yard.max_height
    n_cells = len(stacks) * height
    n_slots = len(state.ship.slots)
    obs = np.zeros(2 * n_cells + 2 * n_slots, dtype=np.float64)
    scale = 1.0 / max_mask_id
    for si, stack in enumerate(stacks):
        base = si * height
        for tier, mask in enumerate(stack):
            obs[base + tier] = mask * scale
    if state.proposed is not None:
        obs[n_cells + state.proposed.stack * height + state.proposed.tier] = 1.0
    base = 2 * n_cells
    for i, mask in enumerate(state.ship.slots):
        if mask != EMPTY:
            obs[base + i] = mask * scale
    if state.target_slot is not None:
        obs[base + n_slots + state.target_slot] = 1.0
    return obs


class Env:
    """One accept/reject episode at a time over a fixed problem instance.

    The proposition stream is driven by a generator seeded from the config;
    it is consumed across resets, so consecutive episodes on the same
    instance see different propositions while the whole sequence stays
    reproducible for a given seed.
    """

    def __init__(self, problem: ProblemInstance, config: EnvConfig | None = None):
        self.problem = problem
        self.config = config if config is not None else EnvConfig()
        self._rng = np.random.default_rng(self.config.rng_seed)
        self.state: EnvState | None = None
        self._max_mask = 1

    @property
    def done(self) -> bool:
        return self.state is None or self.state.done

    @property
    def max_mask_id(self) -> int:
        return self._max_mask

    def reset(self) -> EnvState:
        ensure_feasible(self.problem)
        derived = derive_max_mask_id(self.problem)
        if self.config.max_mask_id is not None:
            if derived > self.config.max_mask_id:
                raise ValueError(
                    f"problem holds mask-id {derived} above configured "
                    f"maximum {self.config.max_mask_id}"
                )
            self._max_mask = self.config.max_mask_id
        else:
            self._max_mask = derived
        ship = self.problem.ship.copy()
        target = self._first_target(ship, 0)
        self.state = EnvState(
            ship=ship,
            yard=self.problem.yard.copy(),
            target_slot=target,
            proposed=None,
            rejected=set(),
        )
        if not self.state.done:
            self.state.proposed = self._draw_proposition()
        return self.state

    def observe(self) -> np.ndarray:
        if self.state is None:
            raise RuntimeError("environment not reset")
        return encode_observation(self.state, self._max_mask)

    def candidates(self) -> list[ContainerRef]:
        """Matching candidates for the current target slot."""
        state = self.state
        if state is None or state.target_slot is None:
            return []
        return matching_candidates(state.yard, state.ship.slots[state.target_slot])

    def step(self, action: int) -> StepOutcome:
        if self.state is None:
            raise RuntimeError("environment not reset")
        state = self.state
        if state.done:
            raise EpisodeFinishedError("episode already finished")
        if action not in (AGREE, DISAGREE):
            raise ValueError(f"action must be {AGREE} (agree) or {DISAGREE} (disagree)")

        reward = 0.0
        info = {"loaded": None, "shuffle_cost": 0}
        if action == AGREE:
            reward = self._load(state.proposed, intermediate_eligible=True, info=info)
        else:
            state.rejected.add(state.proposed)
            alive = [c for c in self.candidates() if c not in state.rejected]
            if alive:
                state.proposed = self._draw(alive)
            else:
                # Every candidate was rejected: override and load the last one.
                self._load(state.proposed, intermediate_eligible=False, info=info)
        state.steps_taken += 1
        return StepOutcome(self.observe(), reward, state.done, info)

    # -- internals ---------------------------------------------------------

    @staticmethod
    def _first_target(ship: ShipPlan, start: int) -> int | None:
        for i in range(start, len(ship.slots)):
            if ship.slots[i] != EMPTY:
                return i
        return None

    def _draw(self, candidates: list[ContainerRef]) -> ContainerRef:
        return candidates[int(self._rng.integers(len(candidates)))]

    def _draw_proposition(self) -> ContainerRef:
        state = self.state
        alive = [c for c in self.candidates() if c not in state.rejected]
        if not alive:
            raise RuntimeError("no proposable candidate for the target slot")
        return self._draw(alive)

    def _load(self, ref: ContainerRef, intermediate_eligible: bool, info: dict) -> float:
        state = self.state
        q = shuffle_count(state.yard, ref)
        upcoming = remaining_fill_masks(state.ship, state.target_slot)
        u = uncovered_good(state.yard, ref, upcoming)
        state.yard, cost = pick_container(state.yard, ref)
        state.shuffles_so_far += cost
        reward = 0.0
        if (
            intermediate_eligible
            and self.config.reward_mode == REWARD_INTERMEDIATE_AND_DELAYED
        ):
            reward = intermediate_reward(q, u)
        info["loaded"] = ref
        info["shuffle_cost"] = cost
        state.ship.slots[state.target_slot] = EMPTY
        state.target_slot = self._first_target(state.ship, state.target_slot + 1)
        state.rejected = set()
        state.proposed = None
        if not state.done:
            state.proposed = self._draw_proposition()
        return reward
