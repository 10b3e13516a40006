import numpy as np
import pytest

from stowrl.model import ProblemInstance, ShipPlan, Yard


def make_problem(slots, stacks, problem_id="p", max_height=7):
    return ProblemInstance(problem_id, ShipPlan(list(slots)), Yard([list(s) for s in stacks], max_height))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
