"""Container loading sequencing: model, environment, solvers, and training."""

from .baselines import DEFAULT_NODE_BUDGET, SolveResult, exact_solve, lookahead, random_policy
from .bench import EvalOptions, EvalRow, GenSpec, emit_plots, evaluate, generate, generate_many
from .env import (
    AGREE,
    DISAGREE,
    Env,
    EnvConfig,
    EnvState,
    EpisodeFinishedError,
    StepOutcome,
    encode_observation,
    final_reward,
    intermediate_reward,
    obs_width,
)
from .model import (
    EMPTY,
    ContainerRef,
    FeasibilityError,
    InvalidReferenceError,
    MaskMismatchError,
    ProblemFormatError,
    ProblemInstance,
    ShipPlan,
    Yard,
    ensure_feasible,
    load_problem,
    mask_of,
    matching_candidates,
    pick_container,
    plan_cost,
    save_problem,
    shuffle_count,
    uncovered_good,
)
from .net import (
    CheckpointError,
    NetSpec,
    PolicyNet,
    TrainBatch,
    forward,
    init_net,
    load,
    save,
    train_batch,
)
from .pool import PoolEntry, ProblemPool
from .trainer import (
    SETTINGS,
    TrainConfig,
    TrainMetrics,
    Trainer,
    TrajectorySample,
    discounted_returns,
    read_metrics,
    run_episode,
    train,
    update_threshold,
)

__version__ = "0.1.0"
