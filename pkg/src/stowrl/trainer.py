"""Episode runner, discounted returns, evolving threshold, and the training loop.

Four settings cross two reward channels with the sample pool:

    DRWP  delayed reward only, no pool
    DRP   delayed reward only, with pool
    IRWP  intermediate and delayed rewards, no pool
    IRP   intermediate and delayed rewards, with pool

Every episode ends with a final reward judged against a per-problem
threshold that ratchets down to the running window average, and against the
best total seen so far for that problem. The discounted return of each
decision combines its own intermediate reward with the final reward decayed
by distance from the episode's end.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean

import numpy as np

from .baselines import lookahead
from .env import (
    AGREE,
    DISAGREE,
    REWARD_DELAYED_ONLY,
    REWARD_INTERMEDIATE_AND_DELAYED,
    THETA0_CONSTANT,
    THETA0_LOOKAHEAD_PLUS_1,
    Env,
    EnvConfig,
    derive_max_mask_id,
    final_reward,
    obs_width,
)
from .model import ProblemInstance
from .net import NetSpec, PolicyNet, TrainBatch, init_net, train_batch
from .pool import DEFAULT_POOL_CAPACITY, GRANULARITIES, GRANULARITY_SAMPLE, ProblemPool

SETTINGS = ("DRWP", "DRP", "IRWP", "IRP")
POOL_SETTINGS = ("DRP", "IRP")
INTERMEDIATE_SETTINGS = ("IRWP", "IRP")

HIDDEN_LAYER_SIZES = (128, 64, 32)


@dataclass
class TrajectorySample:
    observation: np.ndarray
    action: int
    r_intermediate: float
    v: float = 0.0


@dataclass
class TrainConfig:
    setting: str = "IRP"
    episodes_per_problem: int = 200
    iterations: int = 4
    threshold_window: int = 20
    top_k: int = 50
    gamma: float = 0.99
    lr: float = 1e-3
    seed: int = 0
    pool_capacity: int = DEFAULT_POOL_CAPACITY
    # None applies the default rule (0-step lookahead total + 1); a number
    # fixes the initial threshold for every problem.
    theta0: float | None = None
    pool_granularity: str = GRANULARITY_SAMPLE
    center_advantages: bool = False

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        if self.pool_granularity not in GRANULARITIES:
            raise ValueError(f"pool_granularity must be one of {GRANULARITIES}")
        if self.episodes_per_problem < 1 or self.iterations < 1:
            raise ValueError("episodes_per_problem and iterations must be >= 1")
        if not (1 <= self.threshold_window <= self.episodes_per_problem):
            raise ValueError(
                "threshold_window must be between 1 and episodes_per_problem"
            )
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not (self.lr > 0.0):
            raise ValueError(f"lr must be positive, got {self.lr}")

    @property
    def uses_pool(self) -> bool:
        return self.setting in POOL_SETTINGS

    @property
    def reward_mode(self) -> str:
        if self.setting in INTERMEDIATE_SETTINGS:
            return REWARD_INTERMEDIATE_AND_DELAYED
        return REWARD_DELAYED_ONLY


@dataclass
class ProblemTrainState:
    theta: float
    best_shuffles: float  # +inf until the first episode completes
    recent: deque  # last threshold_window episode totals
    pool: ProblemPool


@dataclass
class MetricsRow:
    setting: str
    problem_id: str
    iteration: int
    episode: int
    total_shuffles: int
    theta: float
    best_so_far: int


@dataclass
class TrainMetrics:
    rows: list[MetricsRow] = field(default_factory=list)

    def problem_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row.problem_id, None)
        return list(seen)

    def rows_for(self, problem_id: str) -> list[MetricsRow]:
        return [row for row in self.rows if row.problem_id == problem_id]

    def theta_series(self, problem_id: str) -> list[float]:
        return [row.theta for row in self.rows_for(problem_id)]

    def totals(self, problem_id: str) -> list[int]:
        return [row.total_shuffles for row in self.rows_for(problem_id)]

    def best(self, problem_id: str) -> int:
        rows = self.rows_for(problem_id)
        if not rows:
            raise KeyError(f"no metrics recorded for problem {problem_id!r}")
        return rows[-1].best_so_far

    def write_csv(self, path) -> None:
        lines = ["setting,problem_id,iteration,episode,total_shuffles,theta,best_so_far"]
        for r in self.rows:
            lines.append(
                f"{r.setting},{r.problem_id},{r.iteration},{r.episode},"
                f"{r.total_shuffles},{r.theta!r},{r.best_so_far}"
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_metrics(path) -> TrainMetrics:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "setting,problem_id,iteration,episode,total_shuffles,theta,best_so_far":
        raise ValueError(f"{path}: not a recognized metrics file")
    metrics = TrainMetrics()
    for line in lines[1:]:
        if not line:
            continue
        setting, pid, iteration, episode, total, theta, best = line.split(",")
        metrics.rows.append(
            MetricsRow(setting, pid, int(iteration), int(episode), int(total),
                       float(theta), int(best))
        )
    return metrics


def run_episode(
    env: Env,
    policy,
    rng: np.random.Generator | None = None,
    sample_actions: bool = True,
) -> tuple[list[TrajectorySample], int]:
    """Play one full episode; returns the decision samples and the total
    shuffle count.

    `policy` needs a forward(observation) -> (p_agree, p_disagree) method.
    With sample_actions the action is drawn from that distribution (rng
    required); otherwise the argmax is taken, agreeing on ties.
    """
    if sample_actions and rng is None:
        raise ValueError("sampling actions requires an rng")
    env.reset()
    samples: list[TrajectorySample] = []
    obs = env.observe()
    while not env.done:
        probs = policy.forward(obs)
        if sample_actions:
            action = AGREE if rng.random() < probs[0] else DISAGREE
        else:
            action = AGREE if probs[0] >= probs[1] else DISAGREE
        outcome = env.step(action)
        samples.append(TrajectorySample(obs, action, outcome.r_intermediate))
        obs = outcome.observation
    return samples, env.state.shuffles_so_far


def discounted_returns(
    samples: list[TrajectorySample], r_final: float, gamma: float
) -> list[TrajectorySample]:
    """Fill v = r_intermediate + r_final * gamma^t, t counted from the end
    (the last decision has t = 0). Mutates and returns the sample list."""
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    n = len(samples)
    for i, sample in enumerate(samples):
        sample.v = sample.r_intermediate + r_final * gamma ** (n - 1 - i)
    return samples


def update_threshold(state: ProblemTrainState) -> float:
    """Ratchet the threshold down to the window average when that is lower."""
    window = state.recent.maxlen
    if window is None or len(state.recent) < window:
        raise ValueError(
            f"threshold update needs {window} recorded episodes, "
            f"have {len(state.recent)}"
        )
    state.theta = min(state.theta, fmean(state.recent))
    return state.theta


def initial_theta(problem: ProblemInstance, rule: str, constant: float = 0.0) -> float:
    if rule == THETA0_CONSTANT:
        return float(constant)
    if rule == THETA0_LOOKAHEAD_PLUS_1:
        return float(lookahead(problem, 0).total_shuffles + 1)
    raise ValueError(f"unknown initial-threshold rule {rule!r}")


class Trainer:
    """Owns the network, per-problem environments and threshold/pool state.

    The loop is strictly sequential (iterations, then problems, then
    episodes) so a (problems, config) pair fully determines the run.
    """

    def __init__(self, problems: list[ProblemInstance], config: TrainConfig):
        if not problems:
            raise ValueError("need at least one problem to train on")
        ids = [p.id for p in problems]
        if len(set(ids)) != len(ids):
            raise ValueError("problem ids must be unique")
        widths = {obs_width(p) for p in problems}
        if len(widths) != 1:
            raise ValueError(
                f"problems disagree on observation width: {sorted(widths)}"
            )
        self.problems = problems
        self.config = config

        seed_seq = np.random.SeedSequence(config.seed)
        net_ss, agent_ss, *env_ss = seed_seq.spawn(2 + len(problems))
        self.rng = np.random.default_rng(agent_ss)

        width = widths.pop()
        self.net = init_net(
            NetSpec(
                (width, *HIDDEN_LAYER_SIZES, 2),
                seed=int(net_ss.generate_state(1)[0]),
            )
        )

        max_mask = max(derive_max_mask_id(p) for p in problems)
        theta0_rule = THETA0_CONSTANT if config.theta0 is not None else THETA0_LOOKAHEAD_PLUS_1
        self.envs = []
        self.states = []
        for problem, ss in zip(problems, env_ss):
            env_cfg = EnvConfig(
                gamma=config.gamma,
                theta0_rule=theta0_rule,
                theta0_value=config.theta0 if config.theta0 is not None else 0.0,
                reward_mode=config.reward_mode,
                rng_seed=int(ss.generate_state(1)[0]),
                max_mask_id=max_mask,
            )
            self.envs.append(Env(problem, env_cfg))
            self.states.append(
                ProblemTrainState(
                    theta=initial_theta(problem, theta0_rule, env_cfg.theta0_value),
                    best_shuffles=math.inf,
                    recent=deque(maxlen=config.threshold_window),
                    pool=ProblemPool(
                        problem.id, config.pool_capacity, config.pool_granularity
                    ),
                )
            )
        self.metrics = TrainMetrics()
        self._episode_counts = [0] * len(problems)
        self._episode_uid = 0

    def run_problem_episode(self, pidx: int, iteration: int = 0) -> MetricsRow:
        """One episode on one problem: play, score, pool, train, ratchet."""
        cfg = self.config
        env = self.envs[pidx]
        state = self.states[pidx]

        samples, total = run_episode(env, self.net, self.rng, sample_actions=True)
        r_final = final_reward(total, state.theta, state.best_shuffles)
        discounted_returns(samples, r_final, cfg.gamma)
        if total < state.best_shuffles:
            state.best_shuffles = total

        batch_samples = samples
        if cfg.uses_pool:
            state.pool.push_episode(self._episode_uid, samples, r_final)
            top = state.pool.top_k(cfg.top_k)
            if top:
                batch_samples = top
        self._episode_uid += 1

        if batch_samples:
            loss = train_batch(
                self.net,
                TrainBatch.from_samples(batch_samples),
                cfg.lr,
                center_advantages=cfg.center_advantages,
            )
            if not math.isfinite(loss):
                raise ArithmeticError(f"training loss is not finite: {loss}")

        state.recent.append(total)
        self._episode_counts[pidx] += 1
        if self._episode_counts[pidx] % cfg.threshold_window == 0:
            update_threshold(state)

        row = MetricsRow(
            setting=cfg.setting,
            problem_id=self.problems[pidx].id,
            iteration=iteration,
            episode=self._episode_counts[pidx] - 1,
            total_shuffles=total,
            theta=state.theta,
            best_so_far=int(state.best_shuffles),
        )
        self.metrics.rows.append(row)
        return row

    def run(self) -> tuple[PolicyNet, TrainMetrics]:
        cfg = self.config
        for iteration in range(cfg.iterations):
            for pidx in range(len(self.problems)):
                for _ in range(cfg.episodes_per_problem):
                    self.run_problem_episode(pidx, iteration)
        return self.net, self.metrics


def train(
    problems: list[ProblemInstance], config: TrainConfig
) -> tuple[PolicyNet, TrainMetrics]:
    """Full training run; returns the trained network and per-episode metrics."""
    return Trainer(problems, config).run()
