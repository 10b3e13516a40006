"""Synthetic instance generation, policy evaluation tables, and plot data.

The evaluation table compares each policy's per-instance totals against the
0-step and 1-step lookahead heuristics and the exact optimum, reporting the
six percentage columns (strictly better / no worse than each heuristic,
above / equal to the optimum).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import DEFAULT_NODE_BUDGET, exact_solve, lookahead, random_policy
from .env import Env, EnvConfig, derive_max_mask_id, obs_width
from .model import EMPTY, ProblemInstance, ShipPlan, Yard
from .net import load as load_checkpoint
from .trainer import TrainMetrics, run_episode


@dataclass
class GenSpec:
    n_slots: int = 23
    n_fill: int = 15
    n_stacks: int = 7
    stack_height: int = 7
    n_mask_ids: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.n_slots < 1 or self.n_stacks < 1 or self.stack_height < 1:
            raise ValueError("slot and yard dimensions must be >= 1")
        if not (1 <= self.n_fill <= self.n_slots):
            raise ValueError("n_fill must be between 1 and n_slots")
        if self.n_stacks * self.stack_height < self.n_fill:
            raise ValueError("yard too small to supply every fill slot")
        if self.n_mask_ids < 1:
            raise ValueError("n_mask_ids must be >= 1")


def generate(spec: GenSpec) -> ProblemInstance:
    """One synthetic instance: a full yard block plus a slot sequence.

    Slot positions and all mask-ids are drawn uniformly; the yard is then
    repaired so every mask's supply covers its demand, replacing containers
    of surplus masks at uniformly chosen positions. Deterministic per seed.
    """
    rng = np.random.default_rng(spec.seed)
    fill_positions = sorted(
        int(i) for i in rng.choice(spec.n_slots, size=spec.n_fill, replace=False)
    )
    slots = [EMPTY] * spec.n_slots
    for pos in fill_positions:
        slots[pos] = int(rng.integers(1, spec.n_mask_ids + 1))
    stacks = [
        [int(m) for m in rng.integers(1, spec.n_mask_ids + 1, size=spec.stack_height)]
        for _ in range(spec.n_stacks)
    ]

    demand = Counter(m for m in slots if m != EMPTY)
    supply = Counter(m for stack in stacks for m in stack)
    for mask in sorted(demand):
        while supply[mask] < demand[mask]:
            surplus_positions = [
                (si, ti)
                for si, stack in enumerate(stacks)
                for ti, m in enumerate(stack)
                if supply[m] > demand.get(m, 0)
            ]
            si, ti = surplus_positions[int(rng.integers(len(surplus_positions)))]
            supply[stacks[si][ti]] -= 1
            stacks[si][ti] = mask
            supply[mask] += 1

    problem_id = (
        f"synth-{spec.n_slots}x{spec.n_fill}-{spec.n_stacks}x{spec.stack_height}"
        f"-m{spec.n_mask_ids}-s{spec.seed}"
    )
    return ProblemInstance(problem_id, ShipPlan(slots), Yard(stacks, spec.stack_height))


def generate_many(spec: GenSpec, count: int) -> list[ProblemInstance]:
    """Instances for seeds spec.seed .. spec.seed + count - 1."""
    from dataclasses import replace

    return [generate(replace(spec, seed=spec.seed + i)) for i in range(count)]


# ---------------------------------------------------------------------------
# Evaluation


@dataclass
class EvalRow:
    policy_name: str
    totals: list[int]
    pct_lt_0step: float
    pct_le_0step: float
    pct_lt_1step: float
    pct_le_1step: float
    pct_gt_optimal: float
    pct_eq_optimal: float
    n_instances: int
    n_optimal_reference: int


@dataclass
class EvalOptions:
    oracle_budget: int = DEFAULT_NODE_BUDGET
    eval_episodes: int = 1
    env_seed_base: int = 0
    random_seed: int = 0


def run_checkpoint_policy(
    net, problem: ProblemInstance, *, eval_episodes: int = 1,
    env_seed_base: int = 0, max_mask_id: int | None = None,
) -> int:
    """Best argmax-episode total over a fixed set of environment seeds."""
    width = obs_width(problem)
    if net.input_width != width:
        raise ValueError(
            f"checkpoint input width {net.input_width} does not match "
            f"observation width {width} of problem {problem.id!r}"
        )
    best = None
    for j in range(eval_episodes):
        env = Env(
            problem,
            EnvConfig(rng_seed=env_seed_base + j, max_mask_id=max_mask_id),
        )
        _, total = run_episode(env, net, rng=None, sample_actions=False)
        if best is None or total < best:
            best = total
    return best


def _policy_totals(
    spec: str,
    testset: list[ProblemInstance],
    oracle_totals: list[int],
    options: EvalOptions,
) -> tuple[str, list[int]]:
    if spec == "random":
        rng = np.random.default_rng(options.random_seed)
        return "random", [random_policy(p, rng).total_shuffles for p in testset]
    if spec.startswith("lookahead:"):
        k = int(spec.split(":", 1)[1])
        return f"{k}-step lookahead", [lookahead(p, k).total_shuffles for p in testset]
    if spec == "exact":
        return "exact", list(oracle_totals)
    # anything else is a checkpoint path
    net = load_checkpoint(spec)
    max_mask = max(derive_max_mask_id(p) for p in testset)
    totals = [
        run_checkpoint_policy(
            net,
            p,
            eval_episodes=options.eval_episodes,
            env_seed_base=options.env_seed_base,
            max_mask_id=max_mask,
        )
        for p in testset
    ]
    return Path(spec).stem, totals


def evaluate(
    policy_specs: list[str],
    testset: list[ProblemInstance],
    options: EvalOptions | None = None,
) -> list[EvalRow]:
    """Score policies against the lookahead heuristics and the exact optimum.

    Policy specs: "random", "lookahead:<k>", "exact", or a checkpoint path.
    Instances whose oracle search did not finish within budget are excluded
    from the optimality columns.
    """
    if not testset:
        raise ValueError("test set is empty")
    options = options or EvalOptions()
    zero = [lookahead(p, 0).total_shuffles for p in testset]
    one = [lookahead(p, 1).total_shuffles for p in testset]
    oracle = [exact_solve(p, options.oracle_budget) for p in testset]
    oracle_totals = [r.total_shuffles for r in oracle]
    proven = [i for i, r in enumerate(oracle) if r.optimal]

    rows = []
    n = len(testset)
    for spec in policy_specs:
        name, totals = _policy_totals(spec, testset, oracle_totals, options)
        pct = lambda count, base: 100.0 * count / base if base else float("nan")
        rows.append(
            EvalRow(
                policy_name=name,
                totals=totals,
                pct_lt_0step=pct(sum(t < z for t, z in zip(totals, zero)), n),
                pct_le_0step=pct(sum(t <= z for t, z in zip(totals, zero)), n),
                pct_lt_1step=pct(sum(t < o for t, o in zip(totals, one)), n),
                pct_le_1step=pct(sum(t <= o for t, o in zip(totals, one)), n),
                pct_gt_optimal=pct(
                    sum(totals[i] > oracle_totals[i] for i in proven), len(proven)
                ),
                pct_eq_optimal=pct(
                    sum(totals[i] == oracle_totals[i] for i in proven), len(proven)
                ),
                n_instances=n,
                n_optimal_reference=len(proven),
            )
        )
    return rows


EVAL_COLUMNS = (
    ("<0step", "pct_lt_0step"),
    ("<=0step", "pct_le_0step"),
    ("<1step", "pct_lt_1step"),
    ("<=1step", "pct_le_1step"),
    (">opt", "pct_gt_optimal"),
    ("=opt", "pct_eq_optimal"),
)


def render_table(rows: list[EvalRow]) -> str:
    name_width = max(6, *(len(r.policy_name) for r in rows)) if rows else 6
    header = "policy".ljust(name_width) + "".join(
        f"{label:>9}" for label, _ in EVAL_COLUMNS
    )
    lines = [header]
    for row in rows:
        cells = "".join(
            f"{getattr(row, attr):>9.1f}" for _, attr in EVAL_COLUMNS
        )
        lines.append(row.policy_name.ljust(name_width) + cells)
    return "\n".join(lines)


def write_eval_csv(rows: list[EvalRow], path) -> None:
    lines = [
        "policy,pct_lt_0step,pct_le_0step,pct_lt_1step,pct_le_1step,"
        "pct_gt_optimal,pct_eq_optimal,n_instances,n_optimal_reference"
    ]
    for r in rows:
        lines.append(
            f"{r.policy_name},{r.pct_lt_0step!r},{r.pct_le_0step!r},"
            f"{r.pct_lt_1step!r},{r.pct_le_1step!r},{r.pct_gt_optimal!r},"
            f"{r.pct_eq_optimal!r},{r.n_instances},{r.n_optimal_reference}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Plot data


def _safe_name(problem_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", problem_id)


def emit_plots(
    metrics: TrainMetrics,
    problems: list[ProblemInstance],
    out_dir,
    *,
    oracle_budget: int = DEFAULT_NODE_BUDGET,
    seed: int = 0,
) -> list[Path]:
    """Write plot-ready tables from a training run.

    Per problem, theta_<id>.csv holds the threshold after every episode; the
    shared min_shuffles.csv holds the minimum totals reached by a seeded
    random plan, the 0/1-step heuristics, the exact optimum, and training.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_id = {p.id: p for p in problems}
    written = []

    pids = metrics.problem_ids()
    missing = [pid for pid in pids if pid not in by_id]
    if missing:
        raise ValueError(f"metrics reference unknown problems: {missing}")

    for pid in pids:
        path = out / f"theta_{_safe_name(pid)}.csv"
        lines = ["episode,theta"]
        for i, theta in enumerate(metrics.theta_series(pid)):
            lines.append(f"{i},{theta!r}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)

    lines = ["problem_id,random,lookahead0,lookahead1,optimal,rl"]
    for idx, pid in enumerate(pids):
        problem = by_id[pid]
        rnd = random_policy(problem, np.random.default_rng(seed + idx)).total_shuffles
        zero = lookahead(problem, 0).total_shuffles
        one = lookahead(problem, 1).total_shuffles
        opt = exact_solve(problem, oracle_budget).total_shuffles
        rl = min(metrics.totals(pid))
        lines.append(f"{pid},{rnd},{zero},{one},{opt},{rl}")
    bars = out / "min_shuffles.csv"
    bars.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(bars)
    return written
