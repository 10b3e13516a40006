"""Command line interface: gen, solve, train, eval, plots."""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import bench, trainer as trainer_mod
from .baselines import DEFAULT_NODE_BUDGET, exact_solve, lookahead, random_policy
from .bench import EvalOptions, GenSpec, emit_plots, evaluate, generate, render_table, write_eval_csv
from .model import (
    FeasibilityError,
    ProblemFormatError,
    ProblemInstance,
    load_problem,
    save_problem,
)
from .net import CheckpointError, load as load_checkpoint, save as save_checkpoint
from .trainer import TrainConfig, read_metrics, train


def read_config_file(path) -> dict[str, str]:
    """Plain `key = value` lines; blank lines and # comments are skipped."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected `key = value`, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def build_dataclass(cls, file_values: dict[str, str], cli_values: dict):
    """Dataclass from defaults, overridden by config file, overridden by flags."""
    known = {f.name: f for f in fields(cls)}
    unknown = [k for k in file_values if k not in known]
    if unknown:
        raise ValueError(f"unknown config keys for {cls.__name__}: {unknown}")
    kwargs = {}
    for name, f in known.items():
        if cli_values.get(name) is not None:
            kwargs[name] = cli_values[name]
        elif name in file_values:
            text = file_values[name]
            if f.type in ("int", int):
                kwargs[name] = int(text)
            elif f.type in ("float", float):
                kwargs[name] = float(text)
            elif f.type in ("bool", bool):
                kwargs[name] = text.lower() in ("1", "true", "yes", "on")
            elif name == "theta0":  # float | None
                kwargs[name] = None if text.lower() == "none" else float(text)
            else:
                kwargs[name] = text
    return cls(**kwargs)


def collect_problems(paths: list[str]) -> list[ProblemInstance]:
    problems = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files = sorted(path.glob("*.json"))
            if not files:
                raise FileNotFoundError(f"no .json problem files in {path}")
            problems.extend(load_problem(f) for f in files)
        else:
            problems.append(load_problem(path))
    return problems


def cmd_gen(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    cli_values = {
        "n_slots": args.n_slots,
        "n_fill": args.n_fill,
        "n_stacks": args.n_stacks,
        "stack_height": args.stack_height,
        "n_mask_ids": args.n_mask_ids,
        "seed": args.seed,
    }
    spec = build_dataclass(GenSpec, file_values, cli_values)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for problem in bench.generate_many(spec, args.count):
        path = out / f"{problem.id}.json"
        save_problem(problem, path)
        print(path)
    return 0


def _solve_one(problem: ProblemInstance, args):
    spec = args.policy
    if spec == "random":
        return random_policy(problem, np.random.default_rng(args.seed))
    if spec.startswith("lookahead:"):
        return lookahead(problem, int(spec.split(":", 1)[1]))
    if spec == "exact":
        return exact_solve(problem, args.budget)
    net = load_checkpoint(spec)
    total = bench.run_checkpoint_policy(
        net, problem, eval_episodes=args.eval_episodes, env_seed_base=args.seed
    )
    return None, total


def cmd_solve(args) -> int:
    for problem in collect_problems(args.problems):
        result = _solve_one(problem, args)
        if isinstance(result, tuple):
            _, total = result
            print(f"{problem.id}\ttotal={total}\tpolicy={args.policy}")
        else:
            print(
                f"{problem.id}\ttotal={result.total_shuffles}"
                f"\toptimal={result.optimal}\tnodes={result.nodes_explored}"
                f"\telapsed={result.elapsed:.3f}s"
            )
    return 0


def cmd_train(args) -> int:
    problems = collect_problems(args.problems)
    file_values = read_config_file(args.config) if args.config else {}
    cli_values = {
        "setting": args.setting,
        "episodes_per_problem": args.episodes,
        "iterations": args.iterations,
        "threshold_window": args.window,
        "top_k": args.top_k,
        "gamma": args.gamma,
        "lr": args.lr,
        "seed": args.seed,
        "pool_capacity": args.pool_capacity,
        "theta0": args.theta0,
        "pool_granularity": args.pool_granularity,
        "center_advantages": args.center_advantages,
    }
    config = build_dataclass(TrainConfig, file_values, cli_values)
    net, metrics = train(problems, config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint = out / "checkpoint.txt"
    metrics_path = out / "metrics.csv"
    save_checkpoint(net, checkpoint)
    metrics.write_csv(metrics_path)
    for problem in problems:
        rows = metrics.rows_for(problem.id)
        print(
            f"{problem.id}\tbest={rows[-1].best_so_far}"
            f"\ttheta={rows[-1].theta:.3f}\tepisodes={len(rows)}"
        )
    print(f"checkpoint: {checkpoint}")
    print(f"metrics: {metrics_path}")
    return 0


def cmd_eval(args) -> int:
    problems = collect_problems(args.problems)
    options = EvalOptions(
        oracle_budget=args.budget,
        eval_episodes=args.eval_episodes,
        env_seed_base=args.seed,
        random_seed=args.seed,
    )
    rows = evaluate(args.policy, problems, options)
    print(render_table(rows))
    if args.csv:
        write_eval_csv(rows, args.csv)
        print(f"csv: {args.csv}")
    return 0


def cmd_plots(args) -> int:
    metrics = read_metrics(args.metrics)
    problems = collect_problems(args.problems)
    written = emit_plots(
        metrics, problems, args.out, oracle_budget=args.budget, seed=args.seed
    )
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stowrl",
        description="Container loading sequencing: generator, solvers, trainer and benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate synthetic problem files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=1, help="instances (consecutive seeds)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-slots", dest="n_slots", type=int, default=None)
    p.add_argument("--n-fill", dest="n_fill", type=int, default=None)
    p.add_argument("--n-stacks", dest="n_stacks", type=int, default=None)
    p.add_argument("--stack-height", dest="stack_height", type=int, default=None)
    p.add_argument("--n-mask-ids", dest="n_mask_ids", type=int, default=None)
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve problems with one policy")
    p.add_argument("problems", nargs="+", help="problem files or directories")
    p.add_argument(
        "--policy",
        required=True,
        help="random | lookahead:<k> | exact | <checkpoint path>",
    )
    p.add_argument("--budget", type=int, default=DEFAULT_NODE_BUDGET)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-episodes", dest="eval_episodes", type=int, default=1)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("train", help="train the policy network")
    p.add_argument("problems", nargs="+", help="problem files or directories")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--setting", choices=trainer_mod.SETTINGS, default=None)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--window", type=int, default=None, help="threshold window")
    p.add_argument("--top-k", dest="top_k", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--pool-capacity", dest="pool_capacity", type=int, default=None)
    p.add_argument("--theta0", type=float, default=None)
    p.add_argument(
        "--pool-granularity",
        dest="pool_granularity",
        choices=("sample", "episode"),
        default=None,
    )
    p.add_argument(
        "--center-advantages",
        dest="center_advantages",
        action="store_const",
        const=True,
        default=None,
    )
    p.add_argument("--config", help="key = value config file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="tabulate policies against heuristics and optimum")
    p.add_argument("problems", nargs="+", help="problem files or directories")
    p.add_argument(
        "--policy",
        action="append",
        required=True,
        help="repeatable: random | lookahead:<k> | exact | <checkpoint path>",
    )
    p.add_argument("--budget", type=int, default=DEFAULT_NODE_BUDGET)
    p.add_argument("--eval-episodes", dest="eval_episodes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="also write the table to this CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plots", help="emit plot-ready tables from training metrics")
    p.add_argument("--metrics", required=True, help="metrics CSV from train")
    p.add_argument("--problems", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=int, default=DEFAULT_NODE_BUDGET)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_plots)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProblemFormatError, CheckpointError) as exc:
        print(f"error[format]: {exc}", file=sys.stderr)
        return 2
    except FeasibilityError as exc:
        print(f"error[feasibility]: {exc}", file=sys.stderr)
        return 3
    except (FileNotFoundError, OSError) as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 4
    except (ValueError, ArithmeticError) as exc:
        print(f"error[invalid]: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
