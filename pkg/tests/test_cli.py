import json

import pytest

from stowrl.cli import build_dataclass, main, read_config_file
from stowrl.model import load_problem
from stowrl.trainer import TrainConfig, read_metrics


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def gen_small(tmp_path, capsys, count=2, extra=()):
    out = tmp_path / "problems"
    code, stdout, _ = run(
        capsys, "gen", "--out", str(out), "--count", str(count), "--seed", "10",
        "--n-slots", "8", "--n-fill", "5", "--n-stacks", "4",
        "--stack-height", "4", "--n-mask-ids", "3", *extra,
    )
    assert code == 0
    return out


def test_gen_writes_problem_files(tmp_path, capsys):
    out = gen_small(tmp_path, capsys)
    files = sorted(out.glob("*.json"))
    assert len(files) == 2
    p = load_problem(files[0])
    assert p.ship.fill_count() == 5
    doc = json.loads(files[0].read_text())
    assert doc["version"] == 1


def test_gen_same_seed_is_byte_identical(tmp_path, capsys):
    a = gen_small(tmp_path / "a", capsys)
    b = gen_small(tmp_path / "b", capsys)
    fa, fb = sorted(a.glob("*.json"))[0], sorted(b.glob("*.json"))[0]
    assert fa.read_bytes() == fb.read_bytes()


def test_solve_policies(tmp_path, capsys):
    out = gen_small(tmp_path, capsys, count=1)
    problem_file = str(next(out.glob("*.json")))
    for policy in ("random", "lookahead:1", "exact"):
        code, stdout, _ = run(capsys, "solve", problem_file, "--policy", policy)
        assert code == 0
        assert "total=" in stdout


def test_train_eval_plots_pipeline(tmp_path, capsys):
    problems_dir = gen_small(tmp_path, capsys)
    run_dir = tmp_path / "run"
    code, stdout, _ = run(
        capsys, "train", str(problems_dir), "--out-dir", str(run_dir),
        "--setting", "IRP", "--episodes", "12", "--iterations", "1",
        "--window", "6", "--seed", "3",
    )
    assert code == 0
    ckpt = run_dir / "checkpoint.txt"
    metrics_path = run_dir / "metrics.csv"
    assert ckpt.exists() and metrics_path.exists()
    metrics = read_metrics(metrics_path)
    assert len(metrics.rows) == 2 * 12

    code, stdout, _ = run(
        capsys, "solve", str(problems_dir), "--policy", str(ckpt),
    )
    assert code == 0

    table_csv = tmp_path / "table.csv"
    code, stdout, _ = run(
        capsys, "eval", str(problems_dir),
        "--policy", "lookahead:0", "--policy", str(ckpt),
        "--csv", str(table_csv),
    )
    assert code == 0
    assert "policy" in stdout
    assert table_csv.exists()

    plots_dir = tmp_path / "plots"
    code, stdout, _ = run(
        capsys, "plots", "--metrics", str(metrics_path),
        "--problems", str(problems_dir), "--out", str(plots_dir),
    )
    assert code == 0
    assert (plots_dir / "min_shuffles.csv").exists()


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "train.cfg"
    cfg.write_text(
        "# training knobs\n"
        "setting = DRWP\n"
        "episodes_per_problem = 10\n"
        "threshold_window = 5\n"
        "iterations = 1\n"
        "gamma = 0.9\n"
        "seed = 4\n",
        encoding="utf-8",
    )
    values = read_config_file(cfg)
    assert values["setting"] == "DRWP"
    config = build_dataclass(TrainConfig, values, {"seed": 9})
    assert config.setting == "DRWP"
    assert config.episodes_per_problem == 10
    assert config.gamma == 0.9
    assert config.seed == 9  # flag wins over file


def test_config_file_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no_such_field = 1\n", encoding="utf-8")
    with pytest.raises(ValueError):
        build_dataclass(TrainConfig, read_config_file(cfg), {})
    cfg.write_text("just a line\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_config_file(cfg)


def test_cli_error_codes(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    code, _, err = run(capsys, "solve", missing, "--policy", "exact")
    assert code == 4 and "error[io]" in err

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": 9, "id": "x", "slots": [1], "yard": [[1]]}))
    code, _, err = run(capsys, "solve", str(bad), "--policy", "exact")
    assert code == 2 and "error[format]" in err

    infeasible = tmp_path / "infeasible.json"
    infeasible.write_text(
        json.dumps({"version": 1, "id": "x", "slots": [3], "yard": [[1]],
                    "max_stack_height": 7})
    )
    code, _, err = run(capsys, "solve", str(infeasible), "--policy", "exact")
    assert code == 3 and "error[feasibility]" in err

    code, _, err = run(capsys, "solve", str(infeasible), "--policy", "lookahead:x")
    assert code == 5


def test_gen_with_config_file(tmp_path, capsys):
    cfg = tmp_path / "gen.cfg"
    cfg.write_text("n_slots = 6\nn_fill = 4\nn_stacks = 3\nstack_height = 3\n"
                   "n_mask_ids = 2\n", encoding="utf-8")
    out = tmp_path / "problems"
    code, stdout, _ = run(
        capsys, "gen", "--out", str(out), "--seed", "1", "--config", str(cfg)
    )
    assert code == 0
    p = load_problem(next(out.glob("*.json")))
    assert len(p.ship.slots) == 6
    assert p.ship.fill_count() == 4
