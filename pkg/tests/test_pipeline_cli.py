import csv
from pathlib import Path

import pytest

from htnlearn.benchmarks import load_benchmark
from htnlearn.cli import build_config, main, make_parser, parse_config_text
from htnlearn.hddl import load_domain
from htnlearn.pipeline import AGGREGATE_COLUMNS, RunConfig, cell_name, learn_cell, run_pipeline


def test_config_text_and_overrides(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# sweep\ndomain = blocksworld\nsize = 100, 300\nnoise = 0.1  # assumed\nseed = 1,2\n")
    assert parse_config_text(cfg_file.read_text())["sizes"] == "100, 300"
    args = make_parser().parse_args(["sweep", "--config", str(cfg_file), "--noise", "0.2", "--out", "x"])
    cfg = build_config(args)
    assert cfg.domain == "blocksworld" and cfg.sizes == (100, 300) and cfg.seeds == (1, 2)
    assert cfg.noise == 0.2 and cfg.out == "x"
    assert RunConfig().seed_list == (0, 1, 2, 3, 4)
    with pytest.raises(ValueError, match="unknown key"):
        parse_config_text("colour = red")
    with pytest.raises(ValueError):
        parse_config_text("just words")
    with pytest.raises(ValueError):
        RunConfig(noise=2.0).validate()


def test_cell_name():
    cfg = RunConfig(observability=0.25, noise=0.2)
    assert cell_name(cfg, 300, 4) == "gripper-methods-only-n300-o0.25-e0.2-s4"


@pytest.mark.slow
def test_sweep_aggregate(tmp_path):
    cfg = RunConfig(sizes=(100, 300, 600), out=str(tmp_path), jobs=4, eval_problems=5)
    rows = run_pipeline(cfg)
    with open(tmp_path / "results.csv", newline="") as fh:
        read = list(csv.DictReader(fh))
    assert len(rows) == len(read) == 15
    assert tuple(read[0]) == AGGREGATE_COLUMNS
    assert [(int(r["size"]), int(r["seed"])) for r in read] == [(s, k) for s in (100, 300, 600) for k in range(5)]
    for r in read:
        folder = tmp_path / cell_name(cfg, int(r["size"]), int(r["seed"]))
        for f in ("domain.hddl", "dfa.txt", "report.txt", "eval.csv", "summary.txt"):
            assert (folder / f).exists()
        assert len(list((folder / "problems").glob("*.hddl"))) == 5
        learned = load_domain(folder / "domain.hddl")
        assert learned.operators == load_benchmark("gripper").domain.operators
        assert 0.0 <= float(r["accuracy"]) <= 1.0


def test_learning_is_deterministic(tmp_path):
    texts = []
    for run in ("a", "b"):
        cfg = RunConfig(sizes=(200,), out=str(tmp_path / run))
        _, folder = learn_cell(cfg, 200, 3)
        texts.append(((folder / "domain.hddl").read_text(), (folder / "dfa.txt").read_text()))
    assert texts[0] == texts[1]


def test_cli_learn_eval_inspect(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["learn", "--size", "200", "--seed", "0", "--out", out]) == 0
    learned = Path(out) / "gripper-methods-only-n200-o1-e0-s0" / "domain.hddl"
    assert learned.exists()
    assert main(["eval", str(learned), "--seed", "0", "--eval-problems", "3"]) == 0
    assert "accuracy" in capsys.readouterr().out
    assert main(["inspect-dfa", "--size", "100", "--seed", "0"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("# pta nodes") and "move(" in text


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["learn", "--noise", "3"]) == 2
    assert "stage config" in capsys.readouterr().err
    assert main(["learn", "--domain", "nosuch", "--out", str(tmp_path)]) == 1
    assert "stage load" in capsys.readouterr().err
    bad = tmp_path / "bad.hddl"
    bad.write_text("(define (domain d) (:predicates (p))")
    assert main(["eval", str(bad), "--seed", "0"]) == 1
    assert "failed" in capsys.readouterr().err
    empty = tmp_path / "empty.hddl"
    empty.write_text("(define (domain gripper) (:predicates (p)))")
    assert main(["eval", str(empty), "--seed", "0", "--eval-problems", "4"]) == 0  # solves nothing, still a run
    assert "accuracy 0.000" in capsys.readouterr().out
