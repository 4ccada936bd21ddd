"""Command line: learn, eval, sweep, inspect-dfa.

Settings come from an optional flat ``key = value`` file (``#`` starts a
comment, lists are comma separated) and are overridden by flags.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .dfa import RPNI
from .hddl import load_domain
from .pipeline import RunConfig, StageError, evaluate_cell, learn_cell, load_truth, make_samples, run_pipeline

_TUPLES = {"sizes", "seeds"}
_ALIASES = {"size": "sizes", "seed": "seeds"}


def parse_config_text(text: str) -> Dict[str, str]:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if key not in RunConfig.field_names():
            raise ValueError(f"config line {n}: unknown key {key!r}")
        out[key] = value
    return out


def _convert(values: Dict[str, str]) -> Dict[str, object]:
    kinds = {f.name: f.type for f in fields(RunConfig)}
    out: Dict[str, object] = {}
    for key, value in values.items():
        if key in _TUPLES:
            out[key] = tuple(int(v) for v in str(value).split(",") if v.strip())
        elif key == "problem":
            out[key] = value or None
        elif "float" in str(kinds[key]):
            out[key] = float(value)
        elif "int" in str(kinds[key]):
            out[key] = int(value)
        else:
            out[key] = value
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values: Dict[str, str] = {}
    if args.config:
        values.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
    for flag in ("domain", "problem", "mode", "observability", "noise", "out", "jobs", "eval_problems"):
        v = getattr(args, flag, None)
        if v is not None:
            values[flag] = str(v)
    if args.size is not None:
        values["sizes"] = args.size
    if args.seed is not None:
        values["seeds"] = args.seed
    return RunConfig(**_convert(values)).validate()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--domain", help="benchmark name (gripper, blocksworld, childsnack) or domain file")
    p.add_argument("--problem", help="training problem template (defaults to the benchmark's first)")
    p.add_argument("--mode", choices=["methods-only", "full"])
    p.add_argument("--size", help="training size(s) in tasks, comma separated")
    p.add_argument("--observability", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", help="seed(s), comma separated; default 0..repetitions-1")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="htnlearn", description="Learn HTN domains from annotated traces.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("learn", help="learn domains without evaluating them")
    _add_common(p)
    p = sub.add_parser("eval", help="evaluate a learned domain file against the ground truth")
    _add_common(p)
    p.add_argument("learned", help="learned domain file")
    p.add_argument("--eval-problems", dest="eval_problems", type=int)
    p = sub.add_parser("sweep", help="learn and evaluate every (size, seed) cell, write results.csv")
    _add_common(p)
    p.add_argument("--eval-problems", dest="eval_problems", type=int)
    p = sub.add_parser("inspect-dfa", help="print the task automaton learned for one (size, seed)")
    _add_common(p)
    return parser


def _learn(cfg: RunConfig) -> int:
    for size in cfg.sizes:
        for seed in cfg.seed_list:
            learner, folder = learn_cell(cfg, size, seed)
            print(f"{folder}: {learner.methods_.count()} methods, {len(learner.operators_)} operators")
    return 0


def _eval(cfg: RunConfig, learned_path: str) -> int:
    truth, _, templates = load_truth(cfg)
    learned = load_domain(learned_path)
    for seed in cfg.seed_list:
        report = evaluate_cell(cfg, learned, truth, templates, seed)
        print(f"seed {seed}: {report.summary()}")
    return 0


def _sweep(cfg: RunConfig) -> int:
    rows = run_pipeline(cfg)
    for r in rows:
        print(f"size {r['size']} seed {r['seed']}: accuracy {r['accuracy']:.3f} ({r['methods_learned']} methods)")
    print(f"wrote {Path(cfg.out) / 'results.csv'}")
    return 0


def _inspect(cfg: RunConfig) -> int:
    truth, template, _ = load_truth(cfg)
    size, seed = cfg.sizes[0], cfg.seed_list[0]
    samples = make_samples(truth, template, size, seed, cfg.observability, cfg.noise)
    rpni = RPNI(noise_tolerance=cfg.noise).fit(samples)
    print(f"# pta nodes {rpni.pta_size_}, dfa nodes {len(rpni.dfa_.nodes)}, "
          f"sample consistency {rpni.score(samples):.3f}")
    sys.stdout.write(rpni.dfa_.export())
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
    except (OSError, ValueError, TypeError) as exc:
        print(f"htnlearn: stage config failed: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "learn":
            return _learn(cfg)
        if args.command == "eval":
            return _eval(cfg, args.learned)
        if args.command == "sweep":
            return _sweep(cfg)
        return _inspect(cfg)
    except StageError as exc:
        print(f"htnlearn: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"htnlearn: stage {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
