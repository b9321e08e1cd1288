"""Command-line interface.

Subcommands: ``generate`` (instances), ``label`` (exact solutions),
``train``, ``solve`` (one instance), ``eval`` (sweep -> table files),
``verify`` (invariant suite).  ``--seed`` and ``--config`` (a flat
key=value file) are accepted by every subcommand; explicit flags beat
config entries, which beat defaults.

Exit codes: 0 success, 2 usage errors (argparse), 3 data/contract
errors, 4 numeric errors, 1 failed verification.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Callable, Dict, Optional

from .checkpoint import load_model, save_model
from .errors import ContractError, DataError, NumericError
from .instances import generate as generate_instances
from .instances import read_jsonl, write_jsonl
from .network import GnnConfig
from .oracles import label as oracle_label
from .reporting import ExperimentSpec, make_table, parse_sweep, run_experiment
from .solver import SamplerConfig, SearchConfig, solve
from .training import TrainConfig, train
from .validation import ensure_labeled
from .verify import format_report, run_suite


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise DataError(f"not a boolean: {text!r}")


def _optional(convert: Callable) -> Callable:
    def inner(text: str):
        return None if text.strip().lower() in ("none", "null", "") else convert(text)

    return inner


TRAIN_KEYS: Dict[str, Callable] = {
    "steps": int,
    "batch_size": int,
    "lr": float,
    "lr_final_frac": float,
    "time_pair_alpha": float,
    "loss_weight": float,
    "optimizer": str,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "pair_rule": str,
    "grid_points": int,
    "horizon": int,
    "beta_start": float,
    "beta_end": _optional(float),
    "stop_loss": _optional(float),
}

GNN_KEYS: Dict[str, Callable] = {
    "n_layers": int,
    "hidden_dim": int,
    "time_dim": int,
    "norm": str,
    "sinusoid_base": float,
}

SOLVE_KEYS: Dict[str, Callable] = {
    "ts": int,
    "tg": int,
    "samples": int,
    "two_opt": _bool,
    "alpha_noise": float,
    "consistency_weight": _optional(float),
    "objective_weight": _optional(float),
    "grad_lr": float,
    "penalty_beta": float,
}


def read_config(path: Optional[str]) -> Dict[str, str]:
    """Flat key=value file; blank lines and #-comments ignored."""
    if path is None:
        return {}
    pairs: Dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise DataError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
                key, value = stripped.split("=", 1)
                pairs[key.strip()] = value.strip()
    except OSError as err:
        raise DataError(f"cannot read config {path}: {err}") from None
    return pairs


def _take(config: Dict[str, str], keys: Dict[str, Callable]) -> Dict[str, object]:
    out = {}
    for key, raw in list(config.items()):
        if key in keys:
            try:
                out[key] = keys[key](raw)
            except (ValueError, TypeError) as err:
                raise DataError(f"config key {key}={raw!r}: {err}") from None
            del config[key]
    return out


def _reject_leftovers(config: Dict[str, str]) -> None:
    if config:
        raise DataError(f"unknown config keys: {', '.join(sorted(config))}")


def cmd_generate(args) -> int:
    config = read_config(args.config)
    er_prob = args.er_prob
    if er_prob is None:
        er_prob = float(config.pop("er_edge_prob", 0.15))
    _reject_leftovers(config)
    insts = generate_instances(args.kind, args.n, args.count, seed=args.seed, er_edge_prob=er_prob)
    write_jsonl(args.out, insts)
    print(f"wrote {len(insts)} {args.kind} instances to {args.out}")
    return 0


def cmd_label(args) -> int:
    config = read_config(args.config)
    _reject_leftovers(config)
    samples = read_jsonl(args.data)
    labeled = oracle_label([s.instance for s in samples])
    write_jsonl(args.out, labeled)
    print(f"labeled {len(labeled)} instances -> {args.out}")
    return 0


def cmd_train(args) -> int:
    config = read_config(args.config)
    train_kw = _take(config, TRAIN_KEYS)
    gnn_kw = _take(config, GNN_KEYS)
    _reject_leftovers(config)
    samples = ensure_labeled(read_jsonl(args.data), auto_label=False)
    kind = samples[0].instance.kind
    train_cfg = TrainConfig(seed=args.seed, **train_kw)
    gnn_cfg = GnnConfig(kind=kind, **gnn_kw)
    model, history = train(samples, train_cfg, gnn_cfg, loss_log_path=args.loss_log)
    model.meta["train_config"] = {
        **{k: getattr(train_cfg, k) for k in TRAIN_KEYS},
        **{k: getattr(gnn_cfg, k) for k in GNN_KEYS},
        "seed": args.seed,
    }
    save_model(model, args.out)
    final = history[-1]
    print(
        f"trained {len(history)} steps on {len(samples)} samples; "
        f"final loss {final[2]:.4f}; checkpoint -> {args.out}"
    )
    return 0


def _solve_configs(args, config: Dict[str, str]):
    solve_kw = _take(config, SOLVE_KEYS)
    _reject_leftovers(config)
    ts = args.ts if args.ts is not None else solve_kw.get("ts", 1)
    tg = args.tg if args.tg is not None else solve_kw.get("tg", 0)
    samples = args.samples if args.samples is not None else solve_kw.get("samples", 1)
    two_opt = args.two_opt or bool(solve_kw.get("two_opt", False))
    sampler = SamplerConfig(steps=ts, seed=args.seed)
    search = SearchConfig(
        steps=tg,
        alpha_noise=solve_kw.get("alpha_noise", 0.2),
        consistency_weight=solve_kw.get("consistency_weight"),
        objective_weight=solve_kw.get("objective_weight"),
        grad_lr=solve_kw.get("grad_lr", 1.0),
        penalty_beta=solve_kw.get("penalty_beta", 2.0),
    )
    return sampler, search, two_opt, samples


def cmd_solve(args) -> int:
    config = read_config(args.config)
    sampler, search, two_opt, n_chains = _solve_configs(args, config)
    samples = read_jsonl(args.data)
    if not 0 <= args.index < len(samples):
        raise DataError(f"index {args.index} outside dataset of {len(samples)} instances")
    item = samples[args.index]
    reference = None if item.solution is None else item.solution.objective
    model = load_model(args.ckpt)
    report = solve(
        model,
        item.instance,
        sampler_cfg=sampler,
        search_cfg=search,
        use_two_opt=two_opt,
        parallel_samples=n_chains,
        reference=reference,
    )
    payload = json.dumps(report.to_json(), sort_keys=True)
    print(payload)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    return 0


def cmd_eval(args) -> int:
    config = read_config(args.config)
    _reject_leftovers(config)
    spec = ExperimentSpec(
        dataset=args.data,
        checkpoint=args.ckpt,
        sweep=tuple(parse_sweep(args.sweep)),
        seed=args.seed,
        out_dir=args.out,
    )
    rows = run_experiment(spec)
    text, _ = make_table(rows)
    print(text, end="")
    print(f"files written to {args.out}")
    return 0


def cmd_verify(args) -> int:
    names = args.checks or None
    results = run_suite(names=names)
    print(format_report(results))
    return 0 if all(r.ok for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consolve",
        description="Train consistency models for combinatorial optimization and solve instances.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base random seed")
    common.add_argument("--config", default=None, help="flat key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="generate random instances")
    p.add_argument("--kind", choices=("tsp", "mis"), required=True)
    p.add_argument("--n", type=int, required=True, help="nodes per instance")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--er-prob", type=float, default=None, help="edge probability for set instances")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("label", parents=[common], help="attach exact optimal solutions")
    p.add_argument("--data", required=True, help="instance JSONL path")
    p.add_argument("--out", required=True, help="labeled JSONL path")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", parents=[common], help="train a model on labeled data")
    p.add_argument("--data", required=True, help="labeled JSONL path")
    p.add_argument("--out", required=True, help="checkpoint path to write")
    p.add_argument("--loss-log", default=None, help="optional CSV loss log path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", parents=[common], help="solve one instance from a file")
    p.add_argument("--ckpt", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="instance JSONL path")
    p.add_argument("--index", type=int, default=0, help="instance row to solve")
    p.add_argument("--ts", type=int, default=None, help="sampling steps")
    p.add_argument("--tg", type=int, default=None, help="gradient-search iterations")
    p.add_argument("--samples", type=int, default=None, help="parallel chains")
    p.add_argument("--two-opt", action="store_true", help="apply 2-opt inside decoding")
    p.add_argument("--out", default=None, help="optional report JSON path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", parents=[common], help="evaluate a sweep and write tables")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--sweep", required=True, help='e.g. "1:0,1:1,3:3" or ts:tg:samples:two_opt')
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    p.add_argument("checks", nargs="*", help="subset of check names (default: all)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage/help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (DataError, ContractError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3
    except FileNotFoundError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3
    except NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
