"""Command-line entry points: gen, train, eval, ot-solve, inspect-prototype."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import format_config, load_config
from .dataio import SyntheticSpec, generate, load_embeddings, save_embeddings
from .exact import exact_ot
from .hot import build_bank
from .pipeline import evaluate, test_time_xi, train
from .prototype import prototype_diff, save_prototype
from .sinkhorn import sinkhorn
from .types import CostMatrix, DiscreteDistribution, transport_objective


def _cmd_gen(args) -> int:
    spec = SyntheticSpec.from_json(args.spec)
    source, target_train, target_test = generate(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "source": "source.emb",
        "target_train": "target_train.emb",
        "target_test": "target_test.emb",
    }
    save_embeddings(out_dir / files["source"], source)
    save_embeddings(out_dir / files["target_train"], target_train)
    save_embeddings(out_dir / files["target_test"], target_test)
    manifest = {"spec": spec.as_dict(), "files": files}
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2)
        handle.write("\n")
    print(json.dumps({"out_dir": str(out_dir), "files": files}))
    return 0


def _cmd_train(args) -> int:
    config = load_config(args.config)
    source = load_embeddings(args.source)
    target = load_embeddings(args.target)
    bank = build_bank(
        source.features,
        source.labels,
        source.num_classes,
        subsample=config.subsample_per_class,
        seed=config.seed,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    trace = None
    trace_handle = None
    if args.trace:
        trace_handle = open(out_dir / "hot_trace.jsonl", "w", encoding="utf-8")

        def trace(record):
            trace_handle.write(json.dumps(record) + "\n")

    try:
        result = train(
            config,
            target.features,
            target.labels,
            bank,
            num_target=target.num_classes,
            trace=trace,
        )
    finally:
        if trace_handle is not None:
            trace_handle.close()

    with open(out_dir / "config.txt", "w", encoding="utf-8") as handle:
        handle.write(format_config(config))
    with open(out_dir / "epochs.jsonl", "w", encoding="utf-8") as handle:
        for record in result.records:
            handle.write(json.dumps(record.as_dict()) + "\n")
    save_prototype(result.proto, out_dir / "prototype.json")
    save_checkpoint(
        out_dir / "checkpoint.bin",
        Checkpoint(model=result.model, proto=result.proto, bank=bank, config=config),
    )
    final = result.records[-1]
    print(json.dumps({"out": str(out_dir), "final": final.as_dict()}))
    return 0


def _cmd_eval(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    target = load_embeddings(args.target)
    metrics, _ = evaluate(
        checkpoint.model,
        checkpoint.proto,
        target.features,
        target.labels,
        checkpoint.bank,
        checkpoint.config,
        xi_prime=test_time_xi(checkpoint.config),
    )
    print(json.dumps(metrics.as_dict()))
    return 0


def _read_instance(path):
    tokens = Path(path).read_text(encoding="utf-8").split()
    if len(tokens) < 3:
        raise ValueError("instance file needs at least 'n m epsilon'")
    n, m = int(tokens[0]), int(tokens[1])
    epsilon = float(tokens[2])
    expected = 3 + n + m + n * m
    if len(tokens) != expected:
        raise ValueError(f"instance file has {len(tokens)} tokens, expected {expected}")
    values = np.array([float(t) for t in tokens[3:]])
    p = DiscreteDistribution(values[:n])
    q = DiscreteDistribution(values[n : n + m])
    cost = CostMatrix(values[n + m :].reshape(n, m))
    return p, q, cost, epsilon


def _cmd_ot_solve(args) -> int:
    p, q, cost, file_epsilon = _read_instance(args.instance)
    if args.exact:
        plan, value = exact_ot(p, q, cost)
        payload = {"mode": "exact", "epsilon": None}
    else:
        epsilon = args.epsilon if args.epsilon is not None else file_epsilon
        plan = sinkhorn(p, q, cost, epsilon)
        value = transport_objective(plan, cost)
        payload = {"mode": "sinkhorn", "epsilon": epsilon}
    payload["cost"] = value
    payload["plan"] = plan.entries.tolist()
    print(json.dumps(payload))
    return 0


def _cmd_inspect(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    proto = checkpoint.proto
    diff = prototype_diff(proto)
    payload = {
        "alpha": proto.alpha,
        "nu": proto.nu,
        "rows": proto.rows.tolist(),
        "diff": [{"source_class": idx, "value": value} for idx, value in diff],
    }
    print(json.dumps(payload, indent=2))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otkt",
        description=(
            "Hierarchical optimal-transport knowledge transfer on embedding files: "
            "generate synthetic data, train, evaluate, and inspect."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate synthetic embedding files")
    gen.add_argument("--spec", required=True, help="JSON generator spec")
    gen.add_argument("--out-dir", required=True)
    gen.set_defaults(func=_cmd_gen)

    tr = sub.add_parser("train", help="train on embedding files")
    tr.add_argument("--config", required=True, help="key = value run config")
    tr.add_argument("--source", required=True, help="source embedding file")
    tr.add_argument("--target", required=True, help="target embedding file")
    tr.add_argument("--out", required=True, help="run directory")
    tr.add_argument("--trace", action="store_true", help="write hot_trace.jsonl")
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a target file")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--target", required=True)
    ev.set_defaults(func=_cmd_eval)

    ot = sub.add_parser("ot-solve", help="solve one transport instance from a text file")
    ot.add_argument("--instance", required=True)
    group = ot.add_mutually_exclusive_group()
    group.add_argument("--epsilon", type=float, default=None, help="override the file epsilon")
    group.add_argument("--exact", action="store_true", help="use the exact solver")
    ot.set_defaults(func=_cmd_ot_solve)

    ins = sub.add_parser("inspect-prototype", help="print prototype rows and the diff table")
    ins.add_argument("--checkpoint", required=True)
    ins.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
