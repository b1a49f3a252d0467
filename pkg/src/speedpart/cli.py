"""``speedpart`` command line: generate, partition, metrics, verify-bounds, simulate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant violation.
Errors go to stderr as one JSON line ``{"error": ..., "detail": ...}``.
"""
import argparse
import json
import sys

from .errors import BoundViolation, DataError, InvariantViolation, MismatchedInput
from .graph_io import gen_powerlaw, load_edges, maybe_split, write_edges
from .metrics import VerifyConfig, format_table, quality, verify_bounds
from .pac_sim import SimConfig, simulate
from .partitioner import (PartitionAssignment, assign_eval_edges, make_config, partition_random,
                          partition_stream, partition_unrestricted)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dump(doc, path):
    text = json.dumps(doc) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _stream_args(p, required=True):
    p.add_argument("--input", required=required, help="edge CSV (src,dst,ts); '-' for stdin")
    p.add_argument("--assume-sorted", action="store_true")
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--val-frac", type=float, default=0.15)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="speedpart", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("generate", help="write a synthetic power-law edge CSV")
    g.add_argument("--gen-nodes", type=int, default=1000)
    g.add_argument("--gen-edges", type=int, default=10000)
    g.add_argument("--gen-alpha", type=float, default=2.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output", default="-")

    p = sub.add_parser("partition", help="partition an edge stream")
    _stream_args(p)
    p.add_argument("--parts", type=int, default=4)
    p.add_argument("--topk", type=float, default=0.05, help="hub fraction k")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--no-normalize-ts", action="store_true")
    p.add_argument("--hub-base", choices=("active", "all"), default="active")
    p.add_argument("--centrality", choices=("decay", "degree"), default="decay")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--mode", choices=("sep", "unrestricted", "random"), default="sep")
    p.add_argument("--partition-on", choices=("train", "all"), default="train")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default="-")

    m = sub.add_parser("metrics", help="quality report for an assignment")
    m.add_argument("--assignment", required=True)
    m.add_argument("--input", required=True)
    fmt = m.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    fmt.add_argument("--table", dest="fmt", action="store_const", const="table")
    m.add_argument("--alpha", type=float, default=None, help="power-law exponent for the EC bound")
    m.add_argument("--strict", action="store_true", help="divide RF by declared node count")
    m.add_argument("--output", default="-")

    v = sub.add_parser("verify-bounds", help="check RF/EC bounds on synthetic graphs")
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--min-edges", type=int, default=1000)
    v.add_argument("--max-edges", type=int, default=50000)
    v.add_argument("--output", default="-")

    s = sub.add_parser("simulate", help="run the multi-worker training simulation")
    s.add_argument("--input", required=True)
    s.add_argument("--assignment", required=True)
    s.add_argument("--workers", type=int, default=None, help="default: assignment part count")
    s.add_argument("--small-parts", type=int, default=None, help="default: assignment part count")
    s.add_argument("--shuffle", action="store_true")
    s.add_argument("--sync", choices=("max-ts", "avg"), default="max-ts")
    s.add_argument("--batch-size", type=int, default=200)
    s.add_argument("--epochs", type=int, default=1)
    s.add_argument("--dim", type=int, default=8)
    s.add_argument("--model-seed", type=int, default=None, help="default: --seed")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--report", default="-")
    return parser


def _cmd_generate(a):
    s = gen_powerlaw(a.gen_nodes, a.gen_edges, a.gen_alpha, a.seed)
    write_edges(s, a.output)


def _cmd_partition(a):
    full = load_edges(a.input, assume_sorted=a.assume_sorted)
    stream, split = maybe_split(full, a.partition_on, a.train_frac, a.val_frac)
    config = {"input": a.input, "assume_sorted": a.assume_sorted, "train_frac": a.train_frac,
              "val_frac": a.val_frac, "partition_on": a.partition_on, "seed": a.seed,
              "edges": len(stream)}
    if a.mode == "random":
        pa = partition_random(stream, a.parts, a.seed)
    else:
        cfg = make_config(stream, a.parts, k=a.topk, beta=a.beta, lam=a.lam, epsilon=a.epsilon,
                          centrality=a.centrality, normalize_ts=not a.no_normalize_ts,
                          hub_base=a.hub_base)
        run = partition_stream if a.mode == "sep" else partition_unrestricted
        pa = run(stream, cfg)
    pa.config.update(config)
    doc = pa.to_json()
    if split is not None:
        routing = assign_eval_edges(split, pa)
        doc["eval"] = {name: {"routed": [len(x) for x in getattr(routing, name)],
                              "unroutable": routing.unroutable[name]} for name in ("val", "test")}
    _dump(doc, a.output)


def _load_assignment(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _stream_for(doc, path):
    cfg = doc.get("config", {})
    full = load_edges(path, assume_sorted=bool(cfg.get("assume_sorted", False)))
    stream, _ = maybe_split(full, cfg.get("partition_on", "all"),
                            float(cfg.get("train_frac", 0.7)), float(cfg.get("val_frac", 0.15)))
    if len(stream) != len(doc["edge_part"]):
        raise MismatchedInput(f"assignment has {len(doc['edge_part'])} edges, input yields {len(stream)}")
    return stream


def _cmd_metrics(a):
    doc = _load_assignment(a.assignment)
    stream = _stream_for(doc, a.input)
    pa = PartitionAssignment.from_json(doc, node_count=stream.node_count)
    report = quality(pa, stream, strict=a.strict, alpha=a.alpha)
    if a.fmt == "table":
        label = f"{doc['config'].get('mode', '?')} k={doc['config'].get('k', 0)}"
        text = format_table([(label, report)]) + "\n"
        if a.output == "-":
            sys.stdout.write(text)
        else:
            with open(a.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        return
    config = {"assignment": a.assignment, "input": a.input, "alpha": a.alpha, "strict": a.strict,
              "partition": doc.get("config", {})}
    _dump({"config": config, "quality": report.to_json()}, a.output)


def _cmd_verify(a):
    vc = VerifyConfig(edge_range=(a.min_edges, a.max_edges))
    try:
        report = verify_bounds(a.trials, a.seed, vc)
    except BoundViolation as exc:
        _dump(exc.report, a.output)
        raise
    _dump(report, a.output)


def _cmd_simulate(a):
    doc = _load_assignment(a.assignment)
    stream = _stream_for(doc, a.input)
    pa = PartitionAssignment.from_json(doc, node_count=stream.node_count)
    small = a.small_parts if a.small_parts is not None else pa.num_parts
    workers = a.workers if a.workers is not None else small
    cfg = SimConfig(num_workers=workers, num_small_parts=small, shuffle=a.shuffle,
                    sync_strategy=a.sync, batch_size=a.batch_size, epochs=a.epochs, d=a.dim,
                    model_seed=a.seed if a.model_seed is None else a.model_seed, seed=a.seed)
    report = simulate(stream, pa, cfg).to_json()
    report["config"] = {"input": a.input, "assignment": a.assignment, **report["config"]}
    _dump(report, a.report)


_COMMANDS = {"generate": _cmd_generate, "partition": _cmd_partition, "metrics": _cmd_metrics,
             "verify-bounds": _cmd_verify, "simulate": _cmd_simulate}


def _fail(code, exc):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "detail": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    if getattr(args, "command", None) == "metrics" and args.fmt is None:
        args.fmt = "json"
    try:
        _COMMANDS[args.command](args)
    except (DataError, OSError, json.JSONDecodeError, KeyError) as exc:
        return _fail(EXIT_DATA, exc)
    except InvariantViolation as exc:
        return _fail(EXIT_INTERNAL, exc)
    except Exception as exc:  # noqa: BLE001 - any other failure is an internal error
        return _fail(EXIT_INTERNAL, exc)
    return EXIT_OK


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
