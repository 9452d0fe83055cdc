"""Command line: synthesize witnesses, verify identities, report ranks,
evaluate expression programs.

Reports are serialized with sorted keys and fixed separators, so one
configuration always produces byte-identical output.  Exit codes: 0 all
checks passed, 1 a verification check failed, 2 usage or parse error,
3 input or output error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass

from .geometry import Space
from .harness import (
    ALL_LABELS,
    FAULTS,
    evaluate_program_lines,
    instance_bindings,
    run_ranks,
    run_verify_suite,
    synth_document,
    synthesized_pairs,
)
from .mapping import MappedPair, synthesize_instance

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3


class UsageError(ValueError):
    """Bad arguments or unusable input files; exits with code 2."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    dim: int = 3
    kind: int = 1
    seeds: tuple[int, ...] = (0,)
    order: int = 2
    trials: int = 5
    draws: int = 3
    p_values: tuple[int, ...] = ALL_LABELS
    q_values: tuple[int, ...] = ALL_LABELS
    corrupt: str | None = None
    instance: str | None = None
    program: str | None = None
    out: str | None = None
    format: str = "json"


def _dim_value(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("dim must be at least 2")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("value must be at least 1")
    return value


def _seed_list(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(piece) for piece in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"seeds must be comma-separated integers, got {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("seed list is empty")
    return seeds


def _grid_value(text: str) -> tuple[tuple[int, ...], tuple[int, ...]]:
    def labels(part: str) -> tuple[int, ...]:
        out: list[int] = []
        for piece in part.split(","):
            piece = piece.strip()
            if ".." in piece:
                lo, hi = piece.split("..", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(piece))
        if not out or any(not 1 <= v <= 8 for v in out):
            raise ValueError(part)
        return tuple(out)

    try:
        parts = text.split(":")
        if len(parts) == 1:
            p_values = q_values = labels(parts[0])
        elif len(parts) == 2:
            p_values, q_values = labels(parts[0]), labels(parts[1])
        else:
            raise ValueError(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            "grid must look like '1,3..5' or '1,2:3..8' "
            f"with labels in 1..8, got {text!r}") from None
    return p_values, q_values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eqlab",
        description="Exact verification workbench for equitorsion "
                    "almost geodesic mappings.")
    sub = parser.add_subparsers(dest="command", required=True)

    def instance_args(p: argparse.ArgumentParser, default_seeds) -> None:
        p.add_argument("--dim", type=_dim_value, default=3,
                       help="space dimension, at least 2 (default 3)")
        p.add_argument("--kind", type=int, choices=(1, 2), default=1,
                       help="mapping kind (default 1)")
        p.add_argument("--order", type=int, choices=(2, 3), default=2,
                       help="jet truncation order (default 2)")
        p.add_argument("--seed", type=int,
                       help="single seed; the EQLAB_SEED variable overrides")
        p.add_argument("--seeds", type=_seed_list,
                       help="comma-separated seed list")
        p.set_defaults(default_seeds=default_seeds)

    synth = sub.add_parser(
        "synth", help="write synthesized instances with their certificates")
    instance_args(synth, (0,))
    synth.add_argument("--out",
                       help="output file, or directory for several seeds")

    verify = sub.add_parser("verify", help="run the exact verification suite")
    instance_args(verify, (0, 1, 2, 3, 4))
    verify.add_argument("--instance",
                        help="verify a stored instance instead of synthesizing")
    verify.add_argument("--grid", type=_grid_value, metavar="P[:Q]",
                        default=(ALL_LABELS, ALL_LABELS),
                        help="sigma labels to sweep, e.g. '1,2:5..8'")
    verify.add_argument("--draws", type=_positive, default=3,
                        help="random parameter draws per instance (default 3)")
    verify.add_argument("--corrupt", choices=FAULTS,
                        help="inject a known fault as a negative control")
    verify.add_argument("--out", help="report file (default stdout)")

    ranks = sub.add_parser("ranks", help="rank and span summary table")
    ranks.add_argument("--dim", type=_dim_value, default=3,
                       help="space dimension (default 3)")
    ranks.add_argument("--order", type=int, choices=(2, 3), default=2)
    ranks.add_argument("--seed", type=int, default=0)
    ranks.add_argument("--trials", type=_positive, default=5,
                       help="substitutions for the generic rank (default 5)")
    ranks.add_argument("--format", choices=("json", "csv"), default="json")
    ranks.add_argument("--out", help="report file (default stdout)")

    evaluate = sub.add_parser(
        "eval", help="evaluate an assignment program against an instance")
    evaluate.add_argument("program",
                          help="file of 'Name[indices] = expression' lines")
    evaluate.add_argument("--instance",
                          help="instance or space file supplying the bindings")
    instance_args(evaluate, (0,))
    evaluate.add_argument("--out", help="result file (default stdout)")

    return parser


def _env_seed(parser: argparse.ArgumentParser) -> int | None:
    text = os.environ.get("EQLAB_SEED")
    if text is None:
        return None
    try:
        return int(text)
    except ValueError:
        parser.error(f"EQLAB_SEED must be an integer, got {text!r}")


def _resolve_seeds(parser: argparse.ArgumentParser,
                   args: argparse.Namespace) -> tuple[int, ...]:
    override = _env_seed(parser)
    if override is not None:
        return (override,)
    if args.seed is not None and args.seeds is not None:
        parser.error("--seed and --seeds are mutually exclusive")
    if args.seed is not None:
        return (args.seed,)
    if args.seeds is not None:
        return args.seeds
    return args.default_seeds


def _config(parser: argparse.ArgumentParser,
            args: argparse.Namespace) -> RunConfig:
    if args.command == "ranks":
        override = _env_seed(parser)
        seed = override if override is not None else args.seed
        return RunConfig("ranks", dim=args.dim, order=args.order,
                         trials=args.trials, seeds=(seed,),
                         format=args.format, out=args.out)
    seeds = _resolve_seeds(parser, args)
    if args.command == "synth":
        return RunConfig("synth", dim=args.dim, kind=args.kind,
                         order=args.order, seeds=seeds, out=args.out)
    if args.command == "verify":
        p_values, q_values = args.grid
        return RunConfig("verify", dim=args.dim, kind=args.kind,
                         order=args.order, seeds=seeds, draws=args.draws,
                         p_values=p_values, q_values=q_values,
                         corrupt=args.corrupt, instance=args.instance,
                         out=args.out)
    return RunConfig("eval", dim=args.dim, kind=args.kind, order=args.order,
                     seeds=seeds, instance=args.instance,
                     program=args.program, out=args.out)


def _json_text(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def _csv_text(rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("check", "dim", "expected", "observed", "pass"))
    for row in rows:
        writer.writerow((row["check"], row["dim"], row["expected"],
                         row["observed"], "true" if row["pass"] else "false"))
    return buffer.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)


def _load_document(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def _load_pair(path: str) -> tuple[int, MappedPair]:
    doc = _load_document(path)
    try:
        return int(doc.get("seed", 0)), MappedPair.from_json(doc)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"instance file {path} is malformed: {exc}") from None


def _load_bindings_source(path: str):
    doc = _load_document(path)
    try:
        if "mapping" in doc:
            return MappedPair.from_json(doc)
        if "gamma" in doc:
            return Space.from_json(doc)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"instance file {path} is malformed: {exc}") from None
    raise UsageError(f"instance file {path} holds neither a pair nor a space")


def cmd_synth(cfg: RunConfig) -> int:
    docs = [(seed, synth_document(cfg.dim, cfg.kind, seed, cfg.order))
            for seed in cfg.seeds]
    if cfg.out is not None and os.path.isdir(cfg.out):
        for seed, doc in docs:
            name = f"pair-d{cfg.dim}-k{cfg.kind}-s{seed}.json"
            _emit(_json_text(doc), os.path.join(cfg.out, name))
        return EXIT_PASS
    if len(docs) > 1:
        raise UsageError("several seeds need --out pointing at a directory")
    _emit(_json_text(docs[0][1]), cfg.out)
    return EXIT_PASS


def cmd_verify(cfg: RunConfig) -> int:
    if cfg.instance is not None:
        pairs = [_load_pair(cfg.instance)]
    else:
        pairs = synthesized_pairs(cfg.dim, cfg.kind, cfg.seeds, cfg.order)
    passed, checks, notes = run_verify_suite(
        pairs, cfg.p_values, cfg.q_values, cfg.draws, cfg.corrupt)
    doc = {
        "command": "verify",
        "config": {
            "dim": cfg.dim, "kind": cfg.kind, "seeds": list(cfg.seeds),
            "order": cfg.order, "draws": cfg.draws,
            "p": list(cfg.p_values), "q": list(cfg.q_values),
            "corrupt": cfg.corrupt, "instance": cfg.instance,
        },
        "pass": passed,
        "notes": notes,
        "checks": [check.to_json() for check in checks],
    }
    _emit(_json_text(doc), cfg.out)
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_ranks(cfg: RunConfig) -> int:
    passed, rows = run_ranks(cfg.dim, trials=cfg.trials, seed=cfg.seeds[0],
                             order=cfg.order)
    if cfg.format == "csv":
        text = _csv_text(rows)
    else:
        text = _json_text({
            "command": "ranks",
            "config": {"dim": cfg.dim, "order": cfg.order,
                       "seed": cfg.seeds[0], "trials": cfg.trials},
            "pass": passed,
            "rows": rows,
        })
    _emit(text, cfg.out)
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_eval(cfg: RunConfig) -> int:
    with open(cfg.program, "r", encoding="utf-8") as handle:
        text = handle.read()
    if cfg.instance is not None:
        source = _load_bindings_source(cfg.instance)
    else:
        source = synthesize_instance(cfg.dim, cfg.kind, cfg.seeds[0],
                                     cfg.order)
    defined = evaluate_program_lines(text, instance_bindings(source))
    doc = {
        "command": "eval",
        "results": {name: tensor.to_json() for name, tensor in defined.items()},
    }
    _emit(_json_text(doc), cfg.out)
    return EXIT_PASS


_COMMANDS = {
    "synth": cmd_synth,
    "verify": cmd_verify,
    "ranks": cmd_ranks,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _config(parser, args)
    try:
        return _COMMANDS[cfg.command](cfg)
    except ValueError as exc:
        # covers usage, parse, index-discipline and malformed-input errors
        print(f"eqlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"eqlab: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
