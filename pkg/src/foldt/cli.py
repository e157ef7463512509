"""Command-line front end.

    foldt learn      --data data.kb --settings bias.s --out model.foldt
    foldt classify   --model model.foldt --data test.kb [--out preds.tsv]
    foldt convert    --tables DIR --schema FILE --out data.kb --bg bg.pl
    foldt gen        --domain poker --count 1000 --seed 7 --out data.kb
    foldt discretize --data data.kb --settings bias.s
    foldt bench      --data data.kb --settings bias.s --k 1,2,4,8 --out report.tsv

Exit codes: 0 success, 1 usage error, 2 data/input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench as bench_mod
from . import generators, rdb
from .engine import Background, load_background
from .errors import FoldtError
from .learner import LearnerConfig, learn
from .model import classify, load_model, save_model, tree_depth
from .settings import parse_settings
from .store import MANIFEST_NAME, iter_kb_blocks, load_dataset, open_dataset
from .terms import render_term

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="foldt", description="First-order logical decision tree learner")
    p.add_argument("-v", "--verbose", action="store_true", help="info-level logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common_learn_args(sp, with_algo=True):
        sp.add_argument("--data", required=True, help="block file, or an existing chunk store")
        sp.add_argument("--settings", required=True, help="settings file")
        sp.add_argument("--bg", help="background program file")
        sp.add_argument("--granularity", type=int, help="examples per chunk (G)")
        sp.add_argument("--chunks", help="directory for the chunk store")
        sp.add_argument("--minleaf", type=int, help="minimal examples per leaf")
        if with_algo:
            sp.add_argument("--algo", choices=("classic", "lds"), help="induction engine")
            sp.add_argument("--heuristic", choices=("gainratio", "gain", "weighted_entropy"))
            sp.add_argument("--max-depth", type=int, dest="max_depth")

    sp = sub.add_parser("learn", help="induce a tree and save the model")
    common_learn_args(sp)
    sp.add_argument("--out", required=True, help="model file to write")

    sp = sub.add_parser("classify", help="classify examples with a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True, help="block file (labels optional)")
    sp.add_argument("--bg", help="background program file")
    sp.add_argument("--out", help="predictions TSV (default: stdout)")

    sp = sub.add_parser("convert", help="relational snapshot to interpretations")
    sp.add_argument("--tables", required=True, help="directory of <table>.csv files")
    sp.add_argument("--schema", required=True, help="schema directive file")
    sp.add_argument("--out", required=True, help="interpretations file to write")
    sp.add_argument("--bg", required=True, help="background fact file to write")
    sp.add_argument("--strict-fk", action="store_true", dest="strict_fk",
                    help="dangling foreign keys are fatal")
    sp.add_argument("--delimiter", default=",")
    sp.add_argument("--containing", choices=("any", "key"), default="any",
                    help="seed the closure from any cell or key cells only")

    sp = sub.add_parser("gen", help="generate a synthetic dataset")
    sp.add_argument("--domain", required=True, choices=("poker", "bongard"))
    sp.add_argument("--count", required=True, type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--balance", action="store_true")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("discretize", help="print thresholds for discretize declarations")
    common_learn_args(sp, with_algo=False)
    sp.add_argument("--max-thresholds", type=int, dest="max_thresholds")

    sp = sub.add_parser("bench", help="replicate-and-scale benchmark")
    common_learn_args(sp)
    sp.add_argument("--k", default="1,2,4,8", help="comma-separated replication factors")
    sp.add_argument("--out", required=True, help="TSV report file")
    sp.add_argument("--workdir", help="directory for replicated chunk stores")
    for child in sub.choices.values():
        child.add_argument(
            "-v", "--verbose", action="store_true", dest="verbose_sub", help=argparse.SUPPRESS
        )
    return p


def _open_data(args, settings):
    path = Path(args.data)
    if path.is_dir() or path.name == MANIFEST_NAME:
        return open_dataset(path)
    return load_dataset(
        path,
        settings,
        out_dir=args.chunks,
        granularity=args.granularity,
    )


def _background(args) -> Background | None:
    return load_background(args.bg) if args.bg else None


def _cmd_learn(args) -> int:
    settings = parse_settings(Path(args.settings).read_text(encoding="utf-8"))
    data = _open_data(args, settings)
    cfg = LearnerConfig.from_settings(
        settings,
        algorithm=args.algo,
        heuristic=args.heuristic,
        minleaf=args.minleaf,
        max_depth=args.max_depth,
        granularity=args.granularity,
    )
    model = learn(data, _background(args), settings, cfg)
    save_model(model, args.out)
    meta = model.metadata
    print(
        f"{meta['algorithm']}: {meta['examples']} examples -> "
        f"{meta['internal_nodes']} internal nodes, {meta['leaves']} leaves, "
        f"depth {tree_depth(model.tree)}, passes {meta['passes']}, "
        f"cpu {meta['induction_cpu_seconds']:.2f}s"
    )
    print(f"model written to {args.out}")
    return 0


def _cmd_classify(args) -> int:
    model = load_model(args.model)
    background = _background(args)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    budget = model.metadata.get("resolution_budget", 100_000)
    correct = labelled = total = 0
    try:
        out.write("id\tactual\tpredicted\n")
        for interp in iter_kb_blocks(args.data, model.classes, allow_unlabeled=True):
            predicted = classify(model, interp, background, budget)
            actual = interp.label or "?"
            out.write(f"{render_term(interp.ident)}\t{actual}\t{predicted}\n")
            total += 1
            if interp.label:
                labelled += 1
                correct += predicted == interp.label
    finally:
        if args.out:
            out.close()
    report = sys.stdout if args.out else sys.stderr
    if labelled:
        report.write(f"accuracy {correct}/{labelled} = {correct / labelled:.5f}\n")
    report.write(f"classified {total} examples\n")
    return 0


def _cmd_convert(args) -> int:
    schema = rdb.parse_schema(Path(args.schema).read_text(encoding="utf-8"))
    snapshot = rdb.load_snapshot(args.tables, schema, delimiter=args.delimiter)
    report = rdb.convert_all(
        snapshot,
        schema,
        args.out,
        args.bg,
        strict_fk=args.strict_fk,
        containing=args.containing,
    )
    print(
        f"wrote {report.example_count} examples to {args.out}, "
        f"{report.background_fact_count} background facts to {args.bg}"
    )
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for v in report.locality_violations:
        print(f"locality: {v}", file=sys.stderr)
    return 0


def _cmd_gen(args) -> int:
    spec = generators.GenSpec(args.domain, args.count, args.seed, args.balance)
    path = generators.generate(spec, args.out)
    print(f"wrote {args.count} {args.domain} examples to {path}")
    return 0


def _cmd_discretize(args) -> int:
    settings = parse_settings(Path(args.settings).read_text(encoding="utf-8"))
    if not settings.discretize:
        print("no discretize declarations in the settings file")
        return 0
    from .bias import discretize as run_discretize
    from .engine import Query

    data = _open_data(args, settings)
    background = _background(args)
    cap = args.max_thresholds
    if cap is None:
        cap = settings.params.max_thresholds
    for k, request in enumerate(settings.discretize, 1):
        th = run_discretize(request, data, background, max_thresholds=cap)
        cuts = ", ".join(repr(c) for c in th.cuts) or "(none)"
        print(f"threshold({k}): {Query(request.query)} on {request.var} -> {cuts}")
    return 0


def _cmd_bench(args) -> int:
    settings = parse_settings(Path(args.settings).read_text(encoding="utf-8"))
    data = _open_data(args, settings)
    cfg = LearnerConfig.from_settings(
        settings,
        algorithm=args.algo,
        heuristic=args.heuristic,
        minleaf=args.minleaf,
        max_depth=args.max_depth,
        granularity=args.granularity,
    )
    k_list = tuple(int(k) for k in args.k.split(","))
    result = bench_mod.bench_run(
        data,
        _background(args),
        settings,
        cfg,
        k_list=k_list,
        workdir=args.workdir,
        out_tsv=args.out,
    )
    print(bench_mod.format_bench_table(result.reports))
    if not result.trees_identical:
        print("benchmark invalidated: trees differ across replication factors", file=sys.stderr)
    print(f"report written to {args.out}")
    return 0


_COMMANDS = {
    "learn": _cmd_learn,
    "classify": _cmd_classify,
    "convert": _cmd_convert,
    "gen": _cmd_gen,
    "discretize": _cmd_discretize,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    verbose = args.verbose or getattr(args, "verbose_sub", False)
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except (FoldtError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
