"""Command line entry point: ``sshad <subcommand>``.

Flags override values read from ``--config``; nothing is taken from the
environment.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace

from .evaluation import GENERATORS, StreamSpec, gen_stream
from .pipeline import (PipelineError, RunConfig, compare_runs, learn_dictionary_only,
                       run_had_baseline, run_sshad)
from .tree import LEAF_MODES


def _paths(values):
    if values is None:
        return None
    return values[0] if len(values) == 1 else list(values)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or YAML file with RunConfig fields")
    p.add_argument("--labeled", nargs="+", metavar="PATH", help="labeled dataset file(s)")
    p.add_argument("--unlabeled", nargs="+", metavar="PATH",
                   help="unlabeled dataset file(s); default: split off the labeled files")
    p.add_argument("--format", choices=("csv", "arff"))
    p.add_argument("--ratios", type=float, nargs="+", metavar="R", help="sampling ratios")
    p.add_argument("--bad-data", type=float, dest="bad_data_fraction")
    p.add_argument("--labeled-pool-fraction", type=float)
    p.add_argument("--unlabeled-limit", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--snapshot-every", type=int)
    g = p.add_argument_group("dictionary")
    g.add_argument("--atoms", type=int, dest="m")
    g.add_argument("--k", type=int)
    g.add_argument("--tol", type=float)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--bcd-sweeps", type=int)
    g.add_argument("--convergence-eps", type=float)
    g = p.add_argument_group("tree")
    g.add_argument("--grace-period", type=int)
    g.add_argument("--split-confidence", type=float)
    g.add_argument("--tie-threshold", type=float)
    g.add_argument("--leaf-prediction", choices=LEAF_MODES)
    g.add_argument("--adwin-delta", type=float)
    g.add_argument("--no-ddm", action="store_true")
    g.add_argument("--no-adaptation", action="store_true")


def _pick(args, names):
    return {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    top = _pick(args, ("format", "bad_data_fraction", "labeled_pool_fraction",
                       "unlabeled_limit", "folds", "seed", "output_dir", "snapshot_every"))
    if args.labeled:
        top["labeled_path"] = _paths(args.labeled)
    if args.unlabeled:
        top["unlabeled_path"] = _paths(args.unlabeled)
    if args.ratios:
        top["sampling_ratios"] = args.ratios
    dict_kw = _pick(args, ("m", "k", "tol", "max_iter", "bcd_sweeps", "convergence_eps"))
    omp_kw = _pick(args, ("k", "tol"))
    had_kw = _pick(args, ("grace_period", "split_confidence", "tie_threshold",
                          "leaf_prediction", "adwin_delta"))
    if args.no_ddm:
        had_kw["ddm"] = False
    if args.no_adaptation:
        had_kw["adaptive"] = False
    cfg = replace(cfg, **top,
                  dictionary=replace(cfg.dictionary, **dict_kw) if dict_kw else cfg.dictionary,
                  omp=replace(cfg.omp, **omp_kw) if omp_kw else cfg.omp,
                  had=replace(cfg.had, **had_kw) if had_kw else cfg.had)
    if not cfg.labeled_path:
        raise ValueError("no labeled dataset given (--labeled or config labeled_path)")
    return cfg


def _print_summary(manifest: dict) -> None:
    print(f"{manifest['mode']}: wrote {manifest['config']['output_dir']}/manifest.json")
    for row in manifest.get("summary", []):
        print(f"  ratio {row['sampling_ratio']:.2f}  kappa {100 * row['kappa']:6.2f}%  "
              f"acc {100 * row['accuracy']:6.2f}%  cost {row['ram_hours']:.3e} GB-h")


def cmd_run(args, runner) -> int:
    cfg = resolve_config(args)
    print(json.dumps(cfg.to_dict(), indent=2))
    _print_summary(runner(cfg))
    return 0


def cmd_learn_dict(args) -> int:
    cfg = resolve_config(args)
    print(json.dumps(cfg.to_dict(), indent=2))
    manifest = learn_dictionary_only(cfg)
    print(f"dictionary written to {cfg.output_dir}/dictionary.bin "
          f"({len(manifest['artifacts'])} artifacts)")
    return 0


def cmd_compare(args) -> int:
    table = compare_runs(args.manifest_a, args.manifest_b, args.out)
    w = csv.DictWriter(sys.stdout, fieldnames=list(table[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(table)
    return 0


def cmd_gen_stream(args) -> int:
    spec = StreamSpec(args.generator, args.seed, args.length, tuple(args.drift_points),
                      args.class_balance, args.n_features, tuple(args.error_rates))
    stream = gen_stream(spec)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        if spec.generator == "bernoulli":
            w.writerow(["error"])
            w.writerows([y] for _, y in stream)
        else:
            w.writerow([f"x{i}" for i in range(spec.n_features)] + ["class"])
            for x, y in stream:
                w.writerow([format(v, ".17g") for v in x] + [y])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sshad", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn-dict", help="learn a dictionary from the unlabeled pool")
    _add_run_flags(p)
    p.set_defaults(func=cmd_learn_dict)

    p = sub.add_parser("run-sshad", help="dictionary codes -> adaptive tree, prequential folds")
    _add_run_flags(p)
    p.set_defaults(func=lambda a: cmd_run(a, run_sshad))

    p = sub.add_parser("run-had", help="raw-feature baseline on the same folds")
    _add_run_flags(p)
    p.set_defaults(func=lambda a: cmd_run(a, run_had_baseline))

    p = sub.add_parser("compare", help="side-by-side table of two runs")
    p.add_argument("manifest_a")
    p.add_argument("manifest_b")
    p.add_argument("--out", help="directory for comparison.csv / comparison.json")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-stream", help="write a synthetic validation stream as CSV")
    p.add_argument("--generator", choices=GENERATORS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length", type=int, default=1000)
    p.add_argument("--drift-points", type=int, nargs="*", default=[])
    p.add_argument("--class-balance", type=float, default=0.5)
    p.add_argument("--n-features", type=int, default=2)
    p.add_argument("--error-rates", type=float, nargs="*", default=[0.1, 0.5])
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_stream)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

