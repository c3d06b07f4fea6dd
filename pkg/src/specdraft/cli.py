"""Command-line entry point: ``python -m specdraft <command>``.

Exit codes: 0 success, 2 configuration error, 3 infeasible or constraint
error, 4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .core import (
    BadCosts,
    BadTemperature,
    BadWeights,
    ConfigError,
    ConstraintViolation,
    CorpusTooShort,
    EmptyCorpus,
    FormatError,
    Infeasible,
    UnknownSymbol,
    load_vocab,
    make_rng,
    save_vocab,
    tokenize,
)
from .drafter import load_drafter, save_drafter
from .harness import (
    ExperimentConfig,
    Lab,
    compare_architectures,
    config_from_items,
    config_items,
    load_config,
    prepare,
    read_corpus,
    read_report,
    read_run_csv,
    run_lab,
    summarize,
    write_comparison_csv,
    write_report,
)
from .ngram import load_model, save_model
from .theory import theorem1_sweep, write_sweep_csv

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4

VOCAB_FILE, TARGET_FILE, DRAFTER_FILE = "vocab.txt", "target.ngram", "drafter.txt"


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.set:
        items: dict[str, dict[str, str]] = {}
        for section, key, value in config_items(config):
            items.setdefault(section, {})[key] = value
        for assignment in args.set:
            name, sep, value = assignment.partition("=")
            section, dot, key = name.strip().partition(".")
            if not sep or not dot:
                raise ConfigError(f"--set expects section.key=value, got {assignment!r}")
            items.setdefault(section, {})[key] = value.strip()
        config = config_from_items(items)
    return config.validate()


def _load_lab(config: ExperimentConfig, models: Path) -> Lab:
    vocab = load_vocab(models / VOCAB_FILE)
    tokens = np.asarray(tokenize(read_corpus(config), vocab), dtype=np.int64)
    cut = int(len(tokens) * 0.9)
    return Lab(config, vocab, tokens[:cut], tokens[cut:],
               load_model(models / TARGET_FILE), load_drafter(models / DRAFTER_FILE))


def cmd_train(args) -> int:
    config = _config(args)
    lab = prepare(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_vocab(lab.vocab, out / VOCAB_FILE)
    save_model(lab.target, out / TARGET_FILE, VOCAB_FILE)
    save_drafter(lab.drafter, out / DRAFTER_FILE)
    print(f"trained {lab.drafter.architecture} drafter, vocab {lab.vocab.size}, "
          f"{len(lab.train_tokens)} training tokens -> {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    config = _config(args)
    lab = _load_lab(config, Path(args.models)) if args.models else prepare(config)
    report = run_lab(lab)
    if args.csv:
        write_report(report, "csv", args.csv)
    if args.text:
        write_report(report, "text", args.text)
    rates = " ".join(f"{r:.3f}" for r in report.per_position_accept_rate)
    print(f"rounds {report.rounds}  tau {report.tau:.4f}  cost_speedup {report.cost_speedup:.4f}")
    print(f"per-position acceptance {rates}")
    if report.lossless is not None:
        print(f"lossless vs vanilla: {'yes' if report.lossless else 'NO'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    config = _config(args)
    results = compare_architectures(config)
    if args.out:
        write_comparison_csv(results, args.out)
    for r in results:
        print(f"{r.architecture:14s} tau {r.tau:.4f}  cost_speedup {r.cost_speedup:.4f}")
    return EXIT_OK


def cmd_theory(args) -> int:
    rows = theorem1_sweep(args.n, make_rng(args.seed), (args.d_min, args.d_max), args.magnitude)
    if args.out:
        write_sweep_csv(rows, args.out)
    bad = [r for r in rows if not r.ok]
    for r in bad:
        print(f"violation: D={r.D} d={r.d} E_orig={r.e_orig!r} E_con={r.e_con!r} E_imp={r.e_imp!r}")
    print(f"{len(rows)} instances, {len(bad)} violations")
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.input)
    head = src.read_text().split("\n", 1)[0]
    if head.startswith("report"):
        report = read_report(src)
    else:
        config = _config(args)
        # a run CSV has only the round table; aggregates come from it and the config
        report = summarize(read_run_csv(src), config)
    write_report(report, args.to, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specdraft", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="INI experiment config (defaults if omitted)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one config value; repeatable")
        return p

    p = with_config(sub.add_parser("train", help="train and save the target and the drafter"))
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = with_config(sub.add_parser("run", help="run an experiment"))
    p.add_argument("--models", help="directory written by 'train'; trains afresh if omitted")
    p.add_argument("--csv", help="write the per-round CSV here")
    p.add_argument("--text", help="write the full structured-text report here")
    p.set_defaults(func=cmd_run)

    p = with_config(sub.add_parser("compare", help="hybrid vs serial-only vs parallel-only"))
    p.add_argument("--out", help="comparison CSV path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("theory", help="random check of the profile-redistribution ordering")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-min", type=int, default=2)
    p.add_argument("--d-max", type=int, default=12)
    p.add_argument("--magnitude", type=float, default=1.0)
    p.add_argument("--out", help="sweep CSV path")
    p.set_defaults(func=cmd_theory)

    p = with_config(sub.add_parser("report", help="convert a report between formats"))
    p.add_argument("input", help="structured-text report or run CSV")
    p.add_argument("--to", choices=("csv", "text"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BadWeights, BadTemperature, BadCosts, UnknownSymbol,
            EmptyCorpus, CorpusTooShort) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (Infeasible, ConstraintViolation) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, FormatError) as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
