"""Command-line surface over the pipeline stages and the rewriter.

Exit codes: 0 success, 1 runtime or stage failure, 2 usage or config error.
Every subcommand takes `--config FILE` plus repeatable `--set key=value`
overrides; explicit flags (`--seed`, `--workdir`, ...) win over `--set`,
which wins over the config file, which wins over built-in defaults.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config
from .errors import FormatError, PipelineError
from .lm import load_text, save_binary, save_text
from .rewriter import (
    _stage_align,
    _stage_extract,
    _stage_lm,
    _stage_prep,
    _stage_prune,
    _stage_tune,
    evaluate_batch,
    load_bundle,
    rewrite,
    train_all,
)


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="querysmt",
        description="Statistical query rewriting: training pipeline and rewriter.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, needs_input: bool = False) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument(
            "--set",
            action="append",
            default=[],
            dest="overrides",
            metavar="KEY=VALUE",
            help="override one config key (repeatable)",
        )
        sp.add_argument("--seed", type=int, help="random seed (default 42)")
        sp.add_argument("--threads", type=int, help="worker cap")
        sp.add_argument("--workdir", help="pipeline working directory")
        if needs_input:
            sp.add_argument("--input", help="raw query<TAB>title<TAB>rank TSV")
        return sp

    add("prep", "prefilter + similarity gate, dev split, parallel corpus files", needs_input=True)
    add("align", "train IBM Model 1 tables in both directions")
    add("extract", "extract and score the full phrase table")
    add("prune", "prune the phrase table by joint count")
    sp = add("lm-train", "estimate the trigram LM, write the text model")
    sp.add_argument("--out", help="text model path (default <workdir>/lm.txt)")
    sp = add("lm-bin", "compile a text LM to the binary format")
    sp.add_argument("--in", dest="lm_in", help="text model path (default <workdir>/lm.txt)")
    sp.add_argument("--out", help="binary model path (default <workdir>/lm.qrlm)")
    add("tune", "MERT-tune feature weights on the dev split")
    sp = add("train-all", "run the whole pipeline and write the bundle", needs_input=True)
    sp.add_argument("--resume", action="store_true", help="skip stages whose artifacts exist")
    sp = add("rewrite", "rewrite one query, or stdin lines when no query is given")
    sp.add_argument("query", nargs="?", help="query text; omit to read lines from stdin")
    sp.add_argument("--nbest", action="store_true", help="print the full n-best with scores")
    sp = add("eval", "rewrite labeled queries and tally the labels")
    sp.add_argument("--input", required=True, help="query<TAB>label TSV")
    sp.add_argument("--out", help="report TSV path (default stdout)")
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides: dict[str, str] = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.threads is not None:
        overrides["threads"] = str(args.threads)
    if args.workdir:
        overrides["workdir"] = args.workdir
    if getattr(args, "input", None) and args.command != "eval":
        overrides["raw_tsv"] = args.input
    return load_config(args.config, overrides)


def _workdir(cfg: PipelineConfig) -> Path:
    if not cfg.workdir:
        raise ConfigError("no workdir set (use --workdir or the workdir config key)")
    wd = Path(cfg.workdir)
    wd.mkdir(parents=True, exist_ok=True)
    return wd


def _cmd_rewrite(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    bundle = load_bundle(_workdir(cfg))
    if args.query is not None:
        result = rewrite(args.query, bundle)
        if args.nbest:
            from .corpus_io import normalize_text, tokenize
            from .decoder import decode

            tokens = tokenize(normalize_text(args.query, bundle.norm))
            for rank, entry in enumerate(decode(bundle, tokens), start=1):
                print(f"{rank}\t{entry.score:.6f}\t{entry.surface}")
        else:
            print(result.rewritten)
        return 0
    if args.nbest:
        raise ConfigError("--nbest requires a query argument (not stdin batch mode)")
    for line in sys.stdin:
        line = line.rstrip("\n")
        if not line.strip():
            print("")
            continue
        try:
            print(rewrite(line, bundle).rewritten)
        except ValueError as exc:
            # keep the one-output-line-per-input-line contract
            _say(f"warning: {exc!r} for input line; echoing blank")
            print("")
    return 0


def _cmd_eval(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    bundle = load_bundle(_workdir(cfg))
    pairs: list[tuple[str, str]] = []
    with open(args.input, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise FormatError(f"{args.input}:{lineno}: expected query<TAB>label")
            pairs.append((cols[0], cols[1]))
    report = evaluate_batch(pairs, bundle)
    if args.out:
        Path(args.out).write_text(report.to_tsv(), encoding="utf-8")
    else:
        sys.stdout.write(report.to_tsv())
    for label in sorted(report.counts):
        _say(f"{label}\t{report.counts[label]}")
    _say(f"good_fraction\t{report.good_fraction:.4f}")
    return 0


def _dispatch(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    command = args.command

    if command == "rewrite":
        return _cmd_rewrite(args, cfg)
    if command == "eval":
        return _cmd_eval(args, cfg)

    wd = _workdir(cfg)
    if command == "prep":
        if not cfg.raw_tsv:
            raise ConfigError("no input corpus (use --input or the raw_tsv config key)")
        _stage_prep(cfg, wd)
        _say(f"reports: {wd / 'prefilter_report.txt'}, {wd / 'simfilter_report.txt'}")
        return 0
    if command == "align":
        _stage_align(cfg, wd)
        return 0
    if command == "extract":
        _stage_extract(cfg, wd)
        return 0
    if command == "prune":
        _stage_prune(cfg, wd)
        return 0
    if command == "lm-train":
        from .corpus_io import read_parallel
        from .lm import count_ngrams, estimate_kneser_ney

        train = read_parallel(wd / "train.src", wd / "train.tgt")
        counts = count_ngrams(tgt for _, tgt in train)
        model = estimate_kneser_ney(counts, discount=cfg.lm_discount, min_count=cfg.lm_min_count)
        out = Path(args.out) if args.out else wd / "lm.txt"
        save_text(model, out)
        (wd / "lm_report.txt").write_text(
            f"sentences\t{counts.total_sentences}\nvocab\t{model.vocab_size}\n"
            f"unigrams\t{len(counts.unigrams)}\nbigrams\t{len(counts.bigrams)}\n"
            f"trigrams\t{len(counts.trigrams)}\n",
            encoding="utf-8",
        )
        _say(f"text model: {out}")
        return 0
    if command == "lm-bin":
        src = Path(args.lm_in) if args.lm_in else wd / "lm.txt"
        out = Path(args.out) if args.out else wd / "lm.qrlm"
        save_binary(load_text(src), out)
        _say(f"binary model: {out}")
        return 0
    if command == "tune":
        _say(f"seed = {cfg.seed}")
        _stage_tune(cfg, wd)
        return 0
    if command == "train-all":
        if not cfg.raw_tsv:
            raise ConfigError("no input corpus (use --input or the raw_tsv config key)")
        _say(f"seed = {cfg.seed}")
        train_all(cfg, resume=args.resume, log=_say)
        _say(f"bundle: {wd / 'bundle.manifest'}")
        return 0
    raise ConfigError(f"unknown command: {command}")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return _dispatch(args)
    except ConfigError as exc:
        _say(f"config error: {exc}")
        return 2
    except PipelineError as exc:
        _say(f"error: {exc}")
        return 1
    except (FormatError, ValueError, OSError) as exc:
        _say(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
