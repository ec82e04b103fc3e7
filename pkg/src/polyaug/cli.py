"""Command-line entry point: one subcommand per pipeline stage plus ``run``.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from threadpoolctl import threadpool_limits

from .balance import BalanceConfig, balance_augment
from .corpus import (CorpusError, compute_stats, format_stats_tsv, read_corpus, read_unlabeled, split_corpus,
                     write_corpus)
from .g2p import G2PParams, train_g2p
from .lexicon import LexiconError, load_lexicon, write_lexicon
from .modelio import ModelFileError, load_model, save_model
from .p2g import P2GParams, train_p2g
from .pipeline import ConfigError, ExperimentConfig, PipelineError, evaluate, run_experiment
from .screen import (ScreenConfig, ScreenError, back_translate, format_screen_tsv, parse_window,
                     read_pseudo_labels, screening_stats, write_pseudo_labels)
from .synth import SynthConfig, generate_synthetic

log = logging.getLogger("polyaug")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
DATA_ERRORS = (LexiconError, CorpusError, ScreenError, ConfigError, ModelFileError, ValueError, OSError,
               KeyError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _window(value: str):
    try:
        return parse_window(value)
    except ScreenError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return n


def _add_lexicon(p):
    p.add_argument("--lexicon", required=True, type=Path, help="character table (char TAB syllables)")
    p.add_argument("--words", type=Path, help="word table (word TAB syllables TAB POS)")


def _add_common(p, seed=False, threads=False):
    p.add_argument("--quiet", action="store_true", help="suppress progress output (errors are still shown)")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    if threads:
        p.add_argument("--threads", type=_positive, default=1, help="worker threads (default 1); results do not depend on it")


def _add_g2p_hp(p):
    d = G2PParams()
    p.add_argument("--radius", type=int, default=d.radius, help=f"context radius r (default {d.radius})")
    p.add_argument("--hidden", type=int, default=d.hidden, help=f"hidden width (default {d.hidden})")
    p.add_argument("--d-char", type=int, default=d.d_char, help=f"character embedding size (default {d.d_char})")
    p.add_argument("--d-pos", type=int, default=d.d_pos, help=f"POS embedding size (default {d.d_pos})")
    p.add_argument("--d-bmes", type=int, default=d.d_bmes, help=f"B/M/E/S embedding size (default {d.d_bmes})")
    p.add_argument("--lr", type=float, default=d.lr, help=f"learning rate (default {d.lr})")
    p.add_argument("--epochs", type=int, default=d.epochs, help=f"training epochs (default {d.epochs})")
    p.add_argument("--batch-size", type=int, default=d.batch_size, help=f"mini-batch size (default {d.batch_size})")


def _add_p2g_hp(p):
    d = P2GParams()
    p.add_argument("--radius", type=int, default=d.radius, help=f"context radius r (default {d.radius})")
    p.add_argument("--hidden", type=int, default=d.hidden, help=f"hidden width (default {d.hidden})")
    p.add_argument("--lr", type=float, default=d.lr, help=f"learning rate (default {d.lr})")
    p.add_argument("--epochs", type=int, default=d.epochs, help=f"training epochs (default {d.epochs})")
    p.add_argument("--batch-size", type=int, default=d.batch_size, help=f"mini-batch size (default {d.batch_size})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polyaug", description="Polyphone pseudo-label augmentation toolkit.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("stats", help="per-character pronunciation statistics as TSV")
    _add_lexicon(p)
    p.add_argument("--corpus", required=True, type=Path, help="annotated JSONL corpus")
    p.add_argument("--denominator", choices=("sites", "chars"), default="sites",
                   help="frequency denominator: polyphone sites (default) or all characters")
    p.add_argument("--out", type=Path, help="output TSV (default: standard output)")
    _add_common(p)

    p = sub.add_parser("split", help="split a corpus into train/dev/test")
    _add_lexicon(p)
    p.add_argument("--corpus", required=True, type=Path, help="annotated JSONL corpus")
    p.add_argument("--ratios", type=float, nargs=3, default=(0.8, 0.1, 0.1), metavar=("TRAIN", "DEV", "TEST"),
                   help="split ratios (default 0.8 0.1 0.1)")
    p.add_argument("--out-dir", required=True, type=Path, help="writes train.jsonl, dev.jsonl, test.jsonl")
    _add_common(p, seed=True)

    p = sub.add_parser("synth", help="generate a synthetic lexicon and corpora")
    d = SynthConfig()
    p.add_argument("--out-dir", required=True, type=Path,
                   help="writes chars.tsv, words.tsv, labeled.jsonl, unlabeled.txt, truth.jsonl (and test.jsonl)")
    p.add_argument("--polyphones", type=int, default=d.n_polyphones, help=f"number of polyphones (default {d.n_polyphones})")
    p.add_argument("--prons", type=int, default=d.prons_per_polyphone,
                   help=f"pronunciations per polyphone (default {d.prons_per_polyphone})")
    p.add_argument("--skew", type=float, nargs="+", help="pronunciation distribution, e.g. 0.9 0.1 (default uniform)")
    p.add_argument("--determinism", type=float, default=d.determinism,
                   help=f"probability a context cue agrees with the pronunciation (default {d.determinism})")
    p.add_argument("--cue-slots", type=int, choices=(1, 2), default=d.cue_slots,
                   help=f"cue characters per polyphone occurrence (default {d.cue_slots})")
    p.add_argument("--labeled", type=int, default=d.n_labeled, help=f"labeled sentences (default {d.n_labeled})")
    p.add_argument("--unlabeled", type=int, default=d.n_unlabeled, help=f"unlabeled lines (default {d.n_unlabeled})")
    p.add_argument("--test", type=int, default=d.n_test, help="extra held-out labeled sentences (default 0)")
    _add_common(p, seed=True)

    p = sub.add_parser("train-g2p", help="train a polyphone classifier")
    _add_lexicon(p)
    p.add_argument("--train", required=True, type=Path, help="annotated JSONL training corpus")
    p.add_argument("--dev", type=Path, help="annotated JSONL dev corpus for epoch selection")
    p.add_argument("--out", required=True, type=Path, help="model file to write")
    _add_g2p_hp(p)
    _add_common(p, seed=True)

    p = sub.add_parser("train-p2g", help="train a pinyin-to-character model")
    _add_lexicon(p)
    p.add_argument("--train", required=True, type=Path, help="annotated JSONL training corpus")
    p.add_argument("--dev", type=Path, help="annotated JSONL dev corpus for epoch selection")
    p.add_argument("--out", required=True, type=Path, help="model file to write")
    _add_p2g_hp(p)
    _add_common(p, seed=True)

    p = sub.add_parser("augment", help="back-translate unlabeled text and screen pseudo-labels")
    _add_lexicon(p)
    p.add_argument("--g2p-model", required=True, type=Path, help="primary G2P model")
    p.add_argument("--p2g-model", required=True, type=Path, help="P2G model")
    p.add_argument("--unlabeled", required=True, type=Path, help="plain text, one sentence per line")
    p.add_argument("--out", required=True, type=Path, help="pseudo-label JSONL to write")
    p.add_argument("--window", type=_window, default=5, help="window length (odd integer) or 'sentence' (default 5)")
    p.add_argument("--multi-model", action="store_true", help="also require agreement of all scorer models")
    p.add_argument("--scorer-model", type=Path, action="append", default=[],
                   help="extra G2P model for multi-model scoring (repeatable)")
    p.add_argument("--keep-rejected", action="store_true", help="also write rejected pseudo-labels")
    p.add_argument("--truth", type=Path, help="annotated truth for the unlabeled lines, to measure precision")
    p.add_argument("--stats-out", type=Path, help="screening statistics TSV")
    _add_common(p, threads=True)

    p = sub.add_parser("balance", help="add accepted pseudo-labels until frequency floors hold")
    _add_lexicon(p)
    b = BalanceConfig()
    p.add_argument("--corpus", required=True, type=Path, help="annotated JSONL base corpus")
    p.add_argument("--pool", required=True, type=Path, help="pseudo-label JSONL (only accepted entries are used)")
    p.add_argument("--out", required=True, type=Path, help="augmented JSONL corpus to write")
    p.add_argument("--report", type=Path, help="balance report TSV (default: standard output)")
    p.add_argument("--char-floor", type=float, default=b.char_floor, help=f"character frequency floor (default {b.char_floor})")
    p.add_argument("--pron-floor", type=float, default=b.pron_floor,
                   help=f"within-character pronunciation floor (default {b.pron_floor})")
    p.add_argument("--max-added-per-char", type=int, help="cap on additions per character")
    p.add_argument("--denominator", choices=("sites", "chars"), default="sites", help="character floor denominator")
    _add_common(p)

    p = sub.add_parser("evaluate", help="site accuracy report for a G2P model")
    _add_lexicon(p)
    p.add_argument("--model", required=True, type=Path, help="G2P model file")
    p.add_argument("--test", required=True, type=Path, help="annotated JSONL test corpus")
    p.add_argument("--out", type=Path, help="report TSV (default: standard output)")
    _add_common(p)

    p = sub.add_parser("run", help="end-to-end experiment from a JSON config")
    p.add_argument("--config", required=True, type=Path, help="experiment config (JSON)")
    p.add_argument("--out", required=True, type=Path, help="output directory for models and reports")
    p.add_argument("--seed", type=int, help="override the config's global seed")
    _add_common(p, threads=True)
    return parser


def _lex(args):
    return load_lexicon(args.lexicon, args.words)


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def cmd_stats(args):
    lex = _lex(args)
    stats = compute_stats(read_corpus(args.corpus, lex), lex, args.denominator)
    _emit(format_stats_tsv(stats), args.out)


def cmd_split(args):
    lex = _lex(args)
    parts = split_corpus(read_corpus(args.corpus, lex), tuple(args.ratios), args.seed)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "dev", "test"), parts):
        write_corpus(args.out_dir / f"{name}.jsonl", part)
    log.info("split sizes %s", [len(p) for p in parts])


def cmd_synth(args):
    cfg = SynthConfig(
        n_polyphones=args.polyphones, prons_per_polyphone=args.prons,
        skew=tuple(args.skew) if args.skew else None, determinism=args.determinism, cue_slots=args.cue_slots,
        n_labeled=args.labeled, n_unlabeled=args.unlabeled, n_test=args.test,
    )
    data = generate_synthetic(cfg, args.seed)
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_lexicon(data.lexicon, out / "chars.tsv", out / "words.tsv")
    write_corpus(out / "labeled.jsonl", data.labeled)
    with open(out / "unlabeled.txt", "w", encoding="utf-8") as f:
        f.writelines(t + "\n" for t in data.unlabeled)
    write_corpus(out / "truth.jsonl", data.truth)
    if data.test:
        write_corpus(out / "test.jsonl", data.test)


def cmd_train_g2p(args):
    lex = _lex(args)
    hp = G2PParams(radius=args.radius, d_char=args.d_char, d_pos=args.d_pos, d_bmes=args.d_bmes, hidden=args.hidden,
                   lr=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    dev = read_corpus(args.dev, lex) if args.dev else None
    save_model(train_g2p(read_corpus(args.train, lex), lex, hp, dev), args.out)


def cmd_train_p2g(args):
    lex = _lex(args)
    hp = P2GParams(radius=args.radius, hidden=args.hidden, lr=args.lr, epochs=args.epochs,
                   batch_size=args.batch_size, seed=args.seed)
    dev = read_corpus(args.dev, lex) if args.dev else None
    save_model(train_p2g(read_corpus(args.train, lex), lex, hp, dev), args.out)


def cmd_augment(args):
    if args.multi_model and not args.scorer_model:
        raise UsageError("--multi-model needs at least one --scorer-model")
    lex = _lex(args)
    g2p = load_model(args.g2p_model, lex, "g2p")
    p2g = load_model(args.p2g_model, lex, "p2g")
    scorers = [load_model(p, lex, "g2p") for p in args.scorer_model]
    cfg = ScreenConfig(window=args.window, multi_model=args.multi_model, threads=args.threads)
    lines = read_unlabeled(args.unlabeled)
    labels = back_translate(g2p, p2g, lex, lines, cfg, scorers, quiet=args.quiet)
    write_pseudo_labels(args.out, labels, keep_rejected=args.keep_rejected)
    truth = read_corpus(args.truth, lex, labeled=False) if args.truth else None
    rows = screening_stats(labels, truth, cfg.windows)
    if args.stats_out:
        args.stats_out.write_text(format_screen_tsv(rows), encoding="utf-8")
    log.info("%d sites, %d accepted", len(labels), sum(pl.accepted for pl in labels))


def cmd_balance(args):
    lex = _lex(args)
    cfg = BalanceConfig(char_floor=args.char_floor, pron_floor=args.pron_floor,
                        max_added_per_char=args.max_added_per_char, denominator=args.denominator)
    pool = [pl for pl in read_pseudo_labels(args.pool) if pl.accepted]
    augmented, report = balance_augment(read_corpus(args.corpus, lex), pool, lex, cfg)
    write_corpus(args.out, augmented)
    _emit(report.to_tsv(), args.report)
    for ch in report.shortfalls:
        log.warning("floor not met for %s", ch)


def cmd_evaluate(args):
    lex = _lex(args)
    model = load_model(args.model, lex, "g2p")
    report = evaluate(model, lex, read_corpus(args.test, lex), {"model": args.model.name})
    _emit(report.to_tsv(), args.out)


def cmd_run(args):
    if args.seed is None:
        cfg = ExperimentConfig.load(args.config)
    else:
        try:
            doc = json.loads(args.config.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{args.config}: invalid JSON ({e.msg} at line {e.lineno})") from None
        # the global seed also seeds g2p/p2g unless they set their own
        cfg = ExperimentConfig.from_dict({**doc, "seed": args.seed}, args.config.parent)
    cfg = replace(cfg, threads=args.threads)
    result = run_experiment(cfg, args.out, quiet=args.quiet)
    log.info("base %.4f augmented %.4f", result.base.accuracy, result.augmented.accuracy)


COMMANDS = {
    "stats": cmd_stats, "split": cmd_split, "synth": cmd_synth, "train-g2p": cmd_train_g2p,
    "train-p2g": cmd_train_p2g, "augment": cmd_augment, "balance": cmd_balance, "evaluate": cmd_evaluate,
    "run": cmd_run,
}


def _setup_logging(quiet: bool) -> None:
    root = logging.getLogger("polyaug")
    root.handlers[:] = []
    h = logging.StreamHandler(sys.stderr)
    h.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root.addHandler(h)
    root.setLevel(logging.WARNING if quiet else logging.INFO)
    root.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _setup_logging(args.quiet)
    try:
        with threadpool_limits(limits=1, user_api="blas"):
            COMMANDS[args.command](args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"polyaug {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA if isinstance(e.cause, DATA_ERRORS) else EXIT_INTERNAL
    except DATA_ERRORS as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
