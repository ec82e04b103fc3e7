"""End-to-end augmentation experiment: train, back-translate, screen, balance, retrain, evaluate."""

from __future__ import annotations

import json
import logging
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Sequence

from threadpoolctl import threadpool_limits

from .balance import BalanceConfig, BalanceReport, balance_augment
from .corpus import AnnotatedSentence, CorpusError, read_corpus, read_unlabeled, split_corpus, write_corpus
from .g2p import G2PModel, G2PParams, corpus_sites, predict_sites, train_g2p
from .lexicon import Lexicon, Syllable, load_lexicon
from .modelio import save_model
from .p2g import P2GParams, train_p2g
from .screen import (ScreenConfig, ScreenRow, back_translate, format_screen_tsv, screening_stats,
                     write_pseudo_labels)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class EvalReport:
    total: int
    correct: int
    per_char: dict[str, tuple[int, int]]
    per_pron: dict[tuple[str, Syllable], tuple[int, int]]
    confusion: Counter
    config: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def accuracy(self) -> float:
        return self.correct / self.total

    def char_accuracy(self, ch: str) -> float:
        n, c = self.per_char[ch]
        return c / n

    def pron_accuracy(self, ch: str, syl: Syllable) -> float:
        n, c = self.per_pron[ch, syl]
        return c / n

    def to_tsv(self) -> str:
        """Report without wall-clock time so reruns compare byte for byte."""
        lines = []
        for k, v in self.config.items():
            lines.append(f"# {k}={json.dumps(v, sort_keys=True, ensure_ascii=False)}")
        lines.append(f"# overall\t{self.correct}/{self.total}\t{100 * self.accuracy:.2f}%")
        lines.append("character\tgold\tsites\tcorrect\taccuracy\tconfusion")
        for ch, (n, c) in self.per_char.items():
            lines.append(f"{ch}\t*\t{n}\t{c}\t{100 * c / n:.2f}%\t")
            for (pch, gold), (pn, pc) in self.per_pron.items():
                if pch != ch:
                    continue
                conf = " ".join(f"{pred}:{cnt}" for (cc, g, pred), cnt in sorted(
                    self.confusion.items(), key=lambda kv: str(kv[0][2])) if cc == ch and g == gold)
                lines.append(f"{ch}\t{gold}\t{pn}\t{pc}\t{100 * pc / pn:.2f}%\t{conf}")
        return "\n".join(lines) + "\n"


def evaluate_predictions(test_corpus: Sequence[AnnotatedSentence], predictions: Sequence[Syllable],
                         lex: Lexicon, config: dict | None = None) -> EvalReport:
    """Site-level accuracy for predictions listed in (sentence, site) order."""
    if not test_corpus:
        raise CorpusError("empty test corpus")
    per_char: dict[str, list[int]] = {}
    per_pron: dict[tuple[str, Syllable], list[int]] = {}
    confusion: Counter = Counter()
    it = iter(predictions)
    total = correct = 0
    for sent in test_corpus:
        for index, gold in sent.sites:
            pred = next(it)
            ch = sent.text[index]
            ok = int(pred == gold)
            total += 1
            correct += ok
            per_char.setdefault(ch, [0, 0])
            per_char[ch][0] += 1
            per_char[ch][1] += ok
            per_pron.setdefault((ch, gold), [0, 0])
            per_pron[ch, gold][0] += 1
            per_pron[ch, gold][1] += ok
            confusion[ch, gold, pred] += 1
    if total == 0:
        raise CorpusError("test corpus has no annotated sites")
    order = {c: i for i, c in enumerate(lex.char_inventory)}
    chars = sorted(per_char, key=lambda c: order.get(c, len(order)))
    prons = sorted(per_pron, key=lambda k: (order.get(k[0], len(order)), lex.pinyin_id.get(k[1], 0)))
    return EvalReport(
        total, correct,
        {c: tuple(per_char[c]) for c in chars},
        {k: tuple(per_pron[k]) for k in prons},
        confusion, dict(config or {}),
    )


def evaluate(model: G2PModel | Callable[[str, int], Syllable], lex: Lexicon,
             test_corpus: Sequence[AnnotatedSentence], config: dict | None = None) -> EvalReport:
    """Accuracy per annotated site. ``model`` may also be any ``f(text, index) -> Syllable``."""
    if not test_corpus:
        raise CorpusError("empty test corpus")
    t0 = time.perf_counter()
    if isinstance(model, G2PModel):
        batch, _ = corpus_sites(test_corpus, lex)
        preds = [lex.pinyin_inventory[i] for i in predict_sites(model, lex, batch).tolist()]
    else:
        preds = [model(s.text, i) for s in test_corpus for i, _ in s.sites]
    report = evaluate_predictions(test_corpus, preds, lex, config)
    report.wall_clock = time.perf_counter() - t0
    return report


def _build(cls, section: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(sorted(unknown))}")
    try:
        return cls(**section)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid '{name}' section: {e}") from None


@dataclass
class ExperimentConfig:
    """Every path is resolved relative to the config file's directory."""

    char_table: Path
    word_table: Path | None = None
    corpus: Path | None = None
    train: Path | None = None
    dev: Path | None = None
    test: Path | None = None
    unlabeled: Path | None = None
    truth: Path | None = None
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    g2p: G2PParams = field(default_factory=G2PParams)
    p2g: P2GParams = field(default_factory=P2GParams)
    screen: ScreenConfig = field(default_factory=ScreenConfig)
    balance: BalanceConfig = field(default_factory=BalanceConfig)
    seed: int = 0
    threads: int = 1

    TOP_KEYS = ("char_table", "word_table", "corpus", "train", "dev", "test", "unlabeled", "truth", "split",
                "g2p", "p2g", "screen", "balance", "seed", "threads")
    PATH_KEYS = ("char_table", "word_table", "corpus", "train", "dev", "test", "unlabeled", "truth")

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - set(cls.TOP_KEYS)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        if "char_table" not in doc:
            raise ConfigError("config needs 'char_table'")
        base_dir = base_dir or Path(".")
        seed = doc.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("'seed' must be an integer")
        kw = {}
        for k in cls.PATH_KEYS:
            if doc.get(k) is not None:
                p = Path(doc[k])
                kw[k] = p if p.is_absolute() else base_dir / p
                if not kw[k].exists():
                    raise ConfigError(f"'{k}' file not found: {kw[k]}")
        if "corpus" not in kw and not all(k in kw for k in ("train", "test")):
            raise ConfigError("config needs 'corpus' or both 'train' and 'test'")
        screen = dict(doc.get("screen", {}))
        if "report_windows" in screen:
            screen["report_windows"] = tuple(screen["report_windows"])
        cfg = cls(
            **kw,
            split=tuple(doc.get("split", (0.8, 0.1, 0.1))),
            g2p=_build(G2PParams, {"seed": seed, **doc.get("g2p", {})}, "g2p"),
            p2g=_build(P2GParams, {"seed": seed, **doc.get("p2g", {})}, "p2g"),
            screen=_build(ScreenConfig, screen, "screen"),
            balance=_build(BalanceConfig, doc.get("balance", {}), "balance"),
            seed=seed,
            threads=int(doc.get("threads", 1)),
        )
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None
        return cls.from_dict(doc, path.parent)

    def echo(self) -> dict:
        """Config summary for reports: no paths, so reports do not depend on the run location."""
        return {
            "g2p": asdict(self.g2p),
            "p2g": asdict(self.p2g),
            "screen": {"window": self.screen.window, "multi_model": self.screen.multi_model,
                       "model_count": self.screen.model_count},
            "balance": asdict(self.balance),
            "seed": self.seed,
        }


def scorer_params(base: G2PParams, count: int) -> list[G2PParams]:
    """Structurally different G2P variants for multi-model scoring (excluding ``base``)."""
    out = []
    for i in range(1, count):
        step = (i + 1) // 2
        radius = base.radius + step if i % 2 else max(1, base.radius - step)
        hidden = base.hidden if i % 2 else base.hidden * 3 // 2
        out.append(replace(base, radius=radius, hidden=hidden, seed=base.seed + i))
    return out


@dataclass
class ExperimentResult:
    base: EvalReport
    augmented: EvalReport
    screen_rows: list[ScreenRow]
    balance: BalanceReport
    pool_size: int
    excluded_lines: int = 0
    pseudo_labels: list = field(default_factory=list, repr=False)


def _stage(name):
    class _Ctx:
        def __enter__(self):
            log.info("stage: %s", name)

        def __exit__(self, et, ev, tb):
            if ev is not None and not isinstance(ev, PipelineError):
                raise PipelineError(name, ev) from ev
    return _Ctx()


def run_experiment(config: ExperimentConfig, out_dir, quiet: bool = True) -> ExperimentResult:
    """Run every stage and write the artifacts into ``out_dir``.

    The retrained model reuses the base hyperparameters and seed with a fresh
    initialization, so the only difference between the two reports is data.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # single-threaded BLAS keeps float results independent of the worker count
    with threadpool_limits(limits=1, user_api="blas"):
        return _run(config, out, quiet)


def _run(config: ExperimentConfig, out: Path, quiet: bool) -> ExperimentResult:
    with _stage("load"):
        lex = load_lexicon(config.char_table, config.word_table)
        if config.corpus is not None:
            train, dev, test = split_corpus(read_corpus(config.corpus, lex), config.split, config.seed)
        else:
            train = read_corpus(config.train, lex)
            dev = read_corpus(config.dev, lex) if config.dev else []
            test = read_corpus(config.test, lex)
        lines = read_unlabeled(config.unlabeled) if config.unlabeled else []
        truth = read_corpus(config.truth, lex, labeled=False) if config.truth else None
    return run_stages(config, lex, train, dev, test, lines, truth, out, quiet)


def _write(out: Path | None, name: str, text: str) -> None:
    if out is not None:
        (out / name).write_text(text, encoding="utf-8")


def _save(out: Path | None, name: str, model) -> None:
    if out is not None:
        save_model(model, out / name)


def run_stages(config: ExperimentConfig, lex: Lexicon, train, dev, test, lines: Sequence[str],
               truth=None, out: Path | None = None, quiet: bool = True) -> ExperimentResult:
    """The experiment on in-memory data; artifacts are written only when ``out`` is given."""
    with _stage("check-splits"):
        test_ids = {id(s) for s in test}
        if test_ids & {id(s) for s in list(train) + list(dev)}:
            raise CorpusError("test split overlaps training data")
        # unlabeled lines identical to a test sentence must not feed training
        test_texts = {s.text for s in test}
        excluded = sum(1 for t in lines if t in test_texts)
        if excluded:
            lines = ["" if t in test_texts else t for t in lines]

    echo = config.echo()
    with _stage("train-base"):
        base = train_g2p(train, lex, config.g2p, dev)
        _save(out, "base_model", base)
        p2g = train_p2g(train, lex, config.p2g, dev)
        _save(out, "p2g_model", p2g)
        scorers = []
        if config.screen.multi_model:
            for i, hp in enumerate(scorer_params(config.g2p, config.screen.model_count), 1):
                m = train_g2p(train, lex, hp, dev)
                _save(out, f"scorer_model_{i}", m)
                scorers.append(m)

    with _stage("evaluate-base"):
        base_report = evaluate(base, lex, test, echo)
        _write(out, "report_base.tsv", base_report.to_tsv())

    with _stage("back-translate"):
        screen_cfg = replace(config.screen, threads=config.threads)
        labels = back_translate(base, p2g, lex, lines, screen_cfg, scorers, quiet=quiet)
        if out is not None:
            write_pseudo_labels(out / "pseudo_labels.jsonl", labels)
        rows = screening_stats(labels, truth, screen_cfg.windows)
        _write(out, "screen_stats.tsv", format_screen_tsv(rows))

    with _stage("balance"):
        augmented, breport = balance_augment(train, [pl for pl in labels if pl.accepted], lex, config.balance)
        if test_ids & {id(s) for s in augmented}:
            raise CorpusError("augmented corpus contains test records")
        if out is not None:
            write_corpus(out / "augmented_corpus.jsonl", augmented)
        _write(out, "balance_report.tsv", breport.to_tsv())

    with _stage("retrain"):
        aug_model = train_g2p(augmented, lex, config.g2p, dev)
        _save(out, "augmented_model", aug_model)

    with _stage("evaluate-augmented"):
        aug_report = evaluate(aug_model, lex, test, echo)
        _write(out, "report_augmented.tsv", aug_report.to_tsv())

    log.info("base accuracy %.4f, augmented accuracy %.4f, added %d", base_report.accuracy,
             aug_report.accuracy, breport.added)
    return ExperimentResult(base_report, aug_report, rows, breport, len(labels), excluded, labels)


def starved_pronunciations(train: Sequence[AnnotatedSentence], lex: Lexicon, k: int = 3) -> list[tuple[str, Syllable]]:
    """The ``k`` (char, pronunciation) pairs with the lowest within-character training share."""
    from .corpus import compute_stats

    stats = compute_stats(train, lex)
    shares = []
    for ch, cs in stats.chars.items():
        for s, n in cs.pron_counts.items():
            shares.append((n / cs.count, lex.char_id[ch], lex.pinyin_id[s], ch, s))
    shares.sort()
    return [(ch, s) for *_, ch, s in shares[:k]]

