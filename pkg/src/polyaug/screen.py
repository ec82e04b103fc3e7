"""Pseudo-label generation and screening.

Unlabeled lines go through G2P to pinyin and back through P2G to text. A
polyphone site's label is kept when the reconstructed text matches the
original inside a window centred on the site (window length counts the site
itself, so 5 means two characters either side), and optionally when several
differently-shaped G2P models agree on it.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from . import kernels
from .corpus import AnnotatedSentence
from .g2p import G2PModel, SiteBatch, predict_sites
from .lexicon import Lexicon, Syllable
from .p2g import P2GModel, reconstruct
from .text_analysis import word_trie

log = logging.getLogger(__name__)

SENTENCE = "sentence"
Window = Union[int, str]


class ScreenError(ValueError):
    pass


def parse_window(value) -> Window:
    """Accept an odd positive integer or the literal ``sentence``."""
    if isinstance(value, str):
        if value.strip().lower() == SENTENCE:
            return SENTENCE
        try:
            value = int(value)
        except ValueError:
            raise ScreenError("window length must be odd or 'sentence'") from None
    if isinstance(value, bool) or not isinstance(value, int) or value < 1 or value % 2 == 0:
        raise ScreenError("window length must be odd or 'sentence'")
    return value


def window_radius(window: Window) -> int:
    """Kernel radius for a window; -1 encodes whole-sentence comparison."""
    return -1 if window == SENTENCE else (window - 1) // 2


def window_key(window: Window) -> str:
    return str(window)


def window_match(original: str, reconstructed: str, site_index: int, window_len: Window) -> bool:
    if len(original) != len(reconstructed):
        raise ScreenError(f"length mismatch: {len(original)} vs {len(reconstructed)}")
    if not 0 <= site_index < len(original):
        raise ScreenError(f"site index {site_index} out of range")
    window_len = parse_window(window_len)
    if window_len == SENTENCE:
        return original == reconstructed
    rho = (window_len - 1) // 2
    lo, hi = max(0, site_index - rho), min(len(original), site_index + rho + 1)
    return original[lo:hi] == reconstructed[lo:hi]


@dataclass(slots=True)
class PseudoLabel:
    source_line: int
    chars: str
    site_index: int
    predicted: Syllable
    reconstructed: str
    window_verdicts: dict[str, bool]
    multi_model_verdict: bool | None
    accepted: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "source_line": self.source_line,
                "chars": self.chars,
                "site_index": self.site_index,
                "predicted": str(self.predicted),
                "reconstructed": self.reconstructed,
                "window_verdicts": self.window_verdicts,
                "multi_model_verdict": self.multi_model_verdict,
                "accepted": self.accepted,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "PseudoLabel":
        o = json.loads(line)
        return cls(
            o["source_line"], o["chars"], o["site_index"], Syllable.parse(o["predicted"]), o["reconstructed"],
            {str(k): bool(v) for k, v in o["window_verdicts"].items()}, o["multi_model_verdict"], o["accepted"],
        )

    def as_sentence(self) -> AnnotatedSentence:
        return AnnotatedSentence(self.chars, ((self.site_index, self.predicted),), self.source_line)


@dataclass(frozen=True)
class ScreenConfig:
    window: Window = 5
    multi_model: bool = False
    model_count: int = 3
    report_windows: tuple = (1, 3, 5, 7, SENTENCE)
    chunk_size: int = 2048
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "window", parse_window(self.window))
        object.__setattr__(self, "report_windows", tuple(parse_window(w) for w in self.report_windows))
        if self.model_count < 2:
            raise ScreenError("multi-model scoring needs at least 2 models")
        if self.chunk_size < 1 or self.threads < 1:
            raise ScreenError("chunk_size and threads must be positive")

    @property
    def windows(self) -> list[Window]:
        out = list(self.report_windows)
        if self.window not in out:
            out.append(self.window)
        return out


def _check_fingerprints(lex: Lexicon, *models) -> None:
    for m in models:
        if m.fingerprint != lex.fingerprint:
            raise ScreenError(f"{m.role} model fingerprint {m.fingerprint} does not match lexicon {lex.fingerprint}")


def _warm(lex: Lexicon) -> None:
    # populate lazily built tables before worker threads share the lexicon
    for attr in ("pron_mask_matrix", "homophone_mask_matrix", "n_prons", "n_homophones", "default_pinyin",
                 "default_char", "polyphones"):
        getattr(lex, attr)
    word_trie(lex)


def _screen_chunk(lines, first_line, g2p_model, p2g_model, scorers, lex, config):
    batch = SiteBatch.from_texts(lines, lex)
    if len(batch.site_sent) == 0:
        return []
    pred = predict_sites(g2p_model, lex, batch)
    codes, offsets = batch.codes, batch.offsets
    syl = np.full(len(codes), -1, dtype=np.int32)
    known = codes >= 0
    syl[known] = lex.default_pinyin[codes[known]]
    g = offsets[batch.site_sent] + batch.site_pos
    syl[g] = pred
    recon = reconstruct(p2g_model, lex, syl, offsets)
    # unknown characters pass through untouched
    recon = np.where(codes < 0, codes, recon)
    windows = config.windows
    verdicts = kernels.window_verdicts(codes, recon, offsets, batch.site_sent, batch.site_pos,
                                       [window_radius(w) for w in windows]).astype(bool)
    unanimous = None
    if scorers:
        unanimous = np.ones(len(pred), dtype=bool)
        for m in scorers:
            unanimous &= predict_sites(m, lex, batch) == pred
    primary = windows.index(config.window)

    recon_text: dict[int, str] = {}
    out = []
    keys = [window_key(w) for w in windows]
    inv = lex.char_inventory
    for k, (s, p) in enumerate(zip(batch.site_sent.tolist(), batch.site_pos.tolist())):
        text = lines[s]
        if s not in recon_text:
            a, b = offsets[s], offsets[s + 1]
            recon_text[s] = "".join(
                text[i] if c < 0 else inv[c] for i, c in enumerate(recon[a:b].tolist())
            )
        v = verdicts[k]
        mm = None if unanimous is None else bool(unanimous[k])
        accepted = bool(v[primary]) and (not config.multi_model or bool(mm))
        out.append(PseudoLabel(
            first_line + s, text, p, lex.pinyin_inventory[pred[k]], recon_text[s],
            dict(zip(keys, map(bool, v))), mm, accepted,
        ))
    return out


def back_translate(
    g2p_model: G2PModel,
    p2g_model: P2GModel,
    lex: Lexicon,
    unlabeled_lines: Sequence[str],
    config: ScreenConfig | None = None,
    scorers: Sequence[G2PModel] = (),
    progress_every: int = 100_000,
    quiet: bool = True,
) -> list[PseudoLabel]:
    """One pseudo-label per polyphone site, ordered by (line, site).

    ``scorers`` are the extra G2P models for multi-model scoring; the primary
    model always votes too. Results do not depend on ``config.threads``: work
    is cut into fixed-size chunks and merged in order.
    """
    config = config or ScreenConfig()
    _check_fingerprints(lex, g2p_model, p2g_model, *scorers)
    if config.multi_model and len(scorers) + 1 < 2:
        raise ScreenError("multi-model scoring needs at least 2 models")
    _warm(lex)
    cs = config.chunk_size
    starts = range(0, len(unlabeled_lines), cs)

    def work(a):
        return _screen_chunk(unlabeled_lines[a:a + cs], a, g2p_model, p2g_model, scorers, lex, config)

    out: list[PseudoLabel] = []
    done = 0
    next_report = progress_every
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        for a, labels in zip(starts, pool.map(work, starts)):
            out.extend(labels)
            done = min(a + cs, len(unlabeled_lines))
            if not quiet and done >= next_report:
                log.info("back-translation: %d / %d lines", done, len(unlabeled_lines))
                next_report += progress_every
    return out


def multi_model_score(models: Sequence[G2PModel], lex: Lexicon, chars: str, site_index: int) -> Syllable | None:
    """The common prediction of all models, or None when any disagrees."""
    if len(models) < 2:
        raise ScreenError("multi-model scoring needs at least 2 models")
    _check_fingerprints(lex, *models)
    batch = SiteBatch.from_texts([chars], lex, ([0], [site_index]))
    preds = {int(predict_sites(m, lex, batch)[0]) for m in models}
    if len(preds) != 1:
        return None
    return lex.pinyin_inventory[preds.pop()]


def read_pseudo_labels(path) -> list[PseudoLabel]:
    with open(path, encoding="utf-8") as f:
        return [PseudoLabel.from_json(line) for line in f if line.strip()]


def write_pseudo_labels(path, labels: Iterable[PseudoLabel], keep_rejected: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for pl in labels:
            if pl.accepted or keep_rejected:
                f.write(pl.to_json())
                f.write("\n")


@dataclass
class ScreenRow:
    screen: str
    sites: int
    accepted: int
    correct: int | None = None

    @property
    def rate(self) -> float:
        return self.accepted / self.sites if self.sites else 0.0

    @property
    def precision(self) -> float | None:
        if self.correct is None or not self.accepted:
            return None
        return self.correct / self.accepted


def screening_stats(labels: Sequence[PseudoLabel], truth: Sequence[AnnotatedSentence] | None = None,
                    windows: Sequence[Window] | None = None) -> list[ScreenRow]:
    """Acceptance (and precision against held-out truth) per screen.

    Rows: ``none`` (every site), one per window, ``multi_model`` and the
    configured combination ``accepted``.
    """
    gold = None
    if truth is not None:
        gold = {}
        for line, sent in enumerate(truth):
            for index, syl in sent.sites:
                gold[line, index] = syl
    if windows is None:
        windows = [w for w in (labels[0].window_verdicts if labels else ())]
    keys = [window_key(w) for w in windows]

    def row(name, chosen):
        n = len(chosen)
        correct = None
        if gold is not None:
            correct = sum(1 for pl in chosen if gold.get((pl.source_line, pl.site_index)) == pl.predicted)
        return ScreenRow(name, len(labels), n, correct)

    rows = [row("none", labels)]
    for k in keys:
        rows.append(row(f"window={k}", [pl for pl in labels if pl.window_verdicts.get(k)]))
    if labels and labels[0].multi_model_verdict is not None:
        rows.append(row("multi_model", [pl for pl in labels if pl.multi_model_verdict]))
    rows.append(row("accepted", [pl for pl in labels if pl.accepted]))
    return rows


def format_screen_tsv(rows: Sequence[ScreenRow]) -> str:
    lines = ["screen\tsites\taccepted\tacceptance_rate\tcorrect\tprecision"]
    for r in rows:
        prec = "" if r.precision is None else f"{r.precision:.6f}"
        corr = "" if r.correct is None else str(r.correct)
        lines.append(f"{r.screen}\t{r.sites}\t{r.accepted}\t{r.rate:.6f}\t{corr}\t{prec}")
    return "\n".join(lines) + "\n"
