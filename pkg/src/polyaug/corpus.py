"""Annotated corpus model, JSONL I/O, splitting and per-character statistics."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .lexicon import Lexicon, LexiconError, Syllable


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotatedSentence:
    """A sentence with gold pinyin at its polyphone sites.

    ``source`` carries provenance (the unlabeled line id) for pseudo-labeled
    sentences and is None for human-labeled ones.
    """

    text: str
    sites: tuple[tuple[int, Syllable], ...] = ()
    source: int | None = None

    def __len__(self) -> int:
        return len(self.text)

    def validate(self, lex: Lexicon, labeled: bool = True) -> None:
        if not self.text:
            raise CorpusError("empty sentence")
        if labeled and not self.sites:
            raise CorpusError("labeled sentence has no polyphone site")
        prev = -1
        for index, gold in self.sites:
            if not 0 <= index < len(self.text):
                raise CorpusError(f"index out of range: {index} (length {len(self.text)})")
            if index <= prev:
                raise CorpusError(f"site indices must be strictly increasing ({prev}, {index})")
            prev = index
            ch = self.text[index]
            if not lex.is_polyphone(ch):
                raise CorpusError(f"character {ch!r} at index {index} is not a polyphone")
            if gold not in lex.char_pron[ch]:
                raise CorpusError(f"{gold} is not a valid pronunciation of {ch!r}")

    def to_json(self) -> str:
        obj: dict = {"text": self.text, "sites": [{"index": i, "pinyin": str(s)} for i, s in self.sites]}
        if self.source is not None:
            obj["source"] = self.source
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "AnnotatedSentence":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusError(f"malformed JSON: {e.msg}") from None
        if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
            raise CorpusError("record must be an object with a string 'text'")
        raw_sites = obj.get("sites", [])
        if not isinstance(raw_sites, list):
            raise CorpusError("'sites' must be a list")
        sites = []
        for site in raw_sites:
            if not isinstance(site, dict) or not isinstance(site.get("index"), int) or not isinstance(
                site.get("pinyin"), str
            ):
                raise CorpusError("each site needs an integer 'index' and a string 'pinyin'")
            try:
                sites.append((site["index"], Syllable.parse(site["pinyin"])))
            except LexiconError as e:
                raise CorpusError(str(e)) from None
        source = obj.get("source")
        return cls(obj["text"], tuple(sites), source)


def read_corpus(
    path,
    lex: Lexicon,
    strict: bool = True,
    errors: list[str] | None = None,
    labeled: bool = True,
    min_len: int | None = None,
    max_len: int | None = None,
) -> list[AnnotatedSentence]:
    """Read and validate a JSONL corpus.

    In strict mode the first bad record raises ``CorpusError`` with the line
    number. Otherwise bad records are skipped and their messages appended to
    ``errors``. Sentences outside ``[min_len, max_len]`` are dropped silently.
    """
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                sent = AnnotatedSentence.from_json(line)
                sent.validate(lex, labeled=labeled)
            except CorpusError as e:
                msg = f"{path}:{lineno}: {e}"
                if strict:
                    raise CorpusError(msg) from None
                if errors is not None:
                    errors.append(msg)
                continue
            if min_len is not None and len(sent) < min_len:
                continue
            if max_len is not None and len(sent) > max_len:
                continue
            out.append(sent)
    return out


def write_corpus(path, corpus: Iterable[AnnotatedSentence]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sent in corpus:
            f.write(sent.to_json())
            f.write("\n")


def read_unlabeled(path) -> list[str]:
    """One sentence per line; blank lines are kept so line ids stay aligned."""
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n").rstrip("\r") for line in f]


def pack(texts: Sequence[str], lex: Lexicon) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate encoded sentences into (codes, offsets)."""
    lengths = np.fromiter((len(t) for t in texts), dtype=np.int64, count=len(texts))
    offsets = np.zeros(len(texts) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    get = lex.char_id.get
    codes = np.fromiter((get(c, -1) for t in texts for c in t), dtype=np.int32, count=int(offsets[-1]))
    return codes, offsets


@dataclass
class CharStats:
    count: int
    frequency: float
    pron_counts: dict[Syllable, int]
    high_freq_ratio: float


@dataclass
class CorpusStats:
    chars: dict[str, CharStats] = field(default_factory=dict)
    total_sites: int = 0
    total_chars: int = 0
    denominator: str = "sites"

    def ordered(self) -> list[tuple[str, CharStats]]:
        """Rows by descending count, the layout of the usual corpus table."""
        return sorted(self.chars.items(), key=lambda kv: -kv[1].count)


def site_counts(corpus: Iterable[AnnotatedSentence]) -> Counter:
    """Counter keyed by (char, syllable) over all annotated sites."""
    counts: Counter = Counter()
    for sent in corpus:
        for index, gold in sent.sites:
            counts[sent.text[index], gold] += 1
    return counts


def compute_stats(corpus: Sequence[AnnotatedSentence], lex: Lexicon, denominator: str = "sites") -> CorpusStats:
    """Per-character site counts, frequencies and dominant-pronunciation ratios.

    Counts are always recomputed from the records. ``denominator`` selects
    whether character frequency is relative to all polyphone sites or to all
    characters in the corpus.
    """
    if denominator not in ("sites", "chars"):
        raise ValueError("denominator must be 'sites' or 'chars'")
    counts = site_counts(corpus)
    total_sites = sum(counts.values())
    total_chars = sum(len(s) for s in corpus)
    denom = total_sites if denominator == "sites" else total_chars
    per_char: dict[str, Counter] = {}
    for (ch, s), n in counts.items():
        per_char.setdefault(ch, Counter())[s] += n
    stats = CorpusStats(total_sites=total_sites, total_chars=total_chars, denominator=denominator)
    for ch in sorted(per_char, key=lambda c: lex.char_id.get(c, math.inf)):
        c = per_char[ch]
        prons = {s: c.get(s, 0) for s in lex.char_pron.get(ch, ())}
        for s, n in c.items():
            prons.setdefault(s, n)
        count = sum(prons.values())
        stats.chars[ch] = CharStats(
            count=count,
            frequency=count / denom if denom else 0.0,
            pron_counts=prons,
            high_freq_ratio=max(prons.values()) / count,
        )
    return stats


def format_stats_tsv(stats: CorpusStats) -> str:
    lines = ["character\tcount\tfrequency\tpinyin_counts\thigh_freq_ratio"]
    for ch, cs in stats.ordered():
        pinyin = " ".join(f"{s}:{n}" for s, n in cs.pron_counts.items())
        lines.append(f"{ch}\t{cs.count}\t{100 * cs.frequency:.2f}%\t{pinyin}\t{100 * cs.high_freq_ratio:.2f}%")
    return "\n".join(lines) + "\n"


def split_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    n_dev = math.floor(n * ratios[1])
    n_test = math.floor(n * ratios[2])
    return n - n_dev - n_test, n_dev, n_test


def split_corpus(corpus: Sequence, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> tuple[list, list, list]:
    """Seeded train/dev/test partition; each split keeps input order.

    Dev and test sizes are floored and the remainder goes to train.
    """
    if not corpus:
        raise CorpusError("cannot split an empty corpus")
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must be three positive numbers summing to 1")
    n_train, n_dev, _ = split_sizes(len(corpus), ratios)
    perm = np.random.default_rng(seed).permutation(len(corpus))
    parts = np.split(perm, [n_train, n_train + n_dev])
    return tuple([corpus[i] for i in np.sort(p)] for p in parts)
