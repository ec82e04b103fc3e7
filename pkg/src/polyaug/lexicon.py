"""Pronunciation inventory, per-character masks and the word dictionary."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

_SYLLABLE_RE = re.compile(r"^([a-z]+)([1-5])$")

FALLBACK_POS = "X"


class LexiconError(ValueError):
    """Raised for malformed lexicon files or lookups of unknown entries."""


@dataclass(frozen=True, order=True)
class Syllable:
    """A toned pinyin syllable such as ``pu4`` or ``de5`` (5 is the neutral tone)."""

    romanization: str
    tone: int

    def __post_init__(self):
        if not self.romanization or not re.fullmatch(r"[a-z]+", self.romanization):
            raise LexiconError(f"invalid romanization {self.romanization!r}")
        if self.tone not in (1, 2, 3, 4, 5):
            raise LexiconError(f"invalid tone {self.tone!r}")

    @classmethod
    def parse(cls, token: str) -> "Syllable":
        m = _SYLLABLE_RE.match(token)
        if m is None:
            raise LexiconError(f"invalid syllable token {token!r} (expected e.g. 'pu4')")
        return cls(m.group(1), int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.romanization}{self.tone}"


@dataclass(eq=False)
class Lexicon:
    """Immutable pronunciation lexicon.

    ``char_pron`` preserves file order, and that order defines class order in
    reports. ``words`` maps a word to its per-character syllables and POS tag.
    """

    char_pron: dict[str, tuple[Syllable, ...]]
    words: dict[str, tuple[tuple[Syllable, ...], str]] = field(default_factory=dict)

    def __post_init__(self):
        for ch, prons in self.char_pron.items():
            if len(ch) != 1:
                raise LexiconError(f"character entry {ch!r} is not a single character")
            if not prons:
                raise LexiconError(f"character {ch!r} has no pronunciation")
            if len(set(prons)) != len(prons):
                raise LexiconError(f"character {ch!r} lists a pronunciation twice")
        for word, (sylls, _pos) in self.words.items():
            if len(sylls) != len(word):
                raise LexiconError(f"word {word!r}: {len(sylls)} syllables for {len(word)} characters")
            for ch, s in zip(word, sylls):
                if ch not in self.char_pron:
                    raise LexiconError(f"word {word!r} contains unknown character {ch!r}")
                if s not in self.char_pron[ch]:
                    raise LexiconError(f"word {word!r}: {s} is not a pronunciation of {ch!r}")

        self.char_inventory: list[str] = list(self.char_pron)
        self.char_id: dict[str, int] = {c: i for i, c in enumerate(self.char_inventory)}
        inventory: dict[Syllable, int] = {}
        for prons in self.char_pron.values():
            for s in prons:
                inventory.setdefault(s, len(inventory))
        self.pinyin_inventory: list[Syllable] = list(inventory)
        self.pinyin_id: dict[Syllable, int] = inventory
        homophones: dict[Syllable, list[str]] = {s: [] for s in self.pinyin_inventory}
        for ch, prons in self.char_pron.items():
            for s in prons:
                homophones[s].append(ch)
        self._homophones = {s: tuple(chars) for s, chars in homophones.items()}
        self.pos_tags: list[str] = sorted({pos for _, pos in self.words.values()} | {FALLBACK_POS})
        self.pos_id: dict[str, int] = {t: i for i, t in enumerate(self.pos_tags)}

    @property
    def n_chars(self) -> int:
        return len(self.char_inventory)

    @property
    def n_pinyin(self) -> int:
        return len(self.pinyin_inventory)

    def is_polyphone(self, ch: str) -> bool:
        return len(self.char_pron.get(ch, ())) >= 2

    @cached_property
    def polyphones(self) -> list[str]:
        return [c for c in self.char_inventory if len(self.char_pron[c]) >= 2]

    def homophones(self, s: Syllable) -> tuple[str, ...]:
        try:
            return self._homophones[s]
        except KeyError:
            raise LexiconError(f"unknown syllable {s}") from None

    def pronunciation_mask(self, ch: str) -> np.ndarray:
        if ch not in self.char_id:
            raise LexiconError(f"unknown character {ch!r}")
        return self.pron_mask_matrix[self.char_id[ch]].copy()

    def homophone_mask(self, s: Syllable) -> np.ndarray:
        if s not in self.pinyin_id:
            raise LexiconError(f"unknown syllable {s}")
        return self.homophone_mask_matrix[self.pinyin_id[s]].copy()

    @cached_property
    def pron_mask_matrix(self) -> np.ndarray:
        """Boolean (n_chars, n_pinyin) matrix; row i masks char i's valid classes."""
        m = np.zeros((self.n_chars, self.n_pinyin), dtype=bool)
        for i, ch in enumerate(self.char_inventory):
            for s in self.char_pron[ch]:
                m[i, self.pinyin_id[s]] = True
        m.setflags(write=False)
        return m

    @cached_property
    def homophone_mask_matrix(self) -> np.ndarray:
        m = np.ascontiguousarray(self.pron_mask_matrix.T)
        m.setflags(write=False)
        return m

    @cached_property
    def n_prons(self) -> np.ndarray:
        """Pronunciation count per character id."""
        return self.pron_mask_matrix.sum(axis=1).astype(np.int64)

    @cached_property
    def n_homophones(self) -> np.ndarray:
        return self.pron_mask_matrix.sum(axis=0).astype(np.int64)

    @cached_property
    def default_pinyin(self) -> np.ndarray:
        """First-listed pronunciation id per character id."""
        return np.array([self.pinyin_id[self.char_pron[c][0]] for c in self.char_inventory], dtype=np.int32)

    @cached_property
    def default_char(self) -> np.ndarray:
        """First homophone char id per syllable id (the answer when unambiguous)."""
        return np.array([self.char_id[self._homophones[s][0]] for s in self.pinyin_inventory], dtype=np.int32)

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for ch, prons in self.char_pron.items():
            h.update(f"{ch}\t{','.join(map(str, prons))}\n".encode())
        h.update(b"--\n")
        for tag in self.pos_tags:
            h.update(f"{tag}\n".encode())
        return h.hexdigest()[:16]

    def encode(self, text: str) -> np.ndarray:
        """Char ids for ``text``; characters outside the lexicon map to -1."""
        get = self.char_id.get
        return np.fromiter((get(c, -1) for c in text), dtype=np.int32, count=len(text))


def _content_lines(path: Path) -> Iterator[tuple[int, str]]:
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, line


def _parse_sylls(tokens: Iterable[str], where: str) -> tuple[Syllable, ...]:
    try:
        return tuple(Syllable.parse(t) for t in tokens)
    except LexiconError as e:
        raise LexiconError(f"{where}: {e}") from None


def load_lexicon(char_table_path, word_table_path=None) -> Lexicon:
    """Read a character table and an optional word table.

    Character table lines are ``<char>\\t<syl>,<syl>,...``; word table lines are
    ``<word>\\t<POS>\\t<syl> <syl> ...``. ``#`` starts a comment line.
    """
    char_pron: dict[str, tuple[Syllable, ...]] = {}
    for lineno, line in _content_lines(Path(char_table_path)):
        where = f"{char_table_path}:{lineno}"
        parts = line.split("\t")
        if len(parts) != 2 or not parts[1]:
            raise LexiconError(f"{where}: expected '<char>\\t<syl>,<syl>,...'")
        ch, prons = parts
        if len(ch) != 1:
            raise LexiconError(f"{where}: {ch!r} is not a single character")
        if " " in prons:
            raise LexiconError(f"{where}: spaces are not allowed in the syllable list")
        if ch in char_pron:
            raise LexiconError(f"{where}: duplicate character {ch!r}")
        sylls = _parse_sylls(prons.split(","), where)
        if len(set(sylls)) != len(sylls):
            raise LexiconError(f"{where}: repeated pronunciation for {ch!r}")
        char_pron[ch] = sylls

    words: dict[str, tuple[tuple[Syllable, ...], str]] = {}
    if word_table_path is not None:
        for lineno, line in _content_lines(Path(word_table_path)):
            where = f"{word_table_path}:{lineno}"
            parts = line.split("\t")
            if len(parts) != 3 or not parts[0] or not parts[1]:
                raise LexiconError(f"{where}: expected '<word>\\t<POS>\\t<syl> <syl> ...'")
            word, pos, sylls_text = parts
            sylls = _parse_sylls(sylls_text.split(" "), where)
            if len(sylls) != len(word):
                raise LexiconError(f"{where}: {len(sylls)} syllables for {len(word)}-character word")
            for ch, s in zip(word, sylls):
                if ch not in char_pron:
                    raise LexiconError(f"{where}: character {ch!r} is not in the character table")
                if s not in char_pron[ch]:
                    raise LexiconError(f"{where}: {s} is not a pronunciation of {ch!r}")
            if word in words:
                raise LexiconError(f"{where}: duplicate word {word!r}")
            words[word] = (sylls, pos)
    return Lexicon(char_pron, words)


def write_lexicon(lex: Lexicon, char_table_path, word_table_path) -> None:
    with open(char_table_path, "w", encoding="utf-8") as f:
        for ch, prons in lex.char_pron.items():
            f.write(f"{ch}\t{','.join(map(str, prons))}\n")
    with open(word_table_path, "w", encoding="utf-8") as f:
        for word, (sylls, pos) in lex.words.items():
            f.write(f"{word}\t{pos}\t{' '.join(map(str, sylls))}\n")
