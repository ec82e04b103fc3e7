"""Dictionary word segmentation, POS lookup and word-to-character upsampling.

Segmentation is greedy forward maximum matching over the lexicon's word table.
Characters that start no dictionary word become single-character spans tagged
``X``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import kernels
from .lexicon import FALLBACK_POS, Lexicon

BMES = "BMES"


@dataclass(frozen=True)
class Segmentation:
    spans: tuple[tuple[int, int], ...]
    pos_tags: tuple[str, ...]

    def __post_init__(self):
        if len(self.spans) != len(self.pos_tags):
            raise ValueError("one POS tag per span required")

    def words(self, text: str) -> list[str]:
        return [text[a:b] for a, b in self.spans]


class CharFeature(NamedTuple):
    word_index: int
    position: str
    pos_tag: str


class WordTrie(NamedTuple):
    """Flattened trie: CSR child lists sorted by char id, word index per node."""

    child_ptr: np.ndarray
    child_code: np.ndarray
    child_node: np.ndarray
    node_word: np.ndarray
    word_pos: np.ndarray  # POS id per word index


@lru_cache(maxsize=16)
def word_trie(lex: Lexicon) -> WordTrie:
    children: list[dict[int, int]] = [{}]
    terminal: list[int] = [-1]
    words = list(lex.words)
    for wi, word in enumerate(words):
        node = 0
        for ch in word:
            code = lex.char_id[ch]
            nxt = children[node].get(code)
            if nxt is None:
                nxt = len(children)
                children[node][code] = nxt
                children.append({})
                terminal.append(-1)
            node = nxt
        terminal[node] = wi
    ptr = [0]
    codes: list[int] = []
    nodes: list[int] = []
    for kids in children:
        for code in sorted(kids):
            codes.append(code)
            nodes.append(kids[code])
        ptr.append(len(codes))
    word_pos = np.array([lex.pos_id[lex.words[w][1]] for w in words], dtype=np.int32)
    return WordTrie(
        np.array(ptr, dtype=np.int64),
        np.array(codes, dtype=np.int32),
        np.array(nodes, dtype=np.int32),
        np.array(terminal, dtype=np.int32),
        word_pos,
    )


def analyze_batch(codes: np.ndarray, offsets: np.ndarray, lex: Lexicon) -> tuple[np.ndarray, np.ndarray]:
    """Segment a packed batch of sentences.

    Returns per-character B/M/E/S codes (0..3) and POS ids.
    """
    trie = word_trie(lex)
    bmes, word = kernels.fmm_segment(codes, offsets, trie[:4])
    fallback = lex.pos_id[FALLBACK_POS]
    if len(trie.word_pos):
        pos = np.where(word >= 0, trie.word_pos[np.maximum(word, 0)], fallback).astype(np.int32)
    else:
        pos = np.full(len(codes), fallback, dtype=np.int32)
    return bmes, pos


def segment(chars: str, lex: Lexicon) -> Segmentation:
    if not chars:
        return Segmentation((), ())
    codes = lex.encode(chars)
    trie = word_trie(lex)
    bmes, word = kernels.fmm_segment(codes, np.array([0, len(chars)]), trie[:4])
    words = list(lex.words)
    spans = []
    tags = []
    start = 0
    for i, b in enumerate(bmes.tolist()):
        if b in (0, 3):
            start = i
        if b in (2, 3):
            spans.append((start, i + 1))
            tags.append(lex.words[words[word[i]]][1] if word[i] >= 0 else FALLBACK_POS)
    return Segmentation(tuple(spans), tuple(tags))


def upsample(seg: Segmentation, sentence_len: int) -> list[CharFeature]:
    """Broadcast word-level features to each character of the sentence."""
    out: list[CharFeature] = []
    expected = 0
    for wi, ((a, b), tag) in enumerate(zip(seg.spans, seg.pos_tags)):
        if a != expected or b <= a:
            raise ValueError(f"segmentation spans do not tile the sentence at span {wi} ({a}, {b})")
        expected = b
        if b - a == 1:
            out.append(CharFeature(wi, "S", tag))
            continue
        out.append(CharFeature(wi, "B", tag))
        out.extend(CharFeature(wi, "M", tag) for _ in range(b - a - 2))
        out.append(CharFeature(wi, "E", tag))
    if expected != sentence_len:
        raise ValueError(f"segmentation covers {expected} characters, sentence has {sentence_len}")
    return out
