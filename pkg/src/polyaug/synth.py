"""Synthetic lexicon and corpora with a known context-to-pronunciation law.

Every polyphone occurrence sits in a block ``[left cue] polyphone [right cue]``.
Each cue character belongs to one pronunciation of that polyphone and agrees
with the true pronunciation with probability ``determinism``; otherwise it is
drawn from another pronunciation. Cue characters at the same (polyphone,
side, index) share one syllable across pronunciations, so reconstructing a
cue from pinyin requires knowing the neighbouring polyphone's pronunciation.
A fraction of filler characters come in homophone pairs chosen at random,
which no context can resolve.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import product

from .corpus import AnnotatedSentence
from .lexicon import Lexicon, Syllable

INITIALS = ["b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j", "q", "x",
            "zh", "ch", "sh", "r", "z", "c", "s", "y", "w"]
FINALS = ["a", "o", "e", "ai", "ei", "ao", "ou", "an", "en", "ang", "eng", "ong",
          "i", "u", "ia", "ie", "iao", "iu", "ian", "in", "iang", "ing", "uo", "ui", "uan", "un"]
FILLER_POS = ["n", "v", "a", "d", "p", "m", "r"]
CJK_START = 0x4E00


@dataclass(frozen=True)
class SynthConfig:
    n_polyphones: int = 20
    prons_per_polyphone: int = 2
    skew: tuple[float, ...] | None = None
    determinism: float = 0.9
    cue_slots: int = 2
    cues_per_side: int = 6
    cue_zipf: float = 1.0
    polyphone_zipf: float = 0.0
    n_fillers: int = 150
    ambiguous_filler_frac: float = 0.1
    n_filler_words: int = 200
    blocks_per_sentence: tuple[int, int] = (1, 3)
    n_labeled: int = 5000
    n_unlabeled: int = 200_000
    n_test: int = 0

    def __post_init__(self):
        if self.n_polyphones < 1 or self.prons_per_polyphone < 2:
            raise ValueError("need at least one polyphone with at least two pronunciations")
        skew = self.skew
        if skew is None:
            skew = (1.0 / self.prons_per_polyphone,) * self.prons_per_polyphone
        skew = tuple(float(x) for x in skew)
        if len(skew) != self.prons_per_polyphone:
            raise ValueError(f"skew has {len(skew)} entries for {self.prons_per_polyphone} pronunciations")
        if any(x <= 0 for x in skew) or abs(sum(skew) - 1.0) > 1e-9:
            raise ValueError("skew must be positive and sum to 1")
        object.__setattr__(self, "skew", skew)
        if not 0.5 < self.determinism <= 1.0:
            raise ValueError("determinism must be in (0.5, 1]")
        if self.cue_slots not in (1, 2):
            raise ValueError("cue_slots must be 1 or 2")
        if self.cues_per_side < 1 or self.n_fillers < 2 or self.n_filler_words < 1:
            raise ValueError("cues_per_side, n_fillers and n_filler_words must be positive")
        if not 0 <= self.ambiguous_filler_frac <= 1:
            raise ValueError("ambiguous_filler_frac must be in [0, 1]")
        lo, hi = self.blocks_per_sentence
        if not 1 <= lo <= hi:
            raise ValueError("blocks_per_sentence must be 1 <= lo <= hi")
        if min(self.n_labeled, self.n_unlabeled, self.n_test) < 0:
            raise ValueError("corpus sizes must be non-negative")


@dataclass
class SynthWorld:
    """Generator internals exposed for oracle checks."""

    polyphones: list[str]
    # cue char -> (polyphone index, pronunciation index, side 0=left/1=right)
    cues: dict[str, tuple[int, int, int]] = field(default_factory=dict)
    ambiguous_fillers: set[str] = field(default_factory=set)


@dataclass
class SynthData:
    lexicon: Lexicon
    labeled: list[AnnotatedSentence]
    unlabeled: list[str]
    truth: list[AnnotatedSentence]
    world: SynthWorld
    # extra labeled sentences from the same law, never used for training
    test: list[AnnotatedSentence] = field(default_factory=list)


def _syllables(rng: random.Random):
    pool = [Syllable(i + f, t) for i, f, t in product(INITIALS, FINALS, (1, 2, 3, 4))]
    rng.shuffle(pool)
    return iter(pool)


def _zipf_weights(n: int, s: float) -> list[float]:
    return [1.0 / (k + 1) ** s for k in range(n)]


class _Generator:
    def __init__(self, config: SynthConfig, seed: int):
        self.cfg = cfg = config
        self.rng = rng = random.Random(seed)
        sylls = _syllables(rng)
        next_char = iter(chr(CJK_START + k) for k in range(20_000))
        char_pron: dict[str, tuple[Syllable, ...]] = {}
        world = SynthWorld([])
        K = cfg.prons_per_polyphone

        for _ in range(cfg.n_polyphones):
            ch = next(next_char)
            char_pron[ch] = tuple(next(sylls) for _ in range(K))
            world.polyphones.append(ch)
        # cue[i][k][side] -> list of cue chars, index-aligned across k
        self.cue = [[[[], []] for _ in range(K)] for _ in range(cfg.n_polyphones)]
        for i in range(cfg.n_polyphones):
            for side in (0, 1):
                for _ in range(cfg.cues_per_side):
                    s = next(sylls)
                    for k in range(K):
                        ch = next(next_char)
                        char_pron[ch] = (s,)
                        self.cue[i][k][side].append(ch)
                        world.cues[ch] = (i, k, side)

        fillers = [next(next_char) for _ in range(cfg.n_fillers)]
        n_amb = int(round(cfg.n_fillers * cfg.ambiguous_filler_frac)) // 2 * 2
        for a in range(0, n_amb, 2):
            s = next(sylls)
            char_pron[fillers[a]] = (s,)
            char_pron[fillers[a + 1]] = (s,)
            world.ambiguous_fillers.update(fillers[a:a + 2])
        for ch in fillers[n_amb:]:
            char_pron[ch] = (next(sylls),)
        self.amb_pairs = {fillers[a]: fillers[a + 1] for a in range(0, n_amb, 2)}
        self.amb_pairs.update({v: k for k, v in self.amb_pairs.items()})

        words: dict[str, tuple[tuple[Syllable, ...], str]] = {}
        for ch in fillers:
            words[ch] = (char_pron[ch], rng.choice(FILLER_POS))
        while len(words) < cfg.n_filler_words + len(fillers):
            w = "".join(rng.choice(fillers) for _ in range(rng.randint(2, 3)))
            if w not in words:
                words[w] = (tuple(char_pron[c][0] for c in w), rng.choice(FILLER_POS))
        for ch, (_, _, side) in world.cues.items():
            words[ch] = (char_pron[ch], "a" if side == 0 else "v")
        self.filler_words = [w for w in words if all(c in fillers for c in w)]
        self.lexicon = Lexicon(char_pron, words)
        self.world = world
        self.cue_weights = _zipf_weights(cfg.cues_per_side, cfg.cue_zipf)
        self.poly_weights = _zipf_weights(cfg.n_polyphones, cfg.polyphone_zipf)

    def _filler(self, parts: list[str], n: int) -> None:
        rng = self.rng
        for _ in range(n):
            w = rng.choice(self.filler_words)
            # homophone pairs are interchangeable: the written form is a coin flip
            parts.append("".join(self.amb_pairs[c] if c in self.amb_pairs and rng.random() < 0.5 else c for c in w))

    def sentence(self) -> AnnotatedSentence:
        cfg, rng = self.cfg, self.rng
        K = cfg.prons_per_polyphone
        parts: list[str] = []
        sites = []
        self._filler(parts, rng.randint(0, 2))
        n_blocks = rng.randint(*cfg.blocks_per_sentence)
        for b in range(n_blocks):
            if b:
                self._filler(parts, rng.randint(1, 2))
            i = rng.choices(range(cfg.n_polyphones), self.poly_weights)[0]
            k = rng.choices(range(K), cfg.skew)[0]
            sides = (0, 1) if cfg.cue_slots == 2 else (rng.randint(0, 1),)
            cue = {}
            for side in sides:
                signal = k
                if rng.random() >= cfg.determinism:
                    signal = rng.choice([j for j in range(K) if j != k])
                j = rng.choices(range(cfg.cues_per_side), self.cue_weights)[0]
                cue[side] = self.cue[i][signal][side][j]
            if 0 in cue:
                parts.append(cue[0])
            pos = sum(map(len, parts))
            parts.append(self.world.polyphones[i])
            sites.append((pos, self.lexicon.char_pron[self.world.polyphones[i]][k]))
            if 1 in cue:
                parts.append(cue[1])
        self._filler(parts, rng.randint(0, 2))
        return AnnotatedSentence("".join(parts), tuple(sites))


def generate_synthetic(config: SynthConfig | None = None, seed: int = 0) -> SynthData:
    """Lexicon, labeled corpus, unlabeled lines and their held-out truth."""
    config = config or SynthConfig()
    gen = _Generator(config, seed)
    labeled = [gen.sentence() for _ in range(config.n_labeled)]
    truth = [gen.sentence() for _ in range(config.n_unlabeled)]
    test = [gen.sentence() for _ in range(config.n_test)]
    return SynthData(gen.lexicon, labeled, [s.text for s in truth], truth, gen.world, test)
