"""Character- and pronunciation-level balancing with accepted pseudo-labels."""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import AnnotatedSentence, site_counts
from .lexicon import Lexicon, Syllable
from .screen import PseudoLabel


@dataclass(frozen=True)
class BalanceConfig:
    char_floor: float = 0.001
    pron_floor: float = 0.20
    max_added_per_char: int | None = None
    denominator: str = "sites"

    def __post_init__(self):
        if not 0 < self.char_floor < 1:
            raise ValueError("char_floor must be in (0, 1)")
        if not 0 < self.pron_floor <= 0.5:
            raise ValueError("pron_floor must be in (0, 0.5]")
        if self.max_added_per_char is not None and self.max_added_per_char < 0:
            raise ValueError("max_added_per_char must be non-negative")
        if self.denominator not in ("sites", "chars"):
            raise ValueError("denominator must be 'sites' or 'chars'")


@dataclass
class CharBalance:
    before: dict[Syllable, int]
    after: dict[Syllable, int]
    added: int = 0
    pron_floor: float = 0.0
    floor_lowered: bool = False
    char_floor_met: bool = True
    unmet_prons: list[Syllable] = field(default_factory=list)


@dataclass
class BalanceReport:
    chars: dict[str, CharBalance]
    total_before: int
    total_after: int
    added: int

    @property
    def shortfalls(self) -> list[str]:
        return [c for c, b in self.chars.items() if not b.char_floor_met or b.unmet_prons]

    def to_tsv(self) -> str:
        lines = ["character\tbefore\tafter\tadded\tpron_floor\tflags"]
        for ch, b in self.chars.items():
            before = " ".join(f"{s}:{n}" for s, n in b.before.items())
            after = " ".join(f"{s}:{n}" for s, n in b.after.items())
            flags = []
            if b.floor_lowered:
                flags.append("pron_floor_lowered")
            if not b.char_floor_met:
                flags.append("char_floor_unmet")
            if b.unmet_prons:
                flags.append("pron_floor_unmet:" + ",".join(map(str, b.unmet_prons)))
            lines.append(f"{ch}\t{before}\t{after}\t{b.added}\t{b.pron_floor:.4f}\t{' '.join(flags)}")
        return "\n".join(lines) + "\n"


def effective_pron_floor(n_prons: int, floor: float) -> tuple[float, bool]:
    """Per-character floor; lowered to 1/n when n floors cannot all hold."""
    if n_prons >= 5 and n_prons * floor >= 1.0:
        return 1.0 / n_prons, True
    return floor, False


def balance_augment(
    base_corpus: Sequence[AnnotatedSentence],
    accepted_pool: Sequence[PseudoLabel],
    lex: Lexicon,
    config: BalanceConfig | None = None,
) -> tuple[list[AnnotatedSentence], BalanceReport]:
    """Greedily add pool items until every polyphone meets both floors.

    Characters are visited by ascending frequency and, within a character,
    pronunciations by ascending share. Frequencies are recomputed against the
    growing corpus after every addition, and passes repeat until nothing more
    can be added. Items that cannot help are never taken, and shortfalls are
    reported rather than raised.
    """
    config = config or BalanceConfig()
    counts: Counter = site_counts(base_corpus)
    char_count: Counter = Counter()
    for (ch, _), n in counts.items():
        char_count[ch] += n
    total = sum(char_count.values())
    extra_chars = 0  # non-site characters added, for the all-characters denominator
    base_chars = sum(len(s) for s in base_corpus)

    pools: dict[tuple[str, Syllable], deque] = {}
    for pl in accepted_pool:
        if not pl.accepted:
            continue
        ch = pl.chars[pl.site_index]
        if pl.predicted not in lex.char_pron.get(ch, ()):
            raise ValueError(f"pool item from line {pl.source_line} is not mask-valid")
        pools.setdefault((ch, pl.predicted), deque()).append(pl)

    polyphones = lex.polyphones
    before = {c: {s: counts.get((c, s), 0) for s in lex.char_pron[c]} for c in polyphones}
    floors = {c: effective_pron_floor(len(lex.char_pron[c]), config.pron_floor) for c in polyphones}
    added_per_char: Counter = Counter()
    selected: list[AnnotatedSentence] = []

    def denom():
        return total if config.denominator == "sites" else base_chars + extra_chars

    def can_add(c, s):
        if config.max_added_per_char is not None and added_per_char[c] >= config.max_added_per_char:
            return False
        return bool(pools.get((c, s)))

    def add(c, s):
        nonlocal total, extra_chars
        pl = pools[c, s].popleft()
        selected.append(pl.as_sentence())
        counts[c, s] += 1
        char_count[c] += 1
        total += 1
        extra_chars += len(pl.chars)
        added_per_char[c] += 1

    def shares(c):
        n = char_count[c]
        return {s: (counts.get((c, s), 0) / n if n else 0.0) for s in lex.char_pron[c]}

    changed = True
    while changed:
        changed = False
        order = sorted(polyphones, key=lambda c: (char_count[c], lex.char_id[c]))
        for c in order:
            prons = lex.char_pron[c]
            # character floor: grow the least represented pronunciation first
            while char_count[c] < config.char_floor * denom():
                options = [s for s in prons if can_add(c, s)]
                if not options:
                    break
                sh = shares(c)
                add(c, min(options, key=lambda s: (sh[s], lex.pinyin_id[s])))
                changed = True
            floor, _ = floors[c]
            while True:
                sh = shares(c)
                short = [s for s in sorted(prons, key=lambda s: (sh[s], lex.pinyin_id[s]))
                         if sh[s] < floor - 1e-12 and can_add(c, s)]
                if not short:
                    break
                add(c, short[0])
                changed = True

    report_chars = {}
    for c in sorted(polyphones, key=lambda c: lex.char_id[c]):
        floor, lowered = floors[c]
        sh = shares(c)
        after = {s: counts.get((c, s), 0) for s in lex.char_pron[c]}
        if not any(before[c].values()) and not any(after.values()):
            continue
        report_chars[c] = CharBalance(
            before=before[c],
            after=after,
            added=added_per_char[c],
            pron_floor=floor,
            floor_lowered=lowered,
            char_floor_met=char_count[c] >= config.char_floor * denom(),
            unmet_prons=[s for s in lex.char_pron[c] if sh[s] < floor - 1e-12],
        )
    report = BalanceReport(report_chars, total - len(selected), total, len(selected))
    return list(base_corpus) + selected, report
