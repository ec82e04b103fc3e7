"""Phoneme-to-grapheme classifier, the reverse direction of the augmentation loop.

Each position is predicted independently from one-hot syllables at +-r
positions. The one-hot first layer is stored as a (slots, vocab, hidden)
tensor and applied by row lookup, which is the same linear map. The
homophone mask of the position's own syllable restricts the output.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .corpus import AnnotatedSentence, CorpusError
from .lexicon import Lexicon, Syllable
from .nn import MaskedDistribution, MaskedMLP, he_normal, masked_softmax, relu

log = logging.getLogger(__name__)

UNKNOWN_CHAR = "\ufffd"


@dataclass(frozen=True)
class P2GParams:
    radius: int = 3
    hidden: int = 64
    lr: float = 0.05
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.radius < 0 or min(self.hidden, self.epochs, self.batch_size) < 1:
            raise ValueError(f"invalid P2G hyperparameters: {self}")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")


class P2GModel(MaskedMLP):
    role = "p2g"

    def __init__(self, hp: P2GParams, params, fingerprint, n_pinyin: int):
        super().__init__(hp, params, fingerprint)
        self.n_pinyin = n_pinyin

    @classmethod
    def initialize(cls, lex: Lexicon, hp: P2GParams) -> "P2GModel":
        rng = np.random.default_rng([hp.seed, 0])
        w = 2 * hp.radius + 1
        params = {
            "W_in": he_normal(rng, w, (w, lex.n_pinyin + 2, hp.hidden)),
            "b1": np.zeros(hp.hidden),
            "W2": np.zeros((hp.hidden, lex.n_chars)),
            "b2": np.zeros(lex.n_chars),
        }
        return cls(hp, params, lex.fingerprint, lex.n_pinyin)

    @property
    def unk_syllable(self) -> int:
        return self.n_pinyin

    @property
    def pad_syllable(self) -> int:
        return self.n_pinyin + 1

    def _hidden_pre(self, inputs):
        (sid,) = inputs
        slots = np.arange(sid.shape[1])
        return self.params["W_in"][slots, sid].sum(axis=1) + self.params["b1"], None

    def _hidden_backward(self, inputs, cache, dpre, grads):
        (sid,) = inputs
        g = np.zeros_like(self.params["W_in"])
        slots = np.broadcast_to(np.arange(sid.shape[1]), sid.shape)
        np.add.at(g, (slots, sid), np.broadcast_to(dpre[:, None, :], sid.shape + dpre.shape[1:]))
        grads["W_in"] = g

    def window_inputs(self, syl_ids, offsets, pos_sent, pos_in_sent):
        sid = np.where(syl_ids < 0, self.unk_syllable, syl_ids)
        return (kernels.window_gather(sid, offsets, pos_sent, pos_in_sent, self.hp.radius, self.pad_syllable),)

    def forward(self, lex: Lexicon, pinyin_seq: Sequence[Syllable | None], index: int) -> MaskedDistribution:
        """Distribution over characters at ``index`` given the pinyin context."""
        target = pinyin_seq[index]
        if target not in lex.pinyin_id:
            raise KeyError(f"unknown syllable {target}")
        mask = lex.homophone_mask_matrix[lex.pinyin_id[target]]
        if not mask.any():
            raise ValueError(f"syllable {target} has no homophone")
        ids = encode_pinyin(pinyin_seq, lex)
        (sid,) = self.window_inputs(ids, np.array([0, len(ids)]), np.array([0]), np.array([index]))
        p = self.params
        slots = np.arange(sid.shape[1])
        pre = p["W_in"][slots, sid[0]].sum(axis=0) + p["b1"]
        scores = relu(pre) @ p["W2"] + p["b2"]
        return MaskedDistribution(masked_softmax(scores, mask), mask.copy())


def encode_pinyin(pinyin_seq: Sequence[Syllable | None], lex: Lexicon) -> np.ndarray:
    get = lex.pinyin_id.get
    return np.array([-1 if s is None else get(s, -1) for s in pinyin_seq], dtype=np.int32)


def reconstruct(model: P2GModel, lex: Lexicon, syl_ids: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Char id per position of a packed pinyin batch; -1 where the syllable is unknown.

    Syllables with a single homophone are resolved by lookup; the model is
    only run where the homophone set is ambiguous.
    """
    out = np.full(len(syl_ids), -1, dtype=np.int32)
    known = syl_ids >= 0
    out[known] = lex.default_char[syl_ids[known]]
    amb = np.zeros(len(syl_ids), dtype=bool)
    amb[known] = lex.n_homophones[syl_ids[known]] >= 2
    g = np.flatnonzero(amb)
    if len(g):
        sent = np.searchsorted(offsets, g, side="right") - 1
        inputs = model.window_inputs(syl_ids, offsets, sent, g - offsets[sent])
        out[g] = model.predict_ids(inputs, lex.homophone_mask_matrix, syl_ids[g])
    return out


def training_pinyin(sent: AnnotatedSentence, lex: Lexicon) -> np.ndarray:
    """Gold pinyin at annotated sites, first-listed pronunciation elsewhere."""
    ids = np.array([lex.default_pinyin[lex.char_id[c]] if c in lex.char_id else -1 for c in sent.text],
                   dtype=np.int32)
    for index, syl in sent.sites:
        ids[index] = lex.pinyin_id[syl]
    return ids


def _examples(corpus: Sequence[AnnotatedSentence], lex: Lexicon):
    seqs = [training_pinyin(s, lex) for s in corpus]
    syl = np.concatenate(seqs) if seqs else np.empty(0, dtype=np.int32)
    offsets = np.zeros(len(seqs) + 1, dtype=np.int64)
    np.cumsum([len(s) for s in seqs], out=offsets[1:])
    chars = np.array([lex.char_id.get(c, -1) for s in corpus for c in s.text], dtype=np.int32)
    ok = (syl >= 0) & (chars >= 0)
    ok[ok] = lex.n_homophones[syl[ok]] >= 2
    g = np.flatnonzero(ok)
    sent = np.searchsorted(offsets, g, side="right") - 1
    return syl, offsets, g, sent, chars[g].astype(np.int64)


def train_p2g(
    corpus: Sequence[AnnotatedSentence],
    lex: Lexicon,
    hp: P2GParams | None = None,
    dev: Sequence[AnnotatedSentence] | None = None,
) -> P2GModel:
    """Train on every position whose syllable has two or more homophones.

    When the lexicon has no ambiguous syllable at all, the untrained model is
    returned: prediction is then pure lookup.
    """
    hp = hp or P2GParams()
    model = P2GModel.initialize(lex, hp)
    syl, offsets, g, sent, gold = _examples(corpus, lex)
    if len(g) == 0:
        if (lex.n_homophones >= 2).any():
            raise CorpusError("no trainable P2G positions: no ambiguous syllable occurs in the corpus")
        log.info("every syllable has a single homophone; P2G training skipped")
        return model
    inputs = model.window_inputs(syl, offsets, sent, g - offsets[sent])
    dev_fn = None
    if dev:
        d_syl, d_off, d_g, d_sent, d_gold = _examples(dev, lex)
        if len(d_g):
            d_inputs = model.window_inputs(d_syl, d_off, d_sent, d_g - d_off[d_sent])

            def dev_fn(m):
                return float((m.predict_ids(d_inputs, lex.homophone_mask_matrix, d_syl[d_g]) == d_gold).mean())
    model.history = model.fit(inputs, lex.homophone_mask_matrix, syl[g], gold, dev_fn)
    return model


def predict_text(model: P2GModel, lex: Lexicon, pinyin_seq: Sequence[Syllable | None]) -> str:
    """Most likely character per syllable; unknown syllables give U+FFFD."""
    ids = encode_pinyin(pinyin_seq, lex)
    codes = reconstruct(model, lex, ids, np.array([0, len(ids)], dtype=np.int64))
    unknown = [i for i, c in enumerate(codes.tolist()) if c < 0]
    if unknown:
        log.warning("unknown syllables at positions %s", unknown)
    return "".join(UNKNOWN_CHAR if c < 0 else lex.char_inventory[c] for c in codes.tolist())
