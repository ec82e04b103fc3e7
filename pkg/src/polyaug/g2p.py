"""Grapheme-to-phoneme polyphone classifier.

Each polyphone site is classified from a window of +-r characters around it.
Every slot contributes a character embedding plus the POS and B/M/E/S
embeddings of the word covering it. The class space is the whole pinyin
inventory and the character's pronunciation mask removes impossible classes.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .corpus import AnnotatedSentence, CorpusError, pack
from .lexicon import Lexicon, Syllable
from .nn import MaskedDistribution, MaskedMLP, he_normal, masked_softmax, relu
from .text_analysis import BMES, CharFeature, analyze_batch

log = logging.getLogger(__name__)

BMES_PAD = 4


@dataclass(frozen=True)
class G2PParams:
    radius: int = 2
    d_char: int = 32
    d_pos: int = 8
    d_bmes: int = 8
    hidden: int = 64
    lr: float = 0.05
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.radius < 0 or min(self.d_char, self.d_pos, self.d_bmes, self.hidden, self.epochs, self.batch_size) < 1:
            raise ValueError(f"invalid G2P hyperparameters: {self}")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")


class G2PModel(MaskedMLP):
    role = "g2p"

    def __init__(self, hp: G2PParams, params, fingerprint, n_chars: int, n_pos: int):
        super().__init__(hp, params, fingerprint)
        self.n_chars = n_chars
        self.n_pos = n_pos

    @classmethod
    def initialize(cls, lex: Lexicon, hp: G2PParams) -> "G2PModel":
        rng = np.random.default_rng([hp.seed, 0])
        w = 2 * hp.radius + 1
        in_dim = w * (hp.d_char + hp.d_pos + hp.d_bmes)
        n_pos = len(lex.pos_tags)
        params = {
            "char_emb": rng.normal(0.0, 1.0, size=(lex.n_chars + 2, hp.d_char)),
            "pos_emb": rng.normal(0.0, 1.0, size=(n_pos + 1, hp.d_pos)),
            "bmes_emb": rng.normal(0.0, 1.0, size=(5, hp.d_bmes)),
            "W1": he_normal(rng, in_dim, (in_dim, hp.hidden)),
            "b1": np.zeros(hp.hidden),
            # zero output layer: the initial distribution is uniform over each mask
            "W2": np.zeros((hp.hidden, lex.n_pinyin)),
            "b2": np.zeros(lex.n_pinyin),
        }
        return cls(hp, params, lex.fingerprint, lex.n_chars, n_pos)

    @property
    def unk_char(self) -> int:
        return self.n_chars

    @property
    def pad_char(self) -> int:
        return self.n_chars + 1

    @property
    def feature_dim(self) -> int:
        hp = self.hp
        return (2 * hp.radius + 1) * (hp.d_char + hp.d_pos + hp.d_bmes)

    def _embed(self, cid, pid, bid):
        p = self.params
        x = np.concatenate([p["char_emb"][cid], p["pos_emb"][pid], p["bmes_emb"][bid]], axis=-1)
        return x.reshape(*cid.shape[:-1], -1)

    def _hidden_pre(self, inputs):
        x = self._embed(*inputs)
        return x @ self.params["W1"] + self.params["b1"], x

    def _hidden_backward(self, inputs, x, dpre, grads):
        hp = self.hp
        cid, pid, bid = inputs
        grads["W1"] = x.T @ dpre
        dx = (dpre @ self.params["W1"].T).reshape(len(cid), cid.shape[1], -1)
        for name, ids, lo, hi in (
            ("char_emb", cid, 0, hp.d_char),
            ("pos_emb", pid, hp.d_char, hp.d_char + hp.d_pos),
            ("bmes_emb", bid, hp.d_char + hp.d_pos, hp.d_char + hp.d_pos + hp.d_bmes),
        ):
            g = np.zeros_like(self.params[name])
            np.add.at(g, ids, dx[..., lo:hi])
            grads[name] = g

    def window_inputs(self, codes, bmes, pos, offsets, site_sent, site_pos):
        """Id windows (chars, POS, B/M/E/S) around each site of a packed batch."""
        r = self.hp.radius
        cid = np.where(codes < 0, self.unk_char, codes)
        return (
            kernels.window_gather(cid, offsets, site_sent, site_pos, r, self.pad_char),
            kernels.window_gather(pos, offsets, site_sent, site_pos, r, self.n_pos),
            kernels.window_gather(bmes, offsets, site_sent, site_pos, r, BMES_PAD),
        )

    def featurize(self, text: str, site_index: int, seg_features: Sequence[CharFeature], lex: Lexicon) -> np.ndarray:
        """Feature vector for one site; slots beyond the sentence use padding ids."""
        if not 0 <= site_index < len(text):
            raise IndexError(f"site index {site_index} out of range for length {len(text)}")
        r = self.hp.radius
        cid, pid, bid = [], [], []
        for p in range(site_index - r, site_index + r + 1):
            if 0 <= p < len(text):
                cid.append(lex.char_id.get(text[p], self.unk_char))
                pid.append(lex.pos_id[seg_features[p].pos_tag])
                bid.append(BMES.index(seg_features[p].position))
            else:
                cid.append(self.pad_char)
                pid.append(self.n_pos)
                bid.append(BMES_PAD)
        return self._embed(np.array([cid]), np.array([pid]), np.array([bid]))[0]

    def forward(self, features: np.ndarray, mask: np.ndarray) -> MaskedDistribution:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise ValueError("pronunciation mask selects no class")
        p = self.params
        scores = relu(features @ p["W1"] + p["b1"]) @ p["W2"] + p["b2"]
        return MaskedDistribution(masked_softmax(scores, mask), mask)


@dataclass
class SiteBatch:
    """Packed sentences with analysis features and polyphone site coordinates."""

    codes: np.ndarray
    offsets: np.ndarray
    bmes: np.ndarray
    pos: np.ndarray
    site_sent: np.ndarray
    site_pos: np.ndarray

    @property
    def site_codes(self) -> np.ndarray:
        return self.codes[self.offsets[self.site_sent] + self.site_pos]

    @classmethod
    def from_texts(cls, texts: Sequence[str], lex: Lexicon, sites=None) -> "SiteBatch":
        """Analyze ``texts``; sites default to every polyphone occurrence."""
        codes, offsets = pack(texts, lex)
        bmes, pos = analyze_batch(codes, offsets, lex)
        if sites is None:
            is_poly = np.zeros(len(codes), dtype=bool)
            known = codes >= 0
            is_poly[known] = lex.n_prons[codes[known]] >= 2
            g = np.flatnonzero(is_poly)
            site_sent = np.searchsorted(offsets, g, side="right") - 1
            site_pos = g - offsets[site_sent]
        else:
            site_sent, site_pos = (np.asarray(a, dtype=np.int64) for a in sites)
        return cls(codes, offsets, bmes, pos, site_sent.astype(np.int64), site_pos.astype(np.int64))


def corpus_sites(corpus: Sequence[AnnotatedSentence], lex: Lexicon) -> tuple[SiteBatch, np.ndarray]:
    """Site batch for the annotated sites of a corpus plus gold pinyin ids."""
    sent, pos, gold = [], [], []
    for i, s in enumerate(corpus):
        for index, syl in s.sites:
            sent.append(i)
            pos.append(index)
            gold.append(lex.pinyin_id[syl])
    batch = SiteBatch.from_texts([s.text for s in corpus], lex, (sent, pos))
    return batch, np.array(gold, dtype=np.int64)


def predict_sites(model: G2PModel, lex: Lexicon, batch: SiteBatch) -> np.ndarray:
    """Predicted pinyin id per site of ``batch``."""
    if len(batch.site_sent) == 0:
        return np.empty(0, dtype=np.int64)
    inputs = model.window_inputs(batch.codes, batch.bmes, batch.pos, batch.offsets, batch.site_sent, batch.site_pos)
    return model.predict_ids(inputs, lex.pron_mask_matrix, batch.site_codes)


def train_g2p(
    corpus: Sequence[AnnotatedSentence],
    lex: Lexicon,
    hp: G2PParams | None = None,
    dev: Sequence[AnnotatedSentence] | None = None,
) -> G2PModel:
    """Train on every annotated site; returns the best epoch by dev accuracy."""
    hp = hp or G2PParams()
    batch, gold = corpus_sites(corpus, lex)
    if len(gold) == 0:
        raise CorpusError("training corpus has no annotated polyphone sites")
    model = G2PModel.initialize(lex, hp)
    inputs = model.window_inputs(batch.codes, batch.bmes, batch.pos, batch.offsets, batch.site_sent, batch.site_pos)
    dev_fn = None
    if dev:
        dev_batch, dev_gold = corpus_sites(dev, lex)
        if len(dev_gold):
            def dev_fn(m):
                return float((predict_sites(m, lex, dev_batch) == dev_gold).mean())
    model.history = model.fit(inputs, lex.pron_mask_matrix, batch.site_codes, gold, dev_fn)
    return model


def predict_sentence(model: G2PModel, lex: Lexicon, text: str) -> list[Syllable | None]:
    """Full-sentence pinyin: lookup for monophones, the model for polyphones.

    Characters outside the lexicon yield None.
    """
    out: list[Syllable | None] = []
    for ch in text:
        prons = lex.char_pron.get(ch)
        out.append(prons[0] if prons else None)
    batch = SiteBatch.from_texts([text], lex)
    if len(batch.site_pos):
        for p, s in zip(batch.site_pos.tolist(), predict_sites(model, lex, batch).tolist()):
            out[p] = lex.pinyin_inventory[s]
    unknown = [i for i, s in enumerate(out) if s is None]
    if unknown:
        log.warning("characters outside the lexicon at positions %s in %r", unknown, text)
    return out


def hyperparams_dict(hp) -> dict:
    return asdict(hp)
