import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyaug import kernels
from polyaug.corpus import pack
from polyaug.text_analysis import word_trie

BACKENDS = kernels.available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def impl(request):
    return BACKENDS[request.param]


def test_cython_backend_built():
    # the compiled core ships with the package; the fallback must exist too
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS


def packed(rng, n_sent, vocab, max_len=12):
    lens = rng.integers(1, max_len + 1, n_sent)
    offsets = np.zeros(n_sent + 1, dtype=np.int64)
    np.cumsum(lens, out=offsets[1:])
    return rng.integers(-1, vocab, offsets[-1]).astype(np.int32), offsets


def random_sites(rng, offsets, k):
    sent = rng.integers(0, len(offsets) - 1, k)
    pos = np.array([rng.integers(0, offsets[s + 1] - offsets[s]) for s in sent], dtype=np.int64)
    return sent.astype(np.int64), pos


def gather_oracle(ids, offsets, sent, pos, r, pad):
    out = []
    for s, p in zip(sent, pos):
        a, b = offsets[s], offsets[s + 1]
        out.append([ids[a + q] if 0 <= q < b - a else pad for q in range(p - r, p + r + 1)])
    return np.array(out, dtype=np.int32).reshape(len(sent), 2 * r + 1)


def verdict_oracle(orig, recon, offsets, sent, pos, radii):
    out = np.zeros((len(sent), len(radii)), dtype=np.uint8)
    for k, (s, p) in enumerate(zip(sent, pos)):
        o = orig[offsets[s]:offsets[s + 1]]
        c = recon[offsets[s]:offsets[s + 1]]
        for j, r in enumerate(radii):
            lo, hi = (0, len(o)) if r < 0 else (max(0, p - r), min(len(o), p + r + 1))
            out[k, j] = np.array_equal(o[lo:hi], c[lo:hi])
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 4))
def test_window_gather(seed, r):
    rng = np.random.default_rng(seed)
    ids, offsets = packed(rng, 7, 9)
    sent, pos = random_sites(rng, offsets, 15)
    want = gather_oracle(ids, offsets, sent, pos, r, 99)
    for impl in BACKENDS.values():
        np.testing.assert_array_equal(kernels.window_gather(ids, offsets, sent, pos, r, 99, impl=impl), want)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_window_verdicts(seed):
    rng = np.random.default_rng(seed)
    orig, offsets = packed(rng, 6, 4, 15)
    recon = orig.copy()
    flip = rng.random(len(orig)) < 0.15
    recon[flip] = rng.integers(0, 4, flip.sum())
    sent, pos = random_sites(rng, offsets, 20)
    radii = [0, 1, 2, 3, 7, -1]
    want = verdict_oracle(orig, recon, offsets, sent, pos, radii)
    for impl in BACKENDS.values():
        np.testing.assert_array_equal(kernels.window_verdicts(orig, recon, offsets, sent, pos, radii, impl=impl),
                                      want)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_masked_argmax(seed):
    rng = np.random.default_rng(seed)
    # coarse scores force ties, which must go to the lowest id
    scores = rng.integers(-2, 3, (30, 6)).astype(np.float64)
    mask = rng.random((30, 6)) < 0.5
    mask[0] = False
    want = np.array([-1 if not m.any() else int(np.flatnonzero(m)[np.argmax(s[m])]) for s, m in zip(scores, mask)])
    for impl in BACKENDS.values():
        np.testing.assert_array_equal(kernels.masked_argmax(scores, mask, impl=impl), want)


def fmm_oracle(text, words):
    maxlen = max(map(len, words), default=1)
    out, i = [], 0
    while i < len(text):
        for L in range(min(maxlen, len(text) - i), 0, -1):
            if text[i:i + L] in words or L == 1:
                out.append((i, i + L, text[i:i + L] in words))
                i += L
                break
    return out


@settings(max_examples=100, deadline=None)
@given(st.lists(st.text(alphabet="昨天前门商铺打出超低价烤鸭招牌抄底重要龘", min_size=1, max_size=20), min_size=1,
                max_size=5))
def test_fmm_matches_oracle(lex, texts):
    trie = word_trie(lex)
    codes, offsets = pack(texts, lex)
    for impl in BACKENDS.values():
        bmes, word = kernels.fmm_segment(codes, offsets, trie[:4], impl=impl)
        for s, t in enumerate(texts):
            a = offsets[s]
            spans = fmm_oracle(t, lex.words)
            for lo, hi, known in spans:
                want = "S" if hi - lo == 1 else "B" + "M" * (hi - lo - 2) + "E"
                assert "".join("BMES"[b] for b in bmes[a + lo:a + hi]) == want
                assert (word[a + lo] >= 0) == known
