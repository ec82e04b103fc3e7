"""Time each kernel on both backends over a synthetic corpus.

    python3 benchmarks/bench_kernels.py [--sentences N] [--repeat R]

Outputs are checked for equality before timings are printed.
"""

import argparse
import time

import numpy as np

from polyaug import kernels
from polyaug.corpus import pack
from polyaug.synth import SynthConfig, generate_synthetic
from polyaug.text_analysis import word_trie


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sentences", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    d = generate_synthetic(SynthConfig(n_labeled=0, n_unlabeled=args.sentences), seed=0)
    lex = d.lexicon
    codes, offsets = pack(d.unlabeled, lex)
    trie = word_trie(lex)[:4]
    is_poly = lex.n_prons[codes] >= 2
    g = np.flatnonzero(is_poly)
    site_sent = np.searchsorted(offsets, g, side="right") - 1
    site_pos = g - offsets[site_sent]
    rng = np.random.default_rng(0)
    recon = np.where(rng.random(len(codes)) < 0.05, (codes + 1) % lex.n_chars, codes)
    radii = np.array([0, 1, 2, 3, -1])
    scores = rng.normal(size=(len(g), lex.n_pinyin))
    mask = lex.pron_mask_matrix[codes[g]]

    cases = {
        "fmm_segment": lambda impl: kernels.fmm_segment(codes, offsets, trie, impl=impl),
        "window_gather": lambda impl: kernels.window_gather(codes, offsets, site_sent, site_pos, 2, -1, impl=impl),
        "window_verdicts": lambda impl: kernels.window_verdicts(codes, recon, offsets, site_sent, site_pos, radii,
                                                                impl=impl),
        "masked_argmax": lambda impl: kernels.masked_argmax(scores, mask, impl=impl),
    }
    backends = kernels.available_backends()
    print(f"{args.sentences} sentences, {len(codes)} characters, {len(g)} sites; default backend {kernels.BACKEND}")
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for name, fn in cases.items():
        results = {b: best_of(lambda: fn(impl), args.repeat) for b, impl in backends.items()}
        outs = [out for _, out in results.values()]
        assert all(same(outs[0], o) for o in outs[1:]), f"{name}: backends disagree"
        row = f"{name:<16}" + "".join(f"{t * 1e3:>10.2f}ms" for t, _ in results.values())
        if "cython" in results:
            row += f"{results['python'][0] / results['cython'][0]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
