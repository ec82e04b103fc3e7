"""Pure-Python/numpy versions of the compiled kernels in ``_ckernels.pyx``.

Used when the extension is not built or ``POLYAUG_PURE_PYTHON=1`` is set.
"""

import numpy as np


def fmm_segment(codes, offsets, child_ptr, child_code, child_node, node_word):
    """Greedy forward longest match over a flattened trie.

    Returns per-character B/M/E/S codes (0..3) and the covering word index
    (-1 for single-character fallback spans).
    """
    n = len(codes)
    bmes = np.empty(n, dtype=np.int8)
    word = np.empty(n, dtype=np.int32)
    codes_l = codes.tolist()
    ptr = child_ptr.tolist()
    ccode = child_code.tolist()
    cnode = child_node.tolist()
    nword = node_word.tolist()
    # per-node child dicts keep the fallback from being quadratic in fan-out
    children = [dict(zip(ccode[ptr[v]:ptr[v + 1]], cnode[ptr[v]:ptr[v + 1]])) for v in range(len(nword))]
    bm = [0] * n
    wd = [0] * n
    offs = offsets.tolist()
    for s in range(len(offs) - 1):
        cur, end = offs[s], offs[s + 1]
        while cur < end:
            node, best_len, best_word = 0, 0, -1
            j = cur
            while j < end:
                node = children[node].get(codes_l[j])
                if node is None:
                    break
                j += 1
                if nword[node] >= 0:
                    best_len, best_word = j - cur, nword[node]
            if best_len == 0:
                best_len = 1
            if best_len == 1:
                bm[cur] = 3
            else:
                bm[cur] = 0
                for k in range(cur + 1, cur + best_len - 1):
                    bm[k] = 1
                bm[cur + best_len - 1] = 2
            for k in range(cur, cur + best_len):
                wd[k] = best_word
            cur += best_len
    bmes[:] = bm
    word[:] = wd
    return bmes, word


def window_gather(ids, offsets, site_sent, site_pos, radius, pad):
    start = offsets[site_sent]
    length = offsets[site_sent + 1] - start
    rel = site_pos[:, None] + np.arange(-radius, radius + 1)[None, :]
    valid = (rel >= 0) & (rel < length[:, None])
    idx = np.where(valid, start[:, None] + rel, 0)
    if len(ids) == 0:
        return np.full(rel.shape, pad, dtype=np.int32)
    return np.where(valid, ids[idx], pad).astype(np.int32)


def window_verdicts(orig, recon, offsets, site_sent, site_pos, radii):
    n = len(orig)
    m = len(site_sent)
    out = np.empty((m, len(radii)), dtype=np.uint8)
    if m == 0:
        return out
    idx = np.arange(n, dtype=np.int64)
    bad = orig != recon
    prev_bad = np.maximum.accumulate(np.where(bad, idx, -1))
    next_bad = np.minimum.accumulate(np.where(bad, idx, n)[::-1])[::-1]
    start = offsets[site_sent]
    end = offsets[site_sent + 1]
    g = start + site_pos
    none = np.iinfo(np.int64).max
    left = np.where(prev_bad[g] >= start, g - prev_bad[g], none)
    right = np.where(next_bad[g] < end, next_bad[g] - g, none)
    nearest = np.minimum(left, right)
    for k, r in enumerate(np.asarray(radii).tolist()):
        out[:, k] = (nearest == none) if r < 0 else (nearest > r)
    return out


def masked_argmax(scores, mask):
    mask = mask.astype(bool, copy=False)
    out = np.where(mask, scores, -np.inf).argmax(axis=1).astype(np.int64)
    out[~mask.any(axis=1)] = -1
    return out
