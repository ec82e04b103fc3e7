# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Signatures and results match ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int32_t i32
ctypedef cnp.int64_t i64
ctypedef cnp.int8_t i8
ctypedef cnp.uint8_t u8


cdef inline i64 _find_child(const i64[::1] child_ptr, const i32[::1] child_code,
                            i64 node, i32 code) noexcept nogil:
    cdef i64 lo = child_ptr[node]
    cdef i64 hi = child_ptr[node + 1]
    cdef i64 mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if child_code[mid] < code:
            lo = mid + 1
        else:
            hi = mid
    if lo < child_ptr[node + 1] and child_code[lo] == code:
        return lo
    return -1


def fmm_segment(const i32[::1] codes, const i64[::1] offsets,
                const i64[::1] child_ptr, const i32[::1] child_code,
                const i32[::1] child_node, const i32[::1] node_word):
    cdef Py_ssize_t n = codes.shape[0]
    cdef Py_ssize_t n_sent = offsets.shape[0] - 1
    bmes_arr = np.empty(n, dtype=np.int8)
    word_arr = np.empty(n, dtype=np.int32)
    cdef i8[::1] bmes = bmes_arr
    cdef i32[::1] word = word_arr
    cdef Py_ssize_t s, cur, end, j, k, best_len
    cdef i64 node, e
    cdef i32 best_word
    with nogil:
        for s in range(n_sent):
            cur = offsets[s]
            end = offsets[s + 1]
            while cur < end:
                node = 0
                best_len = 0
                best_word = -1
                j = cur
                while j < end:
                    if codes[j] < 0:
                        break
                    e = _find_child(child_ptr, child_code, node, codes[j])
                    if e < 0:
                        break
                    node = child_node[e]
                    j += 1
                    if node_word[node] >= 0:
                        best_len = j - cur
                        best_word = node_word[node]
                if best_len == 0:
                    best_len = 1
                if best_len == 1:
                    bmes[cur] = 3
                else:
                    bmes[cur] = 0
                    for k in range(cur + 1, cur + best_len - 1):
                        bmes[k] = 1
                    bmes[cur + best_len - 1] = 2
                for k in range(cur, cur + best_len):
                    word[k] = best_word
                cur += best_len
    return bmes_arr, word_arr


def window_gather(const i32[::1] ids, const i64[::1] offsets, const i64[::1] site_sent,
                  const i64[::1] site_pos, Py_ssize_t radius, i32 pad):
    cdef Py_ssize_t m = site_sent.shape[0]
    cdef Py_ssize_t width = 2 * radius + 1
    out_arr = np.empty((m, width), dtype=np.int32)
    cdef i32[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, p
    cdef i64 start, length
    with nogil:
        for i in range(m):
            start = offsets[site_sent[i]]
            length = offsets[site_sent[i] + 1] - start
            for k in range(width):
                p = site_pos[i] + k - radius
                if p < 0 or p >= length:
                    out[i, k] = pad
                else:
                    out[i, k] = ids[start + p]
    return out_arr


cdef i64 NONE = 0x7FFFFFFFFFFFFFFF


def window_verdicts(const i32[::1] orig, const i32[::1] recon, const i64[::1] offsets,
                    const i64[::1] site_sent, const i64[::1] site_pos, const i64[::1] radii):
    cdef Py_ssize_t m = site_sent.shape[0]
    cdef Py_ssize_t nr = radii.shape[0]
    out_arr = np.empty((m, nr), dtype=np.uint8)
    cdef u8[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, d, maxd
    cdef i64 start, length, pos, nearest
    with nogil:
        for i in range(m):
            start = offsets[site_sent[i]]
            length = offsets[site_sent[i] + 1] - start
            pos = site_pos[i]
            # nearest mismatch distance from the site; NONE when the sentence matches
            nearest = NONE
            maxd = pos if pos > length - 1 - pos else length - 1 - pos
            for d in range(maxd + 1):
                if pos - d >= 0 and orig[start + pos - d] != recon[start + pos - d]:
                    nearest = d
                    break
                if pos + d < length and orig[start + pos + d] != recon[start + pos + d]:
                    nearest = d
                    break
            for k in range(nr):
                if radii[k] < 0:
                    out[i, k] = nearest == NONE
                else:
                    out[i, k] = nearest > radii[k]
    return out_arr


def masked_argmax(const double[:, ::1] scores, const u8[:, ::1] mask):
    cdef Py_ssize_t m = scores.shape[0]
    cdef Py_ssize_t c = scores.shape[1]
    out_arr = np.empty(m, dtype=np.int64)
    cdef i64[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef i64 best
    cdef double bv
    with nogil:
        for i in range(m):
            best = -1
            bv = 0.0
            for j in range(c):
                if mask[i, j] and (best < 0 or scores[i, j] > bv):
                    best = j
                    bv = scores[i, j]
            out[i] = best
    return out_arr
