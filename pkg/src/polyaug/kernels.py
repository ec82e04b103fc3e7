"""Kernel backend selection.

The compiled extension is used when importable; set ``POLYAUG_PURE_PYTHON=1``
to force the numpy fallback. Every function accepts and returns numpy arrays
and normalizes dtypes/contiguity before dispatch.
"""

import os

import numpy as np

from . import _pykernels

_impl = _pykernels
BACKEND = "python"
if not os.environ.get("POLYAUG_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass


def available_backends():
    """Map backend name -> module, for tests and benchmarks."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


def _i32(a):
    return np.ascontiguousarray(a, dtype=np.int32)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def fmm_segment(codes, offsets, trie, impl=None):
    impl = impl or _impl
    child_ptr, child_code, child_node, node_word = trie
    return impl.fmm_segment(_i32(codes), _i64(offsets), _i64(child_ptr), _i32(child_code),
                            _i32(child_node), _i32(node_word))


def window_gather(ids, offsets, site_sent, site_pos, radius, pad, impl=None):
    impl = impl or _impl
    return impl.window_gather(_i32(ids), _i64(offsets), _i64(site_sent), _i64(site_pos), int(radius), int(pad))


def window_verdicts(orig, recon, offsets, site_sent, site_pos, radii, impl=None):
    """uint8 (sites, radii) matrix; a negative radius means the whole sentence."""
    impl = impl or _impl
    return impl.window_verdicts(_i32(orig), _i32(recon), _i64(offsets), _i64(site_sent), _i64(site_pos),
                                _i64(radii))


def masked_argmax(scores, mask, impl=None):
    impl = impl or _impl
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=bool).view(np.uint8)
    return impl.masked_argmax(scores, mask)
