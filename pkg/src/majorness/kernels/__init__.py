"""Convolution kernels with a compiled fast path.

Dispatch is per operation, following benchmarks/bench_kernels.py: the im2col
forward rides BLAS and beats hand loops at every measured shape, while the
compiled shift-accumulate backward wins for 3x3/5x5 kernels (the training
hot spot). MAJORNESS_FORCE_FALLBACK=1 forces pure numpy; a missing extension
degrades to numpy silently.
"""
import os

import numpy as np

from . import fallback

_compiled = None
if os.environ.get("MAJORNESS_FORCE_FALLBACK") != "1":
    try:
        from . import _convops as _compiled  # type: ignore[attr-defined]
    except ImportError:
        _compiled = None

BACKEND = "hybrid" if _compiled is not None else "fallback"


def _as_c_float64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def conv2d_forward(x, w, b, sh=1, sw=1, ph=0, pw=0):
    return fallback.conv2d_forward(
        _as_c_float64(x), _as_c_float64(w), _as_c_float64(b), sh, sw, ph, pw
    )


def conv2d_backward(x, w, grad_y, sh=1, sw=1, ph=0, pw=0):
    impl = _compiled if _compiled is not None else fallback
    return impl.conv2d_backward(
        _as_c_float64(x), _as_c_float64(w), _as_c_float64(grad_y), sh, sw, ph, pw
    )


def avg_pool2d_forward(x, pm, pt):
    impl = _compiled if _compiled is not None else fallback
    return impl.avg_pool2d_forward(_as_c_float64(x), pm, pt)


def avg_pool2d_backward(grad_y, in_shape, pm, pt):
    impl = _compiled if _compiled is not None else fallback
    return impl.avg_pool2d_backward(_as_c_float64(grad_y), tuple(in_shape), pm, pt)


def backend_name() -> str:
    return BACKEND
