# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels (same contracts as kernels.fallback).

Direct convolution organized as shift-and-accumulate: the kernel-tap loops
sit outside and the inner loops run contiguously over output columns, which
the C compiler auto-vectorizes."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv2d_forward(double[:, :, ::1] x, double[:, :, :, ::1] w, double[::1] b,
                   int sh=1, int sw=1, int ph=0, int pw=0):
    cdef int c_in = x.shape[0], h = x.shape[1], width = x.shape[2]
    cdef int c_out = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef int ho = (h + 2 * ph - kh) // sh + 1
    cdef int wo = (width + 2 * pw - kw) // sw + 1
    out_arr = np.empty((c_out, ho, wo), dtype=np.float64)
    cdef double[:, :, ::1] y = out_arr
    cdef int co, ci, i, j, oi, oj, ii, jj0, oj_lo, oj_hi, oi_lo, oi_hi
    cdef double wv, acc
    cdef double bias
    for co in range(c_out):
        bias = b[co]
        for oi in range(ho):
            for oj in range(wo):
                y[co, oi, oj] = bias
        for ci in range(c_in):
            for i in range(kh):
                for j in range(kw):
                    wv = w[co, ci, i, j]
                    if wv == 0.0:
                        continue
                    # output rows whose input row ii = oi*sh + i - ph is valid
                    oi_lo = 0
                    if i - ph < 0:
                        oi_lo = (-(i - ph) + sh - 1) // sh
                    oi_hi = ho
                    if (ho - 1) * sh + i - ph >= h:
                        oi_hi = (h - 1 - (i - ph)) // sh + 1
                    oj_lo = 0
                    if j - pw < 0:
                        oj_lo = (-(j - pw) + sw - 1) // sw
                    oj_hi = wo
                    if (wo - 1) * sw + j - pw >= width:
                        oj_hi = (width - 1 - (j - pw)) // sw + 1
                    for oi in range(oi_lo, oi_hi):
                        ii = oi * sh + i - ph
                        jj0 = oj_lo * sw + j - pw
                        if sw == 1:
                            for oj in range(oj_lo, oj_hi):
                                y[co, oi, oj] += wv * x[ci, ii, jj0 + (oj - oj_lo)]
                        else:
                            for oj in range(oj_lo, oj_hi):
                                y[co, oi, oj] += wv * x[ci, ii, jj0 + (oj - oj_lo) * sw]
    return out_arr


def conv2d_backward(double[:, :, ::1] x, double[:, :, :, ::1] w,
                    double[:, :, ::1] grad_y,
                    int sh=1, int sw=1, int ph=0, int pw=0):
    cdef int c_in = x.shape[0], h = x.shape[1], width = x.shape[2]
    cdef int c_out = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef int ho = grad_y.shape[1], wo = grad_y.shape[2]
    dx_arr = np.zeros((c_in, h, width), dtype=np.float64)
    dw_arr = np.zeros((c_out, c_in, kh, kw), dtype=np.float64)
    db_arr = np.zeros(c_out, dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef int co, ci, i, j, oi, oj, ii, jj0, oj_lo, oj_hi, oi_lo, oi_hi
    cdef double wv, acc, g
    for co in range(c_out):
        acc = 0.0
        for oi in range(ho):
            for oj in range(wo):
                acc += grad_y[co, oi, oj]
        db[co] = acc
        for ci in range(c_in):
            for i in range(kh):
                for j in range(kw):
                    oi_lo = 0
                    if i - ph < 0:
                        oi_lo = (-(i - ph) + sh - 1) // sh
                    oi_hi = ho
                    if (ho - 1) * sh + i - ph >= h:
                        oi_hi = (h - 1 - (i - ph)) // sh + 1
                    oj_lo = 0
                    if j - pw < 0:
                        oj_lo = (-(j - pw) + sw - 1) // sw
                    oj_hi = wo
                    if (wo - 1) * sw + j - pw >= width:
                        oj_hi = (width - 1 - (j - pw)) // sw + 1
                    wv = w[co, ci, i, j]
                    acc = 0.0
                    for oi in range(oi_lo, oi_hi):
                        ii = oi * sh + i - ph
                        jj0 = oj_lo * sw + j - pw
                        if sw == 1:
                            for oj in range(oj_lo, oj_hi):
                                g = grad_y[co, oi, oj]
                                acc += g * x[ci, ii, jj0 + (oj - oj_lo)]
                                dx[ci, ii, jj0 + (oj - oj_lo)] += g * wv
                        else:
                            for oj in range(oj_lo, oj_hi):
                                g = grad_y[co, oi, oj]
                                acc += g * x[ci, ii, jj0 + (oj - oj_lo) * sw]
                                dx[ci, ii, jj0 + (oj - oj_lo) * sw] += g * wv
                    dw[co, ci, i, j] += acc
    return dx_arr, dw_arr, db_arr


def avg_pool2d_forward(double[:, :, ::1] x, int pm, int pt):
    cdef int c = x.shape[0], h = x.shape[1], w = x.shape[2]
    cdef int ho = h // pm, wo = w // pt
    out_arr = np.zeros((c, ho, wo), dtype=np.float64)
    cdef double[:, :, ::1] y = out_arr
    cdef int ci, oi, oj, i, j
    cdef double acc, inv = 1.0 / (pm * pt)
    for ci in range(c):
        for oi in range(ho):
            for oj in range(wo):
                acc = 0.0
                for i in range(pm):
                    for j in range(pt):
                        acc += x[ci, oi * pm + i, oj * pt + j]
                y[ci, oi, oj] = acc * inv
    return out_arr


def avg_pool2d_backward(double[:, :, ::1] grad_y, in_shape, int pm, int pt):
    cdef int c = in_shape[0], h = in_shape[1], w = in_shape[2]
    cdef int ho = grad_y.shape[1], wo = grad_y.shape[2]
    dx_arr = np.zeros((c, h, w), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef int ci, oi, oj, i, j
    cdef double g, inv = 1.0 / (pm * pt)
    for ci in range(c):
        for oi in range(ho):
            for oj in range(wo):
                g = grad_y[ci, oi, oj] * inv
                for i in range(pm):
                    for j in range(pt):
                        dx[ci, oi * pm + i, oj * pt + j] = g
    return dx_arr
