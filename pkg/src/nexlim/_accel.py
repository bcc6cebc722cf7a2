"""Compiled pair-interaction sums.

All reductions run over the source index in ascending order, one row per
target, so the result does not depend on the thread count.  Every solver in
the package funnels its O(N^2) work through these few kernels; identical
inputs therefore give bit-identical outputs whichever solver asked.
"""

import math
import os

import numba
import numpy as np
from numba import njit, prange

# OpenMP tolerates concurrent callers from a thread pool; workqueue does not
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "omp"

LINEAR_DIFF = 0   # p0 * (y - x)
LINEAR = 1        # p0 * x + p1 * y
SINE = 2          # p0 * sin(y - x), d = 1
HK_BUMP = 3       # (y - x) * 1[|y - x| <= p0]
SGN_DIFF = 4      # sgn(y - x), sgn(0) = 0, d = 1

S_SGN = 0         # s(z) = sgn(z)
S_TANH = 1        # s(z) = tanh(p0 * z)


def set_threads_from_env():
    n = os.environ.get("NEXLIM_THREADS")
    if n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


@njit(cache=True)
def _sgn(z):
    if z > 0.0:
        return 1.0
    if z < 0.0:
        return -1.0
    return 0.0


@njit(parallel=True, cache=True)
def pair_sum(W, row_bcast, q, y, form, p0, p1, out):
    """out[r] = sum_j W[r, j] * phi(q[r], y[j]) for j ascending.

    With ``row_bcast`` the single row ``W[0]`` is used for every target.
    """
    nq, d = q.shape
    ny = y.shape[0]
    rmul = 0 if row_bcast else 1
    if form == SINE:
        sy = np.empty(ny)
        cy = np.empty(ny)
        for j in range(ny):
            sy[j] = math.sin(y[j, 0])
            cy[j] = math.cos(y[j, 0])
        for r in prange(nq):
            wr = r * rmul
            acc_s = 0.0
            acc_c = 0.0
            for j in range(ny):
                w = W[wr, j]
                acc_s += w * sy[j]
                acc_c += w * cy[j]
            out[r, 0] = p0 * (math.cos(q[r, 0]) * acc_s - math.sin(q[r, 0]) * acc_c)
        return
    for r in prange(nq):
        wr = r * rmul
        if form == HK_BUMP:
            for k in range(d):
                out[r, k] = 0.0
            for j in range(ny):
                dist2 = 0.0
                for k in range(d):
                    dk = y[j, k] - q[r, k]
                    dist2 += dk * dk
                if math.sqrt(dist2) <= p0:
                    w = W[wr, j]
                    for k in range(d):
                        out[r, k] += w * (y[j, k] - q[r, k])
        else:
            for k in range(d):
                acc = 0.0
                qk = q[r, k]
                for j in range(ny):
                    w = W[wr, j]
                    if form == LINEAR_DIFF:
                        acc += w * (p0 * (y[j, k] - qk))
                    elif form == LINEAR:
                        acc += w * (p0 * qk + p1 * y[j, k])
                    else:
                        acc += w * _sgn(y[j, k] - qk)
                out[r, k] = acc


@njit(parallel=True, cache=True)
def row_sums(M, out):
    """Ascending-order row sums of a (n, m) or (n, m, d) array."""
    n = M.shape[0]
    m = M.shape[1]
    d = M.shape[2]
    for r in prange(n):
        for k in range(d):
            acc = 0.0
            for j in range(m):
                acc += M[r, j, k]
            out[r, k] = acc


@njit(parallel=True, cache=True)
def source_k1(m, x, sform, p0, out):
    """out[i] = sum_j m[j] * s(sum_k (x[j, k] - x[i, k])) ascending in j."""
    n, d = x.shape
    for i in prange(n):
        acc = 0.0
        for j in range(n):
            z = 0.0
            for k in range(d):
                z += x[j, k] - x[i, k]
            if sform == S_SGN:
                v = _sgn(z)
            else:
                v = math.tanh(p0 * z)
            acc += m[j] * v
        out[i] = acc


@njit(parallel=True, cache=True)
def competition_sum(m, x, A, sform, p0, out):
    """out[i] = sum_j m[j] * s(x[i] - x[j]) * (A[i] + A[j]), d = 1."""
    n = x.shape[0]
    for i in prange(n):
        acc = 0.0
        for j in range(n):
            z = x[i, 0] - x[j, 0]
            if sform == S_SGN:
                v = _sgn(z)
            else:
                v = math.tanh(p0 * z)
            acc += m[j] * v * (A[i] + A[j])
        out[i] = acc


@njit(cache=True)
def _half_sums(V, rows0, nrows):
    n = V.shape[1]
    S = np.zeros((1 << nrows, n))
    for mask in range(1, 1 << nrows):
        low = mask & (-mask)
        b = 0
        while (1 << b) != low:
            b += 1
        prev = mask ^ low
        for j in range(n):
            S[mask, j] = S[prev, j] + V[rows0 + b, j]
    return S


@njit(cache=True)
def cut_max_abs(V):
    """max over row subsets S, column subsets T of |sum_{S x T} V|.

    For fixed S the best T keeps all columns of one sign, so only the 2^n row
    subsets are enumerated; rows are split in halves whose partial sums are
    tabulated once.
    """
    n = V.shape[0]
    h = n // 2
    A = _half_sums(V, 0, h)
    B = _half_sums(V, h, n - h)
    best = 0.0
    m = V.shape[1]
    for a in range(A.shape[0]):
        for b in range(B.shape[0]):
            pos = 0.0
            neg = 0.0
            for j in range(m):
                c = A[a, j] + B[b, j]
                if c >= 0.0:
                    pos += c
                else:
                    neg -= c
            if pos > best:
                best = pos
            if neg > best:
                best = neg
    return best
