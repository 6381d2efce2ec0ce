# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for difference-bound matrices.

Same packed-bound encoding and semantics as _dbm_py; see that module
for documentation.  Operates on Python lists of ints via a C scratch
buffer, which keeps the call sites identical across backends.
"""

from libc.stdlib cimport malloc, free

INF = 1 << 60

cdef long long C_INF = <long long>1 << 60
cdef long long C_ZERO = 1


def pack(value, weak):
    return 2 * value + (1 if weak else 0)


def unpack(b):
    return (b >> 1), bool(b & 1)


def badd(a, b):
    if a >= INF or b >= INF:
        return INF
    return a + b - ((a & 1) | (b & 1))


def closure(m, int n):
    cdef int i, j, k, nn = n * n
    cdef long long ik, kj, s
    cdef long long *w = <long long *>malloc(nn * sizeof(long long))
    if w == NULL:
        raise MemoryError()
    try:
        for i in range(nn):
            w[i] = m[i]
        for k in range(n):
            for i in range(n):
                ik = w[i * n + k]
                if ik >= C_INF:
                    continue
                for j in range(n):
                    kj = w[k * n + j]
                    if kj >= C_INF:
                        continue
                    s = ik + kj - ((ik & 1) | (kj & 1))
                    if s < w[i * n + j]:
                        w[i * n + j] = s
        for i in range(n):
            if w[i * n + i] < C_ZERO:
                return False
            w[i * n + i] = C_ZERO
        for i in range(nn):
            m[i] = w[i]
        return True
    finally:
        free(w)


def close1(m, int n, int a, int b):
    cdef int i, j, nn = n * n
    cdef long long ab, ia, iab, bj, s
    cdef long long *w = <long long *>malloc(nn * sizeof(long long))
    if w == NULL:
        raise MemoryError()
    try:
        for i in range(nn):
            w[i] = m[i]
        ab = w[a * n + b]
        if ab < C_INF:
            for i in range(n):
                ia = w[i * n + a]
                if ia >= C_INF:
                    continue
                iab = ia + ab - ((ia & 1) | (ab & 1))
                for j in range(n):
                    bj = w[b * n + j]
                    if bj >= C_INF:
                        continue
                    s = iab + bj - ((iab & 1) | (bj & 1))
                    if s < w[i * n + j]:
                        w[i * n + j] = s
        for i in range(n):
            if w[i * n + i] < C_ZERO:
                return False
            w[i * n + i] = C_ZERO
        for i in range(nn):
            m[i] = w[i]
        return True
    finally:
        free(w)


def subsumes(tuple a, tuple b, int nn):
    cdef int i
    for i in range(nn):
        if <long long>a[i] < <long long>b[i]:
            return False
    return True
