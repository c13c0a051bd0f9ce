# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; mirrors ``_kernels_py`` on flattened inputs."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, log1p, expm1

cnp.import_array()

cdef enum:
    MAXK = 5
    MAXD = 64


cdef inline double fast_asinh(double x) nogil:
    # x >= 0 only; log1p form keeps full relative precision near zero
    return log1p(x + x * x / (1.0 + sqrt(1.0 + x * x)))


cdef inline double fast_sinh(double x) nogil:
    cdef double e = expm1(fabs(x))
    cdef double r = 0.5 * e * (e + 2.0) / (e + 1.0)
    return r if x >= 0 else -r


cdef inline double hyp_sinh2half(const double* x, const double* y, Py_ssize_t n) nogil:
    # sinh^2(d/2) = sinh^2((A-B)/2) + sinh A sinh B sin^2(theta/2), A, B the radii
    cdef double nx = 0.0, ny = 0.0, c2 = 0.0, a, b, x0, y0
    cdef Py_ssize_t i
    for i in range(1, n):
        nx += x[i] * x[i]
        ny += y[i] * y[i]
    x0 = sqrt(1.0 + nx)
    y0 = sqrt(1.0 + ny)
    nx = sqrt(nx)
    ny = sqrt(ny)
    cdef double sx = nx if nx > 0 else 1.0
    cdef double sy = ny if ny > 0 else 1.0
    for i in range(1, n):
        a = x[i] / sx - y[i] / sy
        c2 += a * a
    b = (nx - ny) / sqrt(2.0 * (1.0 + x0 * y0 + nx * ny))
    return b * b + 0.25 * nx * ny * c2


cdef inline double hyp_dist(const double* x, const double* y, Py_ssize_t n) nogil:
    return 2.0 * fast_asinh(sqrt(hyp_sinh2half(x, y, n)))


cdef inline double prod_dist2(const double* p, const double* q, const long* lay, Py_ssize_t F) nogil:
    cdef double acc = 0.0, d
    cdef Py_ssize_t f, i, off, n
    for f in range(F):
        off = lay[3 * f + 1]
        n = lay[3 * f + 2]
        if lay[3 * f]:
            d = hyp_dist(p + off, q + off, n)
            acc += d * d
        else:
            for i in range(n):
                d = p[off + i] - q[off + i]
                acc += d * d
    return acc


cdef inline void prod_geo(const double* p, const double* q, double t, double* out,
                          const long* lay, Py_ssize_t F) nogil:
    cdef Py_ssize_t f, i, off, n
    cdef double d, a, b, sd, s2, sh
    for f in range(F):
        off = lay[3 * f + 1]
        n = lay[3 * f + 2]
        if lay[3 * f]:
            sh = hyp_sinh2half(p + off, q + off, n)
            d = 2.0 * fast_asinh(sqrt(sh))
            if d < 1e-12:
                a = 1.0 - t
                b = t
            else:
                sd = 2.0 * sqrt(sh * (1.0 + sh))
                a = fast_sinh((1.0 - t) * d) / sd
                b = fast_sinh(t * d) / sd
            s2 = 0.0
            for i in range(1, n):
                out[off + i] = a * p[off + i] + b * q[off + i]
                s2 += out[off + i] * out[off + i]
            out[off] = sqrt(1.0 + s2)
        else:
            for i in range(n):
                out[off + i] = p[off + i] + t * (q[off + i] - p[off + i])


cdef inline void cone(const double* corners, const double* bary, Py_ssize_t K, Py_ssize_t D,
                      double* out, double* tmp, const long* lay, Py_ssize_t F) nogil:
    cdef Py_ssize_t i, j
    cdef double cum = bary[0], t
    for j in range(D):
        out[j] = corners[j]
    for i in range(1, K + 1):
        cum += bary[i]
        if fabs(cum) > 1e-300:
            t = bary[i] / cum
        else:
            t = 1.0
        prod_geo(out, corners + i * D, t, tmp, lay, F)
        for j in range(D):
            out[j] = tmp[j]


cdef double det_small(double* G, Py_ssize_t K) nogil:
    # Gaussian elimination with partial pivoting on a K x K row-major matrix
    cdef Py_ssize_t i, j, r, piv
    cdef double det = 1.0, m, tmp
    for i in range(K):
        piv = i
        for r in range(i + 1, K):
            if fabs(G[r * K + i]) > fabs(G[piv * K + i]):
                piv = r
        if G[piv * K + i] == 0.0:
            return 0.0
        if piv != i:
            for j in range(K):
                tmp = G[i * K + j]
                G[i * K + j] = G[piv * K + j]
                G[piv * K + j] = tmp
            det = -det
        det *= G[i * K + i]
        for r in range(i + 1, K):
            m = G[r * K + i] / G[i * K + i]
            for j in range(i, K):
                G[r * K + j] -= m * G[i * K + j]
    return det


def pair_dist(const double[:, ::1] P, const double[:, ::1] Q, const long[:, ::1] layout):
    cdef Py_ssize_t N = P.shape[0], F = layout.shape[0], i
    out = np.empty(N)
    cdef double[::1] o = out
    cdef const long* lay = &layout[0, 0]
    with nogil:
        for i in range(N):
            o[i] = sqrt(prod_dist2(&P[i, 0], &Q[i, 0], lay, F))
    return out


def geodesic(const double[:, ::1] P, const double[:, ::1] Q, const double[::1] t, const long[:, ::1] layout):
    cdef Py_ssize_t N = P.shape[0], D = P.shape[1], F = layout.shape[0], i
    out = np.empty((N, D))
    cdef double[:, ::1] o = out
    cdef const long* lay = &layout[0, 0]
    with nogil:
        for i in range(N):
            prod_geo(&P[i, 0], &Q[i, 0], t[i], &o[i, 0], lay, F)
    return out


def cone_eval(const double[:, :, ::1] corners, const double[:, ::1] bary, const long[:, ::1] layout):
    cdef Py_ssize_t N = corners.shape[0], K = corners.shape[1] - 1, D = corners.shape[2]
    cdef Py_ssize_t F = layout.shape[0], i
    out = np.empty((N, D))
    cdef double[:, ::1] o = out
    cdef double tmp[MAXD]
    cdef const long* lay = &layout[0, 0]
    if D > MAXD:
        raise ValueError("ambient dimension too large for the compiled kernel")
    with nogil:
        for i in range(N):
            cone(&corners[i, 0, 0], &bary[i, 0], K, D, &o[i, 0], tmp, lay, F)
    return out


def simplex_volumes(const double[:, :, ::1] corners, const long[:, ::1] layout, const double[:, ::1] nodes, double h):
    cdef Py_ssize_t S = corners.shape[0], K = corners.shape[1] - 1, D = corners.shape[2]
    cdef Py_ssize_t F = layout.shape[0], Q = nodes.shape[0]
    cdef Py_ssize_t s, q, a, b, j
    out = np.zeros(S)
    cdef double[::1] o = out
    if S == 0 or K == 0:
        return out
    if K > MAXK or D > MAXD:
        raise ValueError("simplex dimension or ambient dimension too large for the compiled kernel")
    cdef const long* lay = &layout[0, 0]
    cdef double pts[(MAXK + 1) * MAXD]
    cdef double tmp[MAXD]
    cdef double bary[MAXK + 1]
    cdef double d0[MAXK]
    cdef double G[MAXK * MAXK]
    cdef double acc, det, diag, fact = 1.0, h2k = 1.0
    for j in range(2, K + 1):
        fact *= j
    for j in range(K):
        h2k *= h * h
    with nogil:
        for s in range(S):
            if K == 1:
                o[s] = sqrt(prod_dist2(&corners[s, 0, 0], &corners[s, 1, 0], lay, F))
                continue
            acc = 0.0
            for q in range(Q):
                for a in range(K + 1):
                    for j in range(K + 1):
                        bary[j] = nodes[q, j]
                    if a > 0:
                        bary[0] -= h
                        bary[a] += h
                    cone(&corners[s, 0, 0], bary, K, D, pts + a * D, tmp, lay, F)
                for a in range(K):
                    d0[a] = prod_dist2(pts, pts + (a + 1) * D, lay, F)
                for a in range(K):
                    G[a * K + a] = d0[a]
                    for b in range(a + 1, K):
                        G[a * K + b] = 0.5 * (d0[a] + d0[b] - prod_dist2(pts + (a + 1) * D, pts + (b + 1) * D, lay, F))
                        G[b * K + a] = G[a * K + b]
                diag = 0.0
                for a in range(K):
                    if G[a * K + a] > diag:
                        diag = G[a * K + a]
                diag = diag ** K
                det = det_small(G, K)
                if det > 1e-12 * diag:
                    acc += sqrt(det / h2k)
            o[s] = acc / Q / fact
    return out
