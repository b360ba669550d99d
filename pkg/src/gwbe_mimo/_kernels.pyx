# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.  Pure-Python equivalents live in ``kernels.py``."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

def mc_moments(const double[:, :, :, ::1] h,
               const double[:, :, :, ::1] noise,
               const double[:, ::1] coef,
               const double[:, ::1] Q,
               const double[::1] scale,
               const double[:, ::1] sqrtb,
               const cnp.intp_t[::1] cell,
               const double[::1] P,
               double[:, ::1] out):
    """Accumulate per-user moment sums over a block of channel draws.

    ``h`` and ``noise`` are complex arrays viewed as float64, so their last
    axis interleaves real and imaginary parts (length ``2 * Nt``).

    out[u] += [Re A, Im A, B, (Re A)^2, (Im A)^2, B^2, Re A Im A, Re A B,
               Im A B, |g_hat_u|^2 / Nt] where A is the user's own effective
    gain and B the total received power (all streams).
    """
    cdef Py_ssize_t T = h.shape[0], Kt = h.shape[1], N2 = h.shape[3]
    cdef Py_ssize_t tau = Q.shape[0]
    cdef Py_ssize_t t, u, v, w, n, s, m
    cdef double c, ar, ai, b, hh, gr, gi, hr, hi, xr, xi
    cdef double *a = <double *> malloc(Kt * N2 * sizeof(double))
    cdef double *aw
    if a == NULL:
        raise MemoryError()
    try:
        with nogil:
            for t in range(T):
                # LS estimate + MRT direction for every user at its own BS;
                # real coefficients, so this is a real axpy on interleaved data
                for w in range(Kt):
                    m = cell[w]
                    aw = a + w * N2
                    for n in range(N2):
                        aw[n] = 0.0
                    for v in range(Kt):
                        c = coef[w, v]
                        if c != 0.0:
                            for n in range(N2):
                                aw[n] += c * h[t, v, m, n]
                    for s in range(tau):
                        c = Q[s, w]
                        if c != 0.0:
                            for n in range(N2):
                                aw[n] += c * noise[t, m, s, n]
                    hh = 0.0
                    for n in range(N2):
                        hh += aw[n] * aw[n]
                        aw[n] *= scale[w]
                    out[w, 9] += hh / (N2 // 2)
                # downlink effective gains seen by each user
                for u in range(Kt):
                    b = 0.0
                    ar = 0.0
                    ai = 0.0
                    for w in range(Kt):
                        m = cell[w]
                        aw = a + w * N2
                        gr = 0.0
                        gi = 0.0
                        for n in range(0, N2, 2):
                            hr = h[t, u, m, n]
                            hi = h[t, u, m, n + 1]
                            xr = aw[n]
                            xi = aw[n + 1]
                            # conj(h) * a
                            gr += hr * xr + hi * xi
                            gi += hr * xi - hi * xr
                        gr *= sqrtb[u, m]
                        gi *= sqrtb[u, m]
                        b += P[w] * (gr * gr + gi * gi)
                        if w == u:
                            ar = gr
                            ai = gi
                    out[u, 0] += ar
                    out[u, 1] += ai
                    out[u, 2] += b
                    out[u, 3] += ar * ar
                    out[u, 4] += ai * ai
                    out[u, 5] += b * b
                    out[u, 6] += ar * ai
                    out[u, 7] += ar * b
                    out[u, 8] += ai * b
    finally:
        free(a)


def perron_batch(const double[:, :, ::1] M, double tol, long maxiter,
                 double[::1] radius, long[::1] iters, bint warm=True):
    """Spectral radius of each irreducible non-negative ``M[b]``.

    Shifted power iteration on ``M + I`` with Collatz-Wielandt bounds; stops
    when ``max - min`` of ``(M y)_i / y_i`` drops below ``tol * max``.  With
    ``warm`` the iterate carries over between consecutive matrices.
    ``iters[b] = -1`` flags non-convergence.
    """
    cdef Py_ssize_t B = M.shape[0], n = M.shape[1]
    cdef Py_ssize_t k, i, j
    cdef long it
    cdef double lo, hi, r, top, acc
    cdef double *y = <double *> malloc(n * sizeof(double))
    cdef double *my = <double *> malloc(n * sizeof(double))
    if y == NULL or my == NULL:
        free(y)
        free(my)
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                y[i] = 1.0
            for k in range(B):
                if not warm:
                    for i in range(n):
                        y[i] = 1.0
                iters[k] = -1
                radius[k] = -1.0
                for it in range(maxiter):
                    lo = 1e308
                    hi = 0.0
                    top = 0.0
                    for i in range(n):
                        acc = 0.0
                        for j in range(n):
                            acc = acc + M[k, i, j] * y[j]
                        my[i] = acc
                        r = acc / y[i]
                        if r < lo:
                            lo = r
                        if r > hi:
                            hi = r
                        acc = acc + y[i]
                        if acc > top:
                            top = acc
                    if hi - lo <= tol * hi or hi == 0.0:
                        radius[k] = 0.5 * (hi + lo)
                        iters[k] = it + 1
                        break
                    for i in range(n):
                        y[i] = (my[i] + y[i]) / top
                if iters[k] < 0:
                    for i in range(n):
                        y[i] = 1.0
    finally:
        free(y)
        free(my)
