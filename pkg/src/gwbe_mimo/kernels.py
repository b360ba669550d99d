"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension ``_kernels`` is used when it imports and the
environment variable ``GWBE_MIMO_PURE`` is unset (or "0").  Both backends
implement the same contracts; they agree to rounding, not bit for bit.
"""
from __future__ import annotations

import os

import numpy as np

try:
    if os.environ.get("GWBE_MIMO_PURE", "0") not in ("", "0"):
        raise ImportError("pure-Python backend forced")
    from . import _kernels as _ext
except ImportError:
    _ext = None

BACKEND = "compiled" if _ext is not None else "python"
N_MOMENTS = 10


def available_backends() -> list[str]:
    return ["python"] + (["compiled"] if _ext is not None else [])


def _use(backend: str | None) -> str:
    b = backend or BACKEND
    if b == "compiled" and _ext is None:
        raise RuntimeError("compiled kernels are not built")
    if b not in ("compiled", "python"):
        raise ValueError(f"unknown backend {b!r}")
    return b


# --- Monte-Carlo moment accumulation ----------------------------------------

def _mc_moments_py(h, noise, coef, Q, scale, sqrtb, cell, P, out):
    T, Kt, L, Nt = h.shape
    A = np.empty((T, Kt), dtype=complex)
    Bsum = np.zeros((T, Kt))
    for m in range(L):
        users = np.flatnonzero(cell == m)
        if users.size == 0:
            continue
        # g_hat[t, w, n] for users w served by BS m
        ghat = np.matmul(coef[users][None, :, :], h[:, :, m, :])
        ghat += np.matmul(Q[:, users].T[None, :, :], noise[:, m, :, :])
        out[users, 9] += (np.abs(ghat) ** 2).sum(axis=(0, 2)) / Nt
        a = ghat * scale[users][None, :, None]
        # g[t, u, w] = sqrt(beta[u, m]) * h[t, u, m]^H a[t, w]
        g = np.matmul(h[:, :, m, :].conj(), a.transpose(0, 2, 1))
        g *= sqrtb[:, m][None, :, None]
        Bsum += (np.abs(g) ** 2 * P[users][None, None, :]).sum(axis=2)
        A[:, users] = g[:, users, np.arange(users.size)]
    ar, ai = A.real, A.imag
    cols = (ar, ai, Bsum, ar * ar, ai * ai, Bsum * Bsum, ar * ai, ar * Bsum, ai * Bsum)
    for k, c in enumerate(cols):
        out[:, k] += c.sum(axis=0)


def mc_moments(h, noise, coef, Q, scale, sqrtb, cell, P, out, backend=None):
    """Add one block's moment sums into ``out`` (K_tot x 10), in place."""
    args = (
        np.ascontiguousarray(h, dtype=complex),
        np.ascontiguousarray(noise, dtype=complex),
        np.ascontiguousarray(coef, dtype=float),
        np.ascontiguousarray(Q, dtype=float),
        np.ascontiguousarray(scale, dtype=float),
        np.ascontiguousarray(sqrtb, dtype=float),
        np.ascontiguousarray(cell, dtype=np.intp),
        np.ascontiguousarray(P, dtype=float),
    )
    if _use(backend) == "compiled":
        h2, n2 = (x.view(np.float64).reshape(*x.shape[:-1], 2 * x.shape[-1]) for x in args[:2])
        _ext.mc_moments(h2, n2, *args[2:], out)
    else:
        _mc_moments_py(*args, out)


# --- Perron root of non-negative matrices -----------------------------------

def _perron_py(M, tol, maxiter):
    B, n, _ = M.shape
    y = np.ones((B, n))
    radius = np.full(B, -1.0)
    iters = np.full(B, -1, dtype=np.int64)
    active = np.arange(B)
    for it in range(maxiter):
        Ma, ya = M[active], y[active]
        my = np.einsum("bij,bj->bi", Ma, ya)
        r = my / ya
        lo, hi = r.min(axis=1), r.max(axis=1)
        done = (hi - lo <= tol * hi) | (hi == 0.0)
        radius[active[done]] = 0.5 * (hi[done] + lo[done])
        iters[active[done]] = it + 1
        nxt = my + ya
        y[active] = nxt / nxt.max(axis=1, keepdims=True)
        active = active[~done]
        if active.size == 0:
            break
    return radius, iters


def perron_batch(M, tol: float = 1e-12, maxiter: int = 100_000, backend=None,
                 warm: bool = True):
    """Spectral radii of a stack of irreducible non-negative matrices.

    Returns ``(radius, iters)``; ``iters == -1`` marks entries that did not
    converge within ``maxiter`` steps.
    """
    M = np.ascontiguousarray(M, dtype=float)
    if M.ndim == 2:
        M = M[None]
    if _use(backend) == "compiled":
        radius = np.empty(M.shape[0])
        iters = np.empty(M.shape[0], dtype=np.int_)
        _ext.perron_batch(M, float(tol), int(maxiter), radius, iters, bool(warm))
        return radius, iters.astype(np.int64)
    return _perron_py(M, tol, maxiter)
