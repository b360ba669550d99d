import numpy as np
import pytest

from gwbe_mimo import kernels

compiled = pytest.mark.skipif("compiled" not in kernels.available_backends(),
                              reason="compiled kernels not built")


def _mc_inputs(rng, T=64, L=2, K=3, tau=2, Nt=5):
    n = L * K
    cn = lambda *s: rng.standard_normal(s) + 1j * rng.standard_normal(s)
    return (cn(T, n, L, Nt), cn(T, L, tau, Nt), rng.random((n, n)), rng.standard_normal((tau, n)),
            rng.random(n), rng.random((n, L)), np.repeat(np.arange(L), K), rng.random(n))


def _reference(h, noise, coef, Q, scale, sqrtb, cell, P):
    # naive per-trial loops
    T, n, L, Nt = h.shape
    out = np.zeros((n, 10))
    for t in range(T):
        a = np.array([(coef[w] @ h[t, :, cell[w]] + Q[:, w] @ noise[t, cell[w]]) for w in range(n)])
        out[:, 9] += (np.abs(a) ** 2).sum(axis=1) / Nt
        a = a * scale[:, None]
        for u in range(n):
            g = np.array([sqrtb[u, cell[w]] * np.vdot(h[t, u, cell[w]], a[w]) for w in range(n)])
            A, B = g[u], np.sum(P * np.abs(g) ** 2)
            out[u, :9] += [A.real, A.imag, B, A.real**2, A.imag**2, B * B, A.real * A.imag,
                           A.real * B, A.imag * B]
    return out


@pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=compiled)])
def test_mc_moments_match_loops(backend):
    args = _mc_inputs(np.random.default_rng(0))
    out = np.zeros((6, 10))
    kernels.mc_moments(*args, out, backend=backend)
    assert np.allclose(out, _reference(*args), rtol=1e-11, atol=1e-11)


@compiled
def test_perron_backends_agree():
    rng = np.random.default_rng(1)
    M = rng.random((200, 7, 7)) * 0.3
    r1, i1 = kernels.perron_batch(M, backend="python")
    r2, i2 = kernels.perron_batch(M, backend="compiled", warm=False)
    r3, _ = kernels.perron_batch(M, backend="compiled")
    dense = np.max(np.abs(np.linalg.eigvals(M)), axis=1)
    for r in (r1, r2, r3):
        assert np.allclose(r, dense, rtol=1e-11)
    assert np.array_equal(i1, i2)


@pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=compiled)])
def test_perron_flags_nonconvergence(backend):
    M = np.array([[[0.5, 0.4], [0.1, 0.2]]])
    r, it = kernels.perron_batch(M, maxiter=1, backend=backend)
    assert it[0] == -1


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.perron_batch(np.eye(2), backend="fortran")
