import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwbe_mimo.design_baseline import (
    fos_design, harmonic_frame, simplex_frame, tight_frame, wbe_correlation, wbe_design,
)
from gwbe_mimo.errors import DimensionMismatch, EmptyGroup, InfeasibleFrame
from gwbe_mimo.netmodel import NetworkConfig


def test_simplex_equiangular():
    F = simplex_frame(3)
    G = F.T @ F
    off = G[~np.eye(4, dtype=bool)] ** 2
    assert np.allclose(off, 1 / 9, atol=1e-14)
    assert np.ptp(np.abs(G[~np.eye(4, dtype=bool)])) < 1e-10
    assert wbe_correlation(4, 3) ** 2 == pytest.approx(1 / 9)


def test_identity_frame():
    assert np.array_equal(tight_frame(3, 3), np.eye(3))
    assert wbe_correlation(3, 3) == 0.0
    with pytest.raises(InfeasibleFrame):
        tight_frame(2, 3)


@pytest.mark.parametrize("n,tau", [(12, 3), (7, 2), (9, 4), (5, 3), (20, 5)])
def test_tight_frames(n, tau):
    F = tight_frame(n, tau)
    assert np.allclose(np.linalg.norm(F, axis=0), 1, atol=1e-12)
    assert np.max(np.abs(F @ F.T - n / tau * np.eye(tau))) < 1e-9
    G = F.T @ F
    assert np.trace(G @ G) == pytest.approx(n * n / tau, abs=1e-8)


def test_welch_n12_tau3():
    # frozen: direct trace computation gives n^2 / tau = 48
    G = harmonic_frame(12, 3).T @ harmonic_frame(12, 3)
    assert np.sum(G * G) == pytest.approx(48.0, abs=1e-8)


def test_wbe_modes():
    cfg = NetworkConfig.symmetric(3, 4, 3, 1.0, 0.9)
    pc = wbe_design(cfg)
    assert np.array_equal(pc.block(0), pc.block(2))
    net = wbe_design(cfg, "network")
    assert np.max(np.abs(net.Q @ net.Q.T - 4 * np.eye(3))) < 1e-9
    with pytest.raises(ValueError):
        wbe_design(cfg, "other")
    with pytest.raises(InfeasibleFrame):
        wbe_design(NetworkConfig.symmetric(2, 2, 3, 1.0, 0.5))


def test_fos_round_robin_sizes():
    cfg = NetworkConfig.symmetric(3, 4, 3, 1.0, 0.9)
    book, asg = fos_design(cfg)
    assert asg.sizes == [6, 3, 3]
    assert asg.groups[0] == (0, 3, 4, 7, 8, 11)
    G = book.gram()
    same = np.array([[asg.sequence_of(u) == asg.sequence_of(v) for v in range(12)] for u in range(12)])
    assert np.array_equal(G, same.astype(float))


def test_fos_orthogonal_single_cell():
    book, asg = fos_design(NetworkConfig.symmetric(1, 3, 3))
    assert np.array_equal(book.gram(), np.eye(3))
    assert asg.sizes == [1, 1, 1]


def test_fos_explicit_errors():
    cfg = NetworkConfig.symmetric(2, 2, 2, 1.0, 0.5)
    with pytest.raises(EmptyGroup):
        fos_design(cfg, [[0, 1, 2, 3]])
    with pytest.raises(DimensionMismatch):
        fos_design(cfg, [[0, 1], [2]])
    cfg1 = NetworkConfig.symmetric(2, 2, 1, 1.0, 0.5)
    book, asg = fos_design(cfg1, [[0, 1, 2, 3]])
    assert np.array_equal(book.gram(), np.ones((4, 4)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 5))
def test_fos_gram_block_structure(L, K, tau):
    book, asg = fos_design(NetworkConfig.symmetric(L, K, tau, 1.0, 0.5 if L > 1 else None)) \
        if tau <= L * K else (None, None)
    if book is None:
        return
    G = book.gram()
    assert set(np.unique(G)) <= {0.0, 1.0}
    assert sorted(u for g in asg.groups for u in g) == list(range(L * K))
