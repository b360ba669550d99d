import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwbe_mimo.design_gwbe import (
    design_cell, gwbe_design, gwbe_power_allocation, inflate_targets, scale_to_budget,
)
from gwbe_mimo.errors import (
    DimensionMismatch, MajorizationCapViolation, NumericalRankLoss, RegionViolation,
)
from gwbe_mimo.majorization import effective_bandwidth
from gwbe_mimo.netmodel import DeltaVector, NetworkConfig, SinrTargets

from conftest import FIG3_GAMMA


def test_uniform_inflation_example(fig3_cfg):
    # frozen from an independent float computation of z * (1 / sum z)
    t = inflate_targets(SinrTargets.from_cells([FIG3_GAMMA[0]] * 3), fig3_cfg)
    assert t.inflated[:4] == pytest.approx(
        [0.4887118597887203, 0.41098320314801523, 0.2683227503986208, 0.2032104025938069], abs=1e-12)
    zh = effective_bandwidth(t.inflated).reshape(3, 4)
    assert np.allclose(zh.sum(axis=1), 1.0, atol=1e-10)
    assert np.all(t.inflated >= t.gamma)


def test_inflation_on_boundary_is_identity():
    cfg = NetworkConfig.symmetric(1, 2, 1)
    t = inflate_targets(SinrTargets([1.0, 1.0], 1, 2), cfg)
    assert np.allclose(t.inflated, 1.0)


def test_published_targets_need_capping(fig3_cfg):
    with pytest.raises(MajorizationCapViolation):
        inflate_targets(SinrTargets.from_cells(FIG3_GAMMA), fig3_cfg)
    t = inflate_targets(SinrTargets.from_cells(FIG3_GAMMA), fig3_cfg, "capped")
    assert effective_bandwidth(t.inflated).max() <= 1 / 3 + 1e-12


def test_inflation_errors(fig3_cfg):
    with pytest.raises(MajorizationCapViolation):
        inflate_targets(SinrTargets(np.r_[2.5, np.full(11, 0.01)], 3, 4), fig3_cfg)
    with pytest.raises(RegionViolation):
        inflate_targets(SinrTargets(np.full(12, 1.0), 3, 4), fig3_cfg)
    # cell 3 of the published targets needs the capped policy
    with pytest.raises(MajorizationCapViolation):
        inflate_targets(SinrTargets.from_cells([[0.45, 0.38, 0.25, 0.19]] * 2 + [[0.49, 0.2, 0.05, 0.05]]),
                        fig3_cfg)


def test_capped_policy(fig3_cfg):
    z = effective_bandwidth(np.array([0.49, 0.2, 0.05, 0.05] * 3))
    zh = scale_to_budget(z, fig3_cfg, "capped").reshape(3, 4)
    assert np.allclose(zh.sum(axis=1), 1.0, atol=1e-12)
    assert zh.max() <= 1 / 3 + 1e-15
    assert np.all(zh >= z.reshape(3, 4) - 1e-15)


def test_fig3_identities(fig3_report):
    assert np.all(fig3_report.cell_gram_residuals() <= 1e-8)
    assert fig3_report.network_gram_residual() <= 1e-7
    assert np.allclose(fig3_report.per_cell_B, 1 / 3, atol=1e-12)
    assert np.max(np.abs(fig3_report.prenorm_norms - 1)) <= 1e-8
    assert fig3_report.pilot_book.norm_residual() <= 1e-12


def test_power_rule(fig3_report):
    P = fig3_report.power.P
    assert np.allclose(P, fig3_report.delta.delta * fig3_report.z_hat, rtol=1e-15)
    pw = gwbe_power_allocation(fig3_report, DeltaVector(np.full(12, 2.0)))
    assert np.all(pw.P > 0)
    with pytest.raises(DimensionMismatch):
        gwbe_power_allocation(fig3_report, DeltaVector(np.ones(3)))


def test_power_rule_trivial():
    # two users sharing one pilot dimension: boundary targets are 1 each
    cfg = NetworkConfig.symmetric(1, 2, 1)
    rep = gwbe_design(SinrTargets([0.5, 0.5], 1, 2), cfg)
    assert np.allclose(rep.inflated_targets.inflated, 1.0)
    assert np.allclose(gwbe_power_allocation(rep, DeltaVector([2.0, 2.0])).P, 1.0)
    assert np.allclose(rep.power.P, rep.power.P[0])


def test_orthonormal_degeneracy():
    cfg = NetworkConfig.symmetric(1, 3, 3)
    rep = gwbe_design(SinrTargets([0.5] * 3, 1, 3), cfg)
    G = rep.pilot_book.gram()
    assert np.max(np.abs(G - np.eye(3))) < 1e-12
    assert np.all(np.isinf(rep.inflated_targets.inflated))


def test_equal_targets_give_wbe():
    cfg = NetworkConfig.symmetric(1, 4, 3)
    rep = gwbe_design(SinrTargets([1.0] * 4, 1, 4), cfg)
    G = rep.pilot_book.gram()
    off = G[~np.eye(4, dtype=bool)] ** 2
    assert np.allclose(off, 1 / 9, atol=1e-12)


def test_rank_loss():
    with pytest.raises(NumericalRankLoss):
        design_cell([0.5, 0.5, 0.0], 1)


def test_column_order_preserved(fig3_cfg):
    # unsorted within-cell order gives the same columns, permuted
    g = np.array(FIG3_GAMMA)
    perm = [2, 0, 3, 1]
    a = gwbe_design(SinrTargets.from_cells(g), fig3_cfg, policy="capped")
    b = gwbe_design(SinrTargets.from_cells(g[:, perm]), fig3_cfg, policy="capped")
    for l in range(3):
        assert np.allclose(a.pilot_book.block(l)[:, perm], b.pilot_book.block(l), atol=1e-14)


def test_deterministic(fig3_cfg, fig3_targets):
    a = gwbe_design(fig3_targets, fig3_cfg).pilot_book.to_text()
    assert a == gwbe_design(fig3_targets, fig3_cfg).pilot_book.to_text()


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**31))
def test_random_designs_hold_identities(L, K, tau, seed):
    if tau > K:
        return
    rng = np.random.default_rng(seed)
    cfg = NetworkConfig.symmetric(L, K, tau, 1.0, 0.5 if L > 1 else None)
    z = rng.uniform(0.05, 1.0, (L, K))
    z *= (tau / L) / z.sum(axis=1, keepdims=True)
    if z.max() > 1 / L:
        return
    zt = np.minimum(z, 1 - 1e-9)
    g = zt / (1 - zt)
    rep = gwbe_design(SinrTargets(g.ravel() * 0.9, L, K, inflated=g.ravel()), cfg)
    assert np.all(rep.cell_gram_residuals() <= 1e-8)
    assert rep.network_gram_residual() <= 1e-7
