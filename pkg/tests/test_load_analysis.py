import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gwbe_mimo.design_baseline import fos_design, wbe_design
from gwbe_mimo.errors import BracketFailure, GridTooFine, NonConvergence, NonPositiveTarget
from gwbe_mimo.load_analysis import (
    CAP, GWBE_BUDGET, NETWORK, PER_CELL, components, feasibility_matrix, feasibility_oracle,
    max_permitted_sinr, perron_root, region_membership, region_sweep, userload_bound, welch_trace,
)
from gwbe_mimo.netmodel import NetworkConfig, PilotBook, SinrTargets, uplink_power_control
from gwbe_mimo.sinr_engine import delta_vector, sinr_asymptotic, sinr_lower_bound_asym

from conftest import FIG3_GAMMA_HAT, random_book


def dense_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def test_userload_bound():
    b = userload_bound(np.full(12, 0.1), 3)
    assert b.bound_real == pytest.approx(19.8997487421324, abs=1e-12)
    assert b.bound_int == 19
    assert userload_bound(np.full(9, 0.5), 3).bound_int == 9
    assert userload_bound(np.full(9, 0.5), 3).admits(9)
    assert userload_bound(np.full(12, np.inf), 3).bound_real == pytest.approx(6.0)
    with pytest.raises(NonPositiveTarget):
        userload_bound([0.1, 0.0], 3)


def test_membership_published_targets(fig3_cfg, fig3_targets):
    z = np.array(FIG3_GAMMA_HAT) / (1 + np.array(FIG3_GAMMA_HAT))
    sums = z.sum(axis=1)
    # hand-summed: the published two-decimal values miss the budget by up to 0.7%
    assert sums == pytest.approx([0.996190754243725, 1.0071562129221825, 1.0004079], abs=1e-7)
    assert not region_membership(np.ravel(FIG3_GAMMA_HAT), fig3_cfg, PER_CELL).feasible
    v = region_membership(SinrTargets(fig3_targets.inflated, 3, 4), fig3_cfg, PER_CELL)
    assert v.feasible and v.binding == GWBE_BUDGET
    assert v.spectral_radius == pytest.approx(1.0, abs=1e-12)


def test_membership_examples(fig3_cfg):
    assert region_membership(np.zeros(12), fig3_cfg).feasible
    g = np.full(12, 0.1)
    g[:4] = 0.3 / 0.7  # eb = 0.3 each, cell sum 1.2
    v = region_membership(g, fig3_cfg, PER_CELL)
    assert not v.feasible and v.binding == GWBE_BUDGET
    assert region_membership(g, fig3_cfg, NETWORK).feasible
    c = np.full(12, 0.01)
    c[0] = 1.0  # eb = 0.5 > 1/3
    assert region_membership(c, fig3_cfg, PER_CELL).feasible
    v = region_membership(c, fig3_cfg, PER_CELL, enforce_cap=True)
    assert not v.feasible and v.binding == CAP


def test_oracle_gwbe_boundary(fig3_cfg, fig3_report, fig3_targets):
    t = SinrTargets(fig3_targets.inflated, 3, 4)
    v = feasibility_oracle(fig3_report.pilot_book, t, fig3_cfg)
    assert abs(v.spectral_radius - 1) <= 1e-6 and v.feasible
    M = feasibility_matrix(fig3_report.pilot_book, t, fig3_cfg)
    assert dense_radius(M) == pytest.approx(v.spectral_radius, abs=1e-9)


def test_oracle_orthonormal():
    cfg = NetworkConfig.symmetric(1, 3, 3)
    book = PilotBook(np.eye(3), "FOS", 1, 3)
    g = np.array([0.5, 2.0, 0.1])
    v = feasibility_oracle(book, g, cfg)
    assert v.feasible and v.spectral_radius == pytest.approx(2 / 3, abs=1e-12)


def test_oracle_fos_overloaded_group(fig3_cfg):
    book, asg = fos_design(fig3_cfg)
    g = np.full(12, 0.05)
    g[list(asg.groups[0])] = 0.3  # six users at eb 0.23 share one sequence
    v = feasibility_oracle(book, g, fig3_cfg)
    assert not v.feasible
    assert v.spectral_radius == pytest.approx(dense_radius(feasibility_matrix(book, g, fig3_cfg)), abs=1e-9)
    assert len(components(book.gram() ** 2)) == 3


def test_witness_meets_targets():
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(60):
        L, K, tau = int(rng.integers(1, 4)), int(rng.integers(2, 5)), int(rng.integers(1, 4))
        cfg = NetworkConfig.symmetric(L, K, tau, 1.0, 0.6 if L > 1 else None)
        book = PilotBook(random_book(rng, tau, L * K), "EXPLICIT", L, K)
        g = rng.uniform(0.01, 0.5, L * K)
        for crit, fn in (("bound", sinr_lower_bound_asym), ("exact", sinr_asymptotic)):
            v = feasibility_oracle(book, g, cfg, criterion=crit)
            M = feasibility_matrix(book, g, cfg, crit)
            assert v.spectral_radius == pytest.approx(dense_radius(M), rel=1e-9, abs=1e-12)
            if v.witness is None:
                continue
            pw = uplink_power_control(cfg).with_downlink(v.witness)
            got = fn(book, pw, delta_vector(book, pw, cfg), cfg).values
            assert np.all(got >= g * (1 - 1e-9))
            assert v.witness.sum() == pytest.approx(L * K)
            checked += 1
    assert checked > 20


def test_nonconvergence():
    M = np.array([[0.5, 0.4], [0.1, 0.2]])
    with pytest.raises(NonConvergence):
        perron_root(M, maxiter=1)
    assert perron_root(M) == pytest.approx(dense_radius(M), abs=1e-12)


def test_welch_inequality_examples(fig3_report):
    tr, bound = welch_trace(fig3_report.pilot_book)
    assert tr >= bound
    tr, bound = welch_trace(wbe_design(NetworkConfig.symmetric(1, 12, 3)))
    assert tr == pytest.approx(bound, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_region_monotone(seed):
    rng = np.random.default_rng(seed)
    cfg = NetworkConfig.symmetric(2, 3, 2, 1.0, 0.7)
    book = PilotBook(random_book(rng, 2, 6), "EXPLICIT", 2, 3)
    g = rng.uniform(0.0, 1.0, 6)
    lower = g * rng.uniform(0.0, 1.0, 6)
    if feasibility_oracle(book, g, cfg).feasible:
        assert feasibility_oracle(book, lower, cfg).feasible
    if region_membership(g, cfg, PER_CELL, True).feasible:
        assert region_membership(lower, cfg, PER_CELL, True).feasible


def test_max_permitted_frozen():
    # frozen from root-finding on 2 eb(g) + 2 eb(g/2) = tau / L and dense eigenvalues
    def cfg(L):
        return NetworkConfig.symmetric(L, 4, 3, 1.0, 0.9)
    assert max_permitted_sinr(cfg(2)) == pytest.approx(0.8357816691600546, abs=1e-6)
    assert max_permitted_sinr(cfg(6)) == pytest.approx(0.19319285076568746, abs=1e-6)
    assert max_permitted_sinr(cfg(2), design="WBE") == pytest.approx(0.7380114069403068, abs=1e-6)
    assert max_permitted_sinr(cfg(2), design="FOS") == pytest.approx(0.45742710775633844, abs=1e-6)
    assert max_permitted_sinr(cfg(60)) < 0.02


@pytest.mark.parametrize("design", ["GWBE", "WBE", "FOS"])
def test_max_permitted_is_sharp(design):
    c = NetworkConfig.symmetric(3, 4, 3, 1.0, 0.9)
    g = max_permitted_sinr(c, design=design)
    pat = np.array([1, 1, 0.5, 0.5])

    def ok(x):
        t = np.tile(x * pat, 3)
        if design == "GWBE":
            return region_membership(t, c, PER_CELL, True).feasible
        book = wbe_design(c) if design == "WBE" else fos_design(c)[0]
        return feasibility_oracle(book, t, c).feasible
    assert ok(g) and not ok(g + 1e-4)


def test_bracket_failure():
    with pytest.raises(BracketFailure):
        max_permitted_sinr(NetworkConfig.symmetric(1, 1, 1), pattern=[1.0])


def test_sweep_basics(fig3_cfg):
    sw = region_sweep(fig3_cfg, n=16)
    assert all(sw.feasible[d][0] for d in sw.designs)  # smallest point
    pts = sw.points()
    full = np.hstack([pts, np.full((len(pts), 1), 0.1)])
    over = np.array([not userload_bound(np.tile(p, 3), 3).admits(12) for p in full])
    for d in sw.designs:
        assert not np.any(sw.feasible[d] & over)
    # surface entries are feasible and sit on the boundary of the last axis
    n = sw.axis.size
    for d in sw.designs:
        f = sw.feasible[d].reshape(-1, n)
        top = sw.surface(d)
        for row, t in zip(f, top):
            k = np.flatnonzero(row)
            assert (k.size == 0 and t == 0) or t == sw.axis[k.max()]
    with pytest.raises(GridTooFine):
        region_sweep(fig3_cfg, n=216)


def test_sweep_backends_agree(fig3_cfg):
    a = region_sweep(fig3_cfg, n=12, backend="python")
    b = region_sweep(fig3_cfg, n=12)
    for d in a.designs:
        assert np.array_equal(a.feasible[d], b.feasible[d])
        assert np.allclose(a.radius[d], b.radius[d], rtol=1e-10)
