"""Load-achieving (GWBE) pilot construction.

Every cell is handled independently: its boundary targets are turned into
effective bandwidths ``z``, flattened into a cap vector, and a chain of
T-transforms yields an orthogonal factor whose leading ``tau`` rows, rescaled
by ``sqrt(B / z)``, are the cell's pilot columns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    MajorizationCapViolation,
    NumericalRankLoss,
    RegionViolation,
)
from .majorization import (
    cap_vector,
    effective_bandwidth,
    inverse_effective_bandwidth,
    schur_horn_factor,
)
from .netmodel import (
    DeltaVector,
    NetworkConfig,
    PilotBook,
    PowerAllocation,
    SinrTargets,
    uplink_power_control,
)

BUDGET_TOL = 1e-12
POLICIES = ("uniform", "capped")


@dataclass(frozen=True, eq=False)
class CellDesign:
    Q: np.ndarray
    B: float
    prenorm: np.ndarray
    rotations: int


@dataclass(frozen=True, eq=False)
class GwbeDesignReport:
    pilot_book: PilotBook
    inflated_targets: SinrTargets
    z_hat: np.ndarray
    per_cell_B: np.ndarray
    power: PowerAllocation
    delta: DeltaVector
    prenorm_norms: np.ndarray
    rotations: tuple

    def cell_gram_residuals(self) -> np.ndarray:
        """max |Q_l diag(z_l) Q_l^T - B_l I| for every cell."""
        bk = self.pilot_book
        out = []
        for l, sl in enumerate(bk.cell_blocks):
            Ql = bk.Q[:, sl]
            G = (Ql * self.z_hat[sl]) @ Ql.T
            out.append(np.max(np.abs(G - self.per_cell_B[l] * np.eye(bk.tau))))
        return np.array(out)

    def network_gram_residual(self) -> float:
        """max |sum_v z_v q_v q_v^T - I|."""
        Q = self.pilot_book.Q
        G = (Q * self.z_hat) @ Q.T
        return float(np.max(np.abs(G - np.eye(Q.shape[0]))))


def cell_budget(cfg: NetworkConfig) -> float:
    return cfg.tau / cfg.L


def cell_cap(cfg: NetworkConfig) -> float:
    """Largest effective bandwidth a single user may hold after inflation."""
    return 1.0 / cfg.L


def _waterfill(z: np.ndarray, budget: float, cap: float) -> np.ndarray:
    # smallest s >= 1 with sum(min(cap, s z)) == budget; capped users form a prefix
    order = np.argsort(-z, kind="stable")
    zs = z[order]
    tail = np.cumsum(zs[::-1])[::-1]
    for n_cap in range(zs.size):
        s = (budget - n_cap * cap) / tail[n_cap]
        if s * zs[n_cap] <= cap * (1 + BUDGET_TOL) and (n_cap == 0 or s * zs[n_cap - 1] >= cap):
            out = np.minimum(cap, s * z)
            return out
    return np.full_like(z, cap)


def scale_to_budget(z, cfg: NetworkConfig, policy: str = "uniform") -> np.ndarray:
    """Per-cell boundary effective bandwidths for effective bandwidths ``z``.

    ``uniform`` scales each cell by one factor; ``capped`` holds users at the
    majorization cap ``1/L`` and scales the rest.  Raises
    :class:`RegionViolation` if a cell is already over budget and
    :class:`MajorizationCapViolation` if the cap cannot be respected.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown inflation policy {policy!r}")
    z = np.asarray(z, dtype=float).reshape(cfg.L, cfg.K)
    budget, cap = cell_budget(cfg), cell_cap(cfg)
    out = np.empty_like(z)
    for l, zc in enumerate(z):
        total = zc.sum()
        if total > budget * (1 + BUDGET_TOL):
            raise RegionViolation(
                f"cell {l + 1}: effective-bandwidth sum {total:.6g} exceeds tau/L = {budget:.6g}"
            )
        if policy == "uniform":
            zh = zc * (budget / total)
            if zh.max() > cap * (1 + BUDGET_TOL):
                raise MajorizationCapViolation(
                    f"cell {l + 1}: uniform inflation puts a user at {zh.max():.6g} > 1/L = {cap:.6g}"
                )
        else:
            if zc.max() > cap * (1 + BUDGET_TOL):
                raise MajorizationCapViolation(
                    f"cell {l + 1}: target bandwidth {zc.max():.6g} already exceeds 1/L = {cap:.6g}"
                )
            zh = _waterfill(zc, budget, cap)
        out[l] = zh
    return out.reshape(-1)


def project_to_budget(z, cfg: NetworkConfig) -> np.ndarray:
    """Rescale each cell's bandwidths by one factor so they sum to tau/L exactly.

    Unlike :func:`scale_to_budget` the factor may be below one; this is meant
    for replaying externally rounded boundary targets.
    """
    z = np.asarray(z, dtype=float).reshape(cfg.L, cfg.K)
    return (z * (cell_budget(cfg) / z.sum(axis=1, keepdims=True))).reshape(-1)


def inflate_targets(targets: SinrTargets, cfg: NetworkConfig,
                    policy: str = "uniform") -> SinrTargets:
    """Raise the targets of every cell onto its load-region boundary."""
    _check_dims(targets, cfg)
    zh = scale_to_budget(effective_bandwidth(targets.gamma), cfg, policy)
    return SinrTargets(targets.gamma, cfg.L, cfg.K, inverse_effective_bandwidth(zh))


def snap_inflated(targets: SinrTargets, cfg: NetworkConfig) -> SinrTargets:
    """Project explicitly supplied inflated targets onto the exact boundary."""
    if targets.inflated is None:
        raise ValueError("targets carry no inflated values to snap")
    zh = project_to_budget(effective_bandwidth(targets.inflated), cfg)
    return SinrTargets(targets.gamma, cfg.L, cfg.K, inverse_effective_bandwidth(zh))


def _check_dims(targets: SinrTargets, cfg: NetworkConfig) -> None:
    if (targets.L, targets.K) != (cfg.L, cfg.K):
        raise DimensionMismatch(
            f"targets are {targets.L}x{targets.K}, network is {cfg.L}x{cfg.K}"
        )


def design_cell(z, tau: int) -> CellDesign:
    """Pilot block for one cell from its boundary effective bandwidths ``z``.

    Columns come back in the order of ``z``; construction works on the
    descending rearrangement.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 1e-14):
        raise NumericalRankLoss("effective bandwidth too close to zero")
    order = np.argsort(-z, kind="stable")
    zs = z[order]
    cap = cap_vector(zs, tau)
    fac = schur_horn_factor(cap.x, zs)
    V = fac.U[:tau]
    raw = np.sqrt(cap.B) * V / np.sqrt(zs)
    norms = np.linalg.norm(raw, axis=0)
    Q = np.empty_like(raw)
    Q[:, order] = raw / norms
    pre = np.empty_like(norms)
    pre[order] = norms
    return CellDesign(Q, cap.B, pre, fac.rotation_count)


def gwbe_design(targets: SinrTargets, cfg: NetworkConfig,
                policy: str = "uniform") -> GwbeDesignReport:
    """Build the network GWBE pilot book for ``targets``.

    If ``targets.inflated`` is set those boundary targets are used as given;
    otherwise the targets are inflated with ``policy``.  The downlink power in
    the report follows the load-achieving rule under uplink power control.
    """
    from .sinr_engine import delta_vector

    _check_dims(targets, cfg)
    if targets.inflated is None:
        targets = inflate_targets(targets, cfg, policy)
    zh = effective_bandwidth(targets.inflated)
    Q = np.empty((cfg.tau, cfg.K_tot))
    Bs, pre, rots = [], np.empty(cfg.K_tot), []
    for l in range(cfg.L):
        sl = cfg.cell_slice(l)
        cd = design_cell(zh[sl], cfg.tau)
        Q[:, sl] = cd.Q
        pre[sl] = cd.prenorm
        Bs.append(cd.B)
        rots.append(cd.rotations)
    book = PilotBook(Q, "GWBE", cfg.L, cfg.K)
    pc = uplink_power_control(cfg)
    delta = delta_vector(book, pc, cfg)
    zh = np.array(zh)
    zh.flags.writeable = False
    report = GwbeDesignReport(book, targets, zh, np.array(Bs), pc, delta, pre, tuple(rots))
    power = gwbe_power_allocation(report, delta)
    return GwbeDesignReport(book, targets, zh, np.array(Bs), power, delta, pre, tuple(rots))


def gwbe_power_allocation(report: GwbeDesignReport, delta: DeltaVector) -> PowerAllocation:
    """Downlink powers ``P_u = delta_u * z_hat_u`` (pilot powers kept)."""
    d = delta.delta
    if d.shape != report.z_hat.shape:
        raise DimensionMismatch(f"delta has {d.size} entries, design has {report.z_hat.size}")
    return report.power.with_downlink(d * report.z_hat)
