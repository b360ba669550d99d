"""WBE and FOS baseline pilot books."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyGroup, InfeasibleFrame
from .netmodel import NetworkConfig, PilotBook

WBE_MODES = ("per_cell", "network")


def simplex_frame(tau: int) -> np.ndarray:
    """``tau + 1`` unit vectors in R^tau with pairwise inner product ``-1/tau``."""
    n = tau + 1
    centred = np.eye(n) - 1.0 / n
    # orthonormal basis of the hyperplane orthogonal to the all-ones vector
    basis = np.linalg.qr(centred[:, :tau])[0]
    F = basis.T @ centred
    return F / np.linalg.norm(F, axis=0)


def harmonic_frame(n: int, tau: int) -> np.ndarray:
    """Real harmonic unit-norm tight frame of ``n`` vectors in R^tau."""
    m = np.arange(n)
    rows = []
    if tau % 2:
        rows.append(np.full(n, 1.0 / np.sqrt(tau)))
    for k in range(1, tau // 2 + 1):
        rows.append(np.sqrt(2.0 / tau) * np.cos(2 * np.pi * k * m / n))
        rows.append(np.sqrt(2.0 / tau) * np.sin(2 * np.pi * k * m / n))
    return np.array(rows)


def tight_frame(n: int, tau: int) -> np.ndarray:
    """Unit-norm tight frame ``F`` (tau x n) with ``F F^T = (n / tau) I``.

    ``n == tau`` gives the identity, ``n == tau + 1`` the regular simplex
    (equiangular), larger ``n`` a harmonic frame whose correlations vary.
    """
    if n < tau:
        raise InfeasibleFrame(f"cannot fit a tight frame of {n} vectors in R^{tau}")
    if n == tau:
        return np.eye(tau)
    if n == tau + 1:
        return simplex_frame(tau)
    return harmonic_frame(n, tau)


def wbe_design(cfg: NetworkConfig, mode: str = "per_cell") -> PilotBook:
    """WBE pilot book.

    ``per_cell`` builds one ``K``-vector frame and reuses it in every cell
    (slot ``j`` gets column ``j``); ``network`` builds one ``K_tot``-vector
    frame assigned in flat user order.
    """
    if mode == "per_cell":
        F = tight_frame(cfg.K, cfg.tau)
        Q = np.tile(F, (1, cfg.L))
    elif mode == "network":
        Q = tight_frame(cfg.K_tot, cfg.tau)
    else:
        raise ValueError(f"unknown WBE mode {mode!r}; expected one of {WBE_MODES}")
    return PilotBook(Q, "WBE", cfg.L, cfg.K)


def wbe_correlation(n: int, tau: int) -> float:
    """Magnitude of the common correlation of an ideal WBE set."""
    if n <= 1:
        return 0.0
    return float(np.sqrt((n - tau) / ((n - 1) * tau)))


@dataclass(frozen=True)
class FosAssignment:
    """Partition of flat user indices (0-based) into ``tau`` sharing groups."""

    groups: tuple

    def sequence_of(self, user: int) -> int:
        for s, g in enumerate(self.groups):
            if user in g:
                return s
        raise KeyError(user)

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]


def fos_design(cfg: NetworkConfig,
               grouping: str | Sequence[Sequence[int]] = "round_robin"):
    """FOS pilot book: ``tau`` orthonormal sequences shared by groups of users.

    ``grouping`` is ``"round_robin"`` (slot ``j`` of every cell uses sequence
    ``j mod tau``) or an explicit list of ``tau`` groups of 0-based flat user
    indices.
    """
    tau = cfg.tau
    if isinstance(grouping, str):
        if grouping != "round_robin":
            raise ValueError(f"unknown FOS grouping {grouping!r}")
        seq = np.arange(cfg.K_tot) % cfg.K % tau
        groups = tuple(tuple(int(u) for u in np.flatnonzero(seq == s)) for s in range(tau))
    else:
        groups = tuple(tuple(int(u) for u in g) for g in grouping)
        if len(groups) > tau:
            raise DimensionMismatch(f"{len(groups)} groups but only {tau} sequences")
        flat = sorted(u for g in groups for u in g)
        if flat != list(range(cfg.K_tot)):
            raise DimensionMismatch("groups must partition all users exactly once")
        groups = groups + ((),) * (tau - len(groups))
        empty = [s for s, g in enumerate(groups) if not g]
        if empty:
            raise EmptyGroup(f"sequences {empty} are not used by any user")
        seq = np.empty(cfg.K_tot, dtype=int)
        for s, g in enumerate(groups):
            seq[list(g)] = s
    Q = np.eye(tau)[:, seq]
    return PilotBook(Q, "FOS", cfg.L, cfg.K), FosAssignment(groups)
