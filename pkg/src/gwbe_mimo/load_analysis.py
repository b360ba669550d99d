"""User-load bound, load-region tests and feasibility of arbitrary pilot books.

A target vector ``gamma`` is asymptotically achievable on a pilot book when
positive downlink powers exist with every power-control SINR bound at least
``gamma``.  Writing ``y = P / delta`` this is ``y >= diag(eb) (R2 o C) y``
with ``R2`` the squared correlations and ``eb = gamma / (1 + gamma)``, so
feasibility is a Perron-root test on ``M = diag(eb) (R2 o C)``.  ``C`` is
all ones for the power-control bound (``criterion="bound"``) or the squared
foreign-to-own gain ratios for the exact limit (``criterion="exact"``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels
from .design_baseline import fos_design, wbe_design
from .design_gwbe import cell_budget, cell_cap
from .errors import BracketFailure, DimensionMismatch, GridTooFine, NonConvergence, NonPositiveTarget
from .netmodel import NetworkConfig, PilotBook, PowerAllocation, SinrTargets, uplink_power_control

NETWORK = "network"
PER_CELL = "per_cell"
GWBE_BUDGET = "GWBE_BUDGET"
SPECTRAL = "SPECTRAL"
CAP = "CAP"
RADIUS_TOL = 1e-9
BUDGET_TOL = 1e-12
# |rho| below 1e-10 is rounding noise between orthogonal columns
RHO2_FLOOR = 1e-20
MAX_GRID = 10**7
PERRON_TOL = 1e-12
PERRON_MAXITER = 100_000


@dataclass(frozen=True)
class LoadBound:
    bound_real: float
    bound_int: int

    def admits(self, K_tot: int) -> bool:
        return K_tot <= self.bound_int


@dataclass(frozen=True, eq=False)
class RegionVerdict:
    """Outcome of a load-region test.

    For ``SPECTRAL`` verdicts ``spectral_radius`` is the Perron root of the
    feasibility matrix; for ``GWBE_BUDGET`` and ``CAP`` verdicts it is the
    largest budget utilisation (per-cell effective-bandwidth sum over its
    budget).  ``witness`` holds downlink powers when the test passes strictly.
    """

    feasible: bool
    spectral_radius: float
    binding: str
    witness: np.ndarray | None = field(default=None, repr=False)


def _eb(gamma) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if np.any(np.isnan(g)) or np.any(g < 0):
        raise NonPositiveTarget("SINR targets must be >= 0")
    with np.errstate(invalid="ignore"):
        return np.where(np.isinf(g), 1.0, g / (1.0 + g))


def _gamma(targets) -> np.ndarray:
    if isinstance(targets, SinrTargets):
        return targets.gamma
    return np.asarray(targets, dtype=float).reshape(-1)


def userload_bound(targets, tau: int) -> LoadBound:
    """``sqrt(tau * sum((1 + gamma) / gamma))`` and its floor."""
    g = _gamma(targets)
    if np.any(~(g > 0)):
        raise NonPositiveTarget("SINR targets must be > 0")
    val = float(np.sqrt(tau * np.sum(1.0 / _eb(g))))
    return LoadBound(val, int(np.floor(val)))


def region_membership(targets, cfg: NetworkConfig, mode: str = PER_CELL,
                      enforce_cap: bool = False) -> RegionVerdict:
    """Effective-bandwidth budget test.

    ``network`` checks ``sum eb <= tau`` over all users; ``per_cell`` checks
    ``sum eb <= tau / L`` in every cell.  With ``enforce_cap`` every user must
    also satisfy ``eb <= 1 / L``, the largest bandwidth a per-cell GWBE
    construction can hand out.
    """
    z = _eb(_gamma(targets))
    if z.size != cfg.K_tot:
        raise DimensionMismatch(f"expected {cfg.K_tot} targets, got {z.size}")
    if mode == NETWORK:
        util = float(z.sum() / cfg.tau)
    elif mode == PER_CELL:
        util = float(np.max(z.reshape(cfg.L, cfg.K).sum(axis=1)) / cell_budget(cfg))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    ok = util <= 1.0 + BUDGET_TOL
    if ok and enforce_cap and z.max() > cell_cap(cfg) * (1.0 + BUDGET_TOL):
        return RegionVerdict(False, util, CAP)
    return RegionVerdict(ok, util, GWBE_BUDGET)


def squared_gram(book: PilotBook) -> np.ndarray:
    R2 = book.gram() ** 2
    R2[R2 < RHO2_FLOOR] = 0.0
    return R2


def gain_weights(cfg: NetworkConfig) -> np.ndarray:
    """``C[u, v] = (beta[u, cell(v)] / beta[u, cell(u)])^2``."""
    return (cfg.beta[:, cfg.cell_of] / cfg.own_gain[:, None]) ** 2


def components(pattern: np.ndarray) -> list[np.ndarray]:
    """Strongly connected components of the directed graph ``pattern != 0``."""
    n, labels = connected_components(csr_matrix(pattern != 0), directed=True, connection="strong")
    return [np.flatnonzero(labels == c) for c in range(n)]


def perron_root(M: np.ndarray, comps: Sequence[np.ndarray] | None = None, *,
                tol: float = PERRON_TOL, maxiter: int = PERRON_MAXITER,
                backend: str | None = None) -> float:
    """Spectral radius of a non-negative matrix via its irreducible blocks."""
    if comps is None:
        comps = components(M)
    rad = 0.0
    for c in comps:
        r, it = kernels.perron_batch(M[np.ix_(c, c)], tol, maxiter, backend=backend)
        if it[0] < 0:
            raise NonConvergence(f"power iteration did not converge in {maxiter} steps")
        rad = max(rad, float(r[0]))
    return rad


def feasibility_matrix(book: PilotBook, targets, cfg: NetworkConfig,
                       criterion: str = "bound") -> np.ndarray:
    z = _eb(_gamma(targets))
    if z.size != book.K_tot or book.K_tot != cfg.K_tot:
        raise DimensionMismatch(f"book has {book.K_tot} users, targets {z.size}, network {cfg.K_tot}")
    W = squared_gram(book)
    if criterion == "exact":
        W = W * gain_weights(cfg)
    elif criterion != "bound":
        raise ValueError(f"unknown criterion {criterion!r}")
    return z[:, None] * W


def feasibility_oracle(book: PilotBook, targets, cfg: NetworkConfig,
                       power_uplink: PowerAllocation | None = None,
                       criterion: str = "bound", backend: str | None = None) -> RegionVerdict:
    """Can some downlink power vector meet ``targets`` on ``book`` as ``Nt -> inf``?

    The targets tested are ``targets.gamma``.  Feasible iff the Perron root of
    the feasibility matrix is at most ``1 + 1e-9``.  When it is strictly
    below one the verdict carries a witness ``P = delta * (I - M)^-1 1``,
    scaled to total power ``K_tot``; ``delta`` follows ``power_uplink``
    (uplink power control by default).

    Raises
    ------
    NonConvergence
        If the power iteration stalls.
    """
    from .sinr_engine import delta_vector

    M = feasibility_matrix(book, targets, cfg, criterion)
    rad = perron_root(M, backend=backend)
    feasible = rad <= 1.0 + RADIUS_TOL
    witness = None
    if rad < 1.0 - RADIUS_TOL:
        if power_uplink is None:
            power_uplink = uplink_power_control(cfg)
        y = np.linalg.solve(np.eye(M.shape[0]) - M, np.ones(M.shape[0]))
        P = delta_vector(book, power_uplink, cfg).delta * y
        witness = P * (cfg.K_tot / P.sum())
    return RegionVerdict(bool(feasible), rad, SPECTRAL, witness)


def welch_trace(book: PilotBook) -> tuple[float, float]:
    """``(tr(Gram^2), K_tot^2 / tau)``; the first is never below the second."""
    G = book.gram()
    return float(np.sum(G * G)), book.K_tot**2 / book.tau


def build_book(cfg: NetworkConfig, design: str, wbe_mode: str = "per_cell",
               fos_grouping="round_robin") -> PilotBook:
    if design == "WBE":
        return wbe_design(cfg, wbe_mode)
    if design == "FOS":
        return fos_design(cfg, fos_grouping)[0]
    raise ValueError(f"no fixed book for design {design!r}")


def _pattern_targets(cfg: NetworkConfig, pattern, gamma: float) -> np.ndarray:
    pat = np.asarray(pattern, dtype=float)
    if pat.size != cfg.K:
        raise DimensionMismatch(f"pattern has {pat.size} entries, K = {cfg.K}")
    return np.tile(gamma * pat, cfg.L)


def max_permitted_sinr(cfg: NetworkConfig, pattern=(1.0, 1.0, 0.5, 0.5),
                       design: str = "GWBE", *, wbe_mode: str = "per_cell",
                       fos_grouping="round_robin", criterion: str = "bound",
                       tol: float = 1e-6, upper: float = 1e3) -> float:
    """Largest ``gamma`` such that targets ``gamma * pattern`` in every cell are feasible.

    GWBE uses the per-cell budget with the ``1/L`` cap; WBE and FOS run the
    feasibility oracle on their fixed books.  Bisection stops once the bracket
    is narrower than ``tol``; the feasible end is returned.
    """
    if design == "GWBE":
        def ok(g):
            return region_membership(_pattern_targets(cfg, pattern, g), cfg, PER_CELL, True).feasible
    else:
        book = build_book(cfg, design, wbe_mode, fos_grouping)
        W = squared_gram(book)
        if criterion == "exact":
            W = W * gain_weights(cfg)
        comps = components(W)

        def ok(g):
            z = _eb(_pattern_targets(cfg, pattern, g))
            return perron_root(z[:, None] * W, comps) <= 1.0 + RADIUS_TOL
    if ok(upper):
        raise BracketFailure(f"targets still feasible at gamma = {upper}")
    lo, hi = 0.0, float(upper)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# --- region sweep ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RegionSweep:
    """Grid verdicts over the free per-cell targets (last slot held fixed).

    ``axis`` are the grid values on every free axis; ``feasible`` and
    ``radius`` map design name to flat arrays over the C-ordered grid.
    """

    axis: np.ndarray
    fixed: float
    dims: int
    feasible: dict
    radius: dict
    cell_volume: float
    fallbacks: dict

    @property
    def designs(self) -> list[str]:
        return list(self.feasible)

    def volumes(self) -> dict:
        return {d: float(np.count_nonzero(f)) * self.cell_volume for d, f in self.feasible.items()}

    def ratios(self, reference: str = "GWBE") -> dict:
        """``vol(reference) / vol(d) - 1`` for every design (``inf`` for empty regions)."""
        v = self.volumes()
        ref = v[reference]
        return {d: (ref / x - 1.0 if x > 0 else np.inf) for d, x in v.items()}

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*([self.axis] * self.dims), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def surface(self, design: str) -> np.ndarray:
        """Largest feasible value on the last free axis for every prefix (0 if none)."""
        n = self.axis.size
        f = self.feasible[design].reshape((-1, n))
        top = np.where(f.any(axis=1), self.axis[n - 1 - np.argmax(f[:, ::-1], axis=1)], 0.0)
        return top


def _batch_radius(W: np.ndarray, comps, zcell: np.ndarray, L: int, backend, chunk: int):
    N = zcell.shape[0]
    rad = np.zeros(N)
    fb = 0
    for c in comps:
        Wc = W[np.ix_(c, c)]
        for s in range(0, N, chunk):
            zc = np.tile(zcell[s:s + chunk], (1, L))[:, c]
            M = zc[:, :, None] * Wc[None]
            r, it = kernels.perron_batch(M, PERRON_TOL, PERRON_MAXITER, backend=backend)
            bad = np.flatnonzero(it < 0)
            if bad.size:
                # dense fallback for stalled iterations
                fb += bad.size
                r[bad] = np.max(np.abs(np.linalg.eigvals(M[bad])), axis=1)
            rad[s:s + chunk] = np.maximum(rad[s:s + chunk], r)
    return rad, fb


def region_sweep(cfg: NetworkConfig, n: int = 120, upper: float = 1.2, fixed: float = 0.1,
                 designs: Sequence[str] = ("GWBE", "WBE", "FOS"), *,
                 wbe_mode: str = "per_cell", fos_grouping="round_robin",
                 enforce_cap: bool = True, criterion: str = "bound",
                 backend: str | None = None, chunk: int = 32768) -> RegionSweep:
    """Feasibility of every grid point ``[g_1, ..., g_{K-1}, fixed]`` (same in every cell).

    The free axes take cell-centre values ``(i + 0.5) * upper / n``; region
    volumes are feasible-point counts times the cell volume.  GWBE uses the
    per-cell budget (plus the cap if ``enforce_cap``); WBE and FOS use the
    spectral test on their books.
    """
    dims = cfg.K - 1
    if dims < 1:
        raise ValueError("need K >= 2 for a region sweep")
    if n < 1 or float(n) ** dims > MAX_GRID:
        raise GridTooFine(f"{n}^{dims} grid points exceed the limit of {MAX_GRID}")
    h = upper / n
    axis = (np.arange(n) + 0.5) * h
    zaxis = _eb(axis)
    zf = float(_eb(fixed))
    grids = np.meshgrid(*([zaxis] * dims), indexing="ij")
    zcell = np.stack([g.ravel() for g in grids] + [np.full(grids[0].size, zf)], axis=1)
    feas, rad, fallbacks = {}, {}, {}
    for d in designs:
        if d == "GWBE":
            util = zcell.sum(axis=1) / cell_budget(cfg)
            ok = util <= 1.0 + BUDGET_TOL
            if enforce_cap:
                ok &= zcell.max(axis=1) <= cell_cap(cfg) * (1.0 + BUDGET_TOL)
            feas[d], rad[d] = ok, util
            continue
        book = build_book(cfg, d, wbe_mode, fos_grouping)
        W = squared_gram(book)
        if criterion == "exact":
            W = W * gain_weights(cfg)
        r, fb = _batch_radius(W, components(W), zcell, cfg.L, backend, chunk)
        feas[d], rad[d], fallbacks[d] = r <= 1.0 + RADIUS_TOL, r, fb
    return RegionSweep(axis, fixed, dims, feas, rad, h**dims, fallbacks)
