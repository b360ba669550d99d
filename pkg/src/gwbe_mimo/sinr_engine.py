"""Downlink SINR under LS estimation and MRT precoding.

Closed forms cover finite antenna counts, the infinite-antenna limit and the
power-control lower bound on that limit.  :func:`monte_carlo_sinr` simulates
the full pilot / estimate / precode chain and is used as an independent check
on the closed forms.

Gains are indexed as ``beta[u, m]`` (user ``u`` to BS ``m``) and the pilot
gain of user ``u`` seen at BS ``m`` is ``eta2[u, m] = p[u] * beta[u, m]``.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, UnsetPower
from .netmodel import ASYMPTOTIC, DeltaVector, NetworkConfig, PilotBook, PowerAllocation

FINITE = "finite"
BOUND = "bound"
MONTE_CARLO = "monte_carlo"
DIV_GUARD = 1e-12
Z95 = 1.959963984540054
BLOCK = 1024
CSV_COLUMNS = ("cell", "slot", "mode", "Nt", "sinr", "ci_halfwidth", "seed")


@dataclass(frozen=True, eq=False)
class SinrResult:
    """Per-user achievable SINR (linear scale, flat user order).

    ``mode`` is one of ``finite``, ``asymptotic``, ``bound`` or
    ``monte_carlo``.  Monte-Carlo results also carry the trial count, seed,
    95% half-widths and the per-user mean of ``|g_hat|^2 / Nt``.
    """

    values: np.ndarray
    mode: str
    L: int
    K: int
    Nt: int | str = ASYMPTOTIC
    trials: int | None = None
    seed: int | None = None
    ci_halfwidth: np.ndarray | None = None
    hardening: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(np.isnan(v)) or np.any(v < 0):
            raise ValueError("SINR values must be non-negative and not NaN")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def user(self, cell: int, slot: int) -> float:
        """Value for 1-based ``(cell, slot)``."""
        return float(self.values[(cell - 1) * self.K + slot - 1])

    def rows(self):
        ci = self.ci_halfwidth
        for f, v in enumerate(self.values):
            yield (f // self.K + 1, f % self.K + 1, self.mode, self.Nt, float(v),
                   "" if ci is None else float(ci[f]),
                   "" if self.seed is None else self.seed)

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        for row in self.rows():
            w.writerow([fmt(x) for x in row])
        return buf.getvalue()


def fmt(x) -> str:
    """17-significant-digit rendering used for every emitted float."""
    if isinstance(x, (float, np.floating)):
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{float(x):.17g}"
    return str(x)


def _check(book: PilotBook, power: PowerAllocation, cfg: NetworkConfig) -> None:
    n = cfg.K_tot
    if book.K_tot != n or power.P.size != n or book.L != cfg.L:
        raise DimensionMismatch(
            f"book has {book.K_tot} users over {book.L} cells, power {power.P.size}, "
            f"network {n} over {cfg.L}"
        )


def _need_downlink(power: PowerAllocation) -> None:
    if not power.downlink_set:
        raise UnsetPower("downlink powers are all zero")


def _cross_gain(cfg: NetworkConfig) -> np.ndarray:
    # G[u, v] = beta[u, cell(v)]: gain from user u to the BS serving v
    return cfg.beta[:, cfg.cell_of]


def delta_vector(book: PilotBook, power: PowerAllocation, cfg: NetworkConfig) -> DeltaVector:
    """Mean per-antenna power of every user's LS estimate.

    ``delta[u] = sum_v p[v] beta[v, cell(u)] rho[v, u]^2 + sigma_n2``.
    """
    _check(book, power, cfg)
    R2 = book.gram() ** 2
    G = _cross_gain(cfg)
    eta2 = power.p[:, None] * G  # eta2[v, u] = p_v beta[v, cell(u)]
    return DeltaVector((eta2 * R2).sum(axis=0) + cfg.sigma_n2)


def _terms(book, power, delta, cfg):
    R2 = book.gram() ** 2
    G = _cross_gain(cfg)
    eta2 = power.p[:, None] * G
    d = delta.delta
    w = R2 * eta2 * G * (power.P / d)[None, :]
    own = np.diag(w).copy()
    np.fill_diagonal(w, 0.0)
    # own is eta2_uu * beta_uu * P_u / delta_u; numerator drops the 1/delta_u
    return own * d, w.sum(axis=1), G, d


def sinr_finite(book: PilotBook, power: PowerAllocation, delta: DeltaVector,
                cfg: NetworkConfig, Nt: int) -> SinrResult:
    """Achievable SINR with ``Nt`` antennas per BS.

    ``phi_u = eta2_uu beta_uu P_u / (delta_u [sum_{v != u} rho_uv^2 eta2_{u,m(v)}
    beta_{u,m(v)} P_v / delta_v + (sum_v beta_{u,m(v)} P_v + sigma_w2) / Nt])``.
    Under uplink power control ``eta2_uu = 1``.
    """
    _check(book, power, cfg)
    _need_downlink(power)
    if isinstance(Nt, bool) or int(Nt) != Nt or Nt < 1:
        raise ValueError(f"Nt must be a positive integer, got {Nt!r}")
    num, inter, G, d = _terms(book, power, delta, cfg)
    total = G @ power.P + cfg.sigma_w2
    phi = num / (d * (inter + total / Nt))
    return SinrResult(phi, FINITE, cfg.L, cfg.K, int(Nt))


def _guarded_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.full(num.shape, np.inf)
    ok = den > DIV_GUARD * num
    out[ok] = num[ok] / den[ok]
    return out


def sinr_asymptotic(book: PilotBook, power: PowerAllocation, delta: DeltaVector,
                    cfg: NetworkConfig) -> SinrResult:
    """Limit of :func:`sinr_finite` as ``Nt -> inf``; ``inf`` for contamination-free users."""
    _check(book, power, cfg)
    _need_downlink(power)
    num, inter, _, d = _terms(book, power, delta, cfg)
    return SinrResult(_guarded_ratio(num, d * inter), ASYMPTOTIC, cfg.L, cfg.K)


def sinr_lower_bound_asym(book: PilotBook, power: PowerAllocation, delta: DeltaVector,
                          cfg: NetworkConfig) -> SinrResult:
    """Power-control lower bound on the asymptotic SINR.

    ``P_u / (delta_u sum_{v != u} rho_uv^2 P_v / delta_v)``.  It bounds
    :func:`sinr_asymptotic` from below when every user's gain to a foreign BS
    is at most its own-cell gain.
    """
    _check(book, power, cfg)
    _need_downlink(power)
    own = power.p * cfg.own_gain
    if np.max(np.abs(own - 1.0)) > 1e-9:
        raise ValueError("the lower bound assumes uplink power control (p * own gain = 1)")
    R2 = book.gram() ** 2
    np.fill_diagonal(R2, 0.0)
    d = delta.delta
    inter = R2 @ (power.P / d)
    return SinrResult(_guarded_ratio(power.P, d * inter), BOUND, cfg.L, cfg.K)


# --- Monte-Carlo oracle ------------------------------------------------------

def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    # unit-variance circular complex Gaussian
    x = rng.standard_normal((*shape, 2))
    x *= np.sqrt(0.5)
    return x.view(np.complex128)[..., 0]


def _block(seed: int, b: int, T: int, cfg: NetworkConfig, Nt: int, args) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(b,))))
    h = _cn(rng, (T, cfg.K_tot, cfg.L, Nt))
    noise = _cn(rng, (T, cfg.L, args["tau"], Nt)) * np.sqrt(cfg.sigma_n2)
    out = np.zeros((cfg.K_tot, kernels.N_MOMENTS))
    kernels.mc_moments(h, noise, args["coef"], args["Q"], args["scale"], args["sqrtb"],
                       args["cell"], args["P"], out, backend=args["backend"])
    return out


def monte_carlo_sinr(book: PilotBook, power: PowerAllocation, cfg: NetworkConfig,
                     Nt: int, trials: int, seed: int, *, block: int = BLOCK,
                     workers: int = 1, backend: str | None = None) -> SinrResult:
    """Simulated achievable SINR with a 95% confidence half-width.

    Every trial draws i.i.d. ``CN(0, 1)`` channels from each user to each BS
    and ``CN(0, sigma_n2)`` uplink noise on every pilot dimension, forms LS
    estimates by projecting the received pilot block, and precodes with MRT
    normalised by ``sqrt(Nt * delta)``.  With effective gain ``g_uw`` from
    stream ``w`` to user ``u`` the estimator is::

        P_u |E g_uu|^2 / (sum_w P_w E|g_uw|^2 - P_u |E g_uu|^2 + sigma_w2)

    where expectations are sample means over trials.  Data symbols and the
    downlink noise only enter through their variances, so they are not drawn.

    Trials are split into blocks of ``block``; block ``b`` is seeded by
    ``SeedSequence(seed, spawn_key=(b,))`` and block sums are reduced in
    block order, so the result does not depend on ``workers``.

    Parameters
    ----------
    book, power, cfg
        Pilot book, powers (downlink must be set) and network.
    Nt : int
        Antennas per BS.
    trials : int
        Number of channel realisations.
    seed : int
        Root seed, recorded in the result.
    """
    _check(book, power, cfg)
    _need_downlink(power)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if isinstance(Nt, bool) or int(Nt) != Nt or Nt < 1:
        raise ValueError(f"Nt must be a positive integer, got {Nt!r}")
    Nt = int(Nt)
    delta = delta_vector(book, power, cfg).delta
    rho = book.gram()
    cell = cfg.cell_of
    # coef[w, v] = eta_{v, cell(w)} rho_{v, w}
    eta = np.sqrt(power.p[None, :] * cfg.beta[:, cell].T)
    args = dict(
        tau=book.tau, Q=book.Q, coef=eta * rho.T, scale=1.0 / np.sqrt(Nt * delta),
        sqrtb=np.sqrt(cfg.beta), cell=cell, P=power.P, backend=backend,
    )
    sizes = [min(block, trials - s) for s in range(0, trials, block)]

    def run(b):
        return _block(seed, b, sizes[b], cfg, Nt, args)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    S = np.zeros((cfg.K_tot, kernels.N_MOMENTS))
    for part in parts:
        S += part
    sinr, ci = _delta_method(S / trials, trials, power.P, cfg.sigma_w2)
    return SinrResult(sinr, MONTE_CARLO, cfg.L, cfg.K, Nt, int(trials), int(seed),
                      ci, S[:, 9] / trials)


def _delta_method(m: np.ndarray, T: int, P: np.ndarray, sigma_w2: float):
    ar, ai, b = m[:, 0], m[:, 1], m[:, 2]
    cov = np.empty((m.shape[0], 3, 3))
    cov[:, 0, 0] = m[:, 3] - ar * ar
    cov[:, 1, 1] = m[:, 4] - ai * ai
    cov[:, 2, 2] = m[:, 5] - b * b
    cov[:, 0, 1] = cov[:, 1, 0] = m[:, 6] - ar * ai
    cov[:, 0, 2] = cov[:, 2, 0] = m[:, 7] - ar * b
    cov[:, 1, 2] = cov[:, 2, 1] = m[:, 8] - ai * b
    if T > 1:
        cov *= T / (T - 1)
    S = P * (ar * ar + ai * ai)
    D = np.maximum(b - S + sigma_w2, np.finfo(float).tiny)
    sinr = S / D
    grad = np.stack([2 * P * ar * (D + S) / D**2, 2 * P * ai * (D + S) / D**2, -S / D**2], axis=1)
    var = np.einsum("ui,uij,uj->u", grad, cov, grad) / T
    return sinr, Z95 * np.sqrt(np.maximum(var, 0.0))
