"""Majorization utilities and orthogonal synthesis via chained T-transforms.

The central routine, :func:`schur_horn_factor`, builds an orthogonal ``U``
with ``diag(U.T @ diag(x) @ U) == z`` whenever ``x`` majorizes ``z``.  Each
step is a plane rotation that realises one T-transform on the working
diagonal; at most ``K - 1`` steps are needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    LengthMismatch,
    MajorizationViolation,
    NonPositiveTarget,
    NotSorted,
    TauOutOfRange,
)

SUM_TOL = 1e-12
DIAG_TOL = 1e-9


def effective_bandwidth(gamma):
    """Map SINR target(s) ``gamma > 0`` to ``gamma / (1 + gamma)``.

    ``inf`` maps to 1 (a user that tolerates no interference at all).
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(~(g > 0)):
        raise NonPositiveTarget("SINR targets must be > 0")
    with np.errstate(invalid="ignore"):
        z = np.where(np.isinf(g), 1.0, g / (1.0 + g))
    return float(z) if z.ndim == 0 else z


def inverse_effective_bandwidth(z):
    """Inverse of :func:`effective_bandwidth` on ``(0, 1]``."""
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)) or np.any(z > 1):
        raise ValueError("effective bandwidth must lie in (0, 1]")
    with np.errstate(divide="ignore"):
        g = np.where(z >= 1.0, np.inf, z / (1.0 - z))
    return float(g) if g.ndim == 0 else g


@dataclass(frozen=True, eq=False)
class CapVector:
    """``tau`` copies of ``B`` followed by zeros."""

    x: np.ndarray
    B: float
    tau: int


@dataclass(frozen=True, eq=False)
class TStep:
    """One T-transform: position ``fixed`` is set to its target, ``other`` absorbs the rest."""

    fixed: int
    other: int
    cos2: float


@dataclass(frozen=True, eq=False)
class OrthoFactor:
    U: np.ndarray
    rotation_count: int
    steps: tuple = field(default=(), repr=False)
    trajectory: np.ndarray | None = field(default=None, repr=False)


def _check_desc(v: np.ndarray, name: str, tol: float = 0.0) -> None:
    if np.any(v[:-1] < v[1:] - tol):
        raise NotSorted(f"{name} must be sorted in descending order")


def majorizes(x, z, tol: float = SUM_TOL) -> bool:
    """True iff ``x`` majorizes ``z`` (both descending, equal length)."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes differ: {x.shape} vs {z.shape}")
    _check_desc(x, "x")
    _check_desc(z, "z")
    cx, cz = np.cumsum(x), np.cumsum(z)
    scale = max(1.0, float(np.abs(cz[-1])))
    if abs(cx[-1] - cz[-1]) > tol * scale:
        return False
    return bool(np.all(cx[:-1] >= cz[:-1] - tol * scale))


def cap_vector(z, tau: int) -> CapVector:
    """Flat-top vector with the same total as ``z`` spread over ``tau`` slots."""
    z = np.asarray(z, dtype=float)
    if not 1 <= tau <= z.size:
        raise TauOutOfRange(f"tau={tau} must be in [1, {z.size}]")
    B = float(z.sum() / tau)
    x = np.zeros(z.size)
    x[:tau] = B
    x.flags.writeable = False
    return CapVector(x, B, int(tau))


def _rotation(U: np.ndarray, i: int, j: int, c: float, s: float) -> None:
    # U <- U @ G with G = [[c, -s], [s, c]] on rows/cols (i, j)
    ui, uj = U[:, i].copy(), U[:, j].copy()
    U[:, i] = c * ui + s * uj
    U[:, j] = -s * ui + c * uj


def t_transform_chain(x, z, tol: float = 1e-13):
    """Sequence of T-transforms taking ``x`` to ``z``.

    Returns ``(steps, trajectory)`` where ``trajectory[k]`` is the working
    diagonal after ``k`` steps.  At each step the largest index ``j`` with
    ``w[j] > z[j]`` is paired with the first later index ``k`` with
    ``w[k] < z[k]``; whichever of the two is closer to its target is fixed.
    Fixed positions are never touched again, so every rotated pair has a zero
    off-diagonal entry and the diagonal update is an exact T-transform.
    """
    w = np.array(x, dtype=float)
    z = np.asarray(z, dtype=float)
    K = w.size
    eps = tol * max(1.0, float(np.max(np.abs(w))))
    steps, traj = [], [w.copy()]
    for _ in range(K):
        d = w - z
        over = np.flatnonzero(d > eps)
        if over.size == 0:
            break
        j = int(over[-1])
        under = np.flatnonzero(d[j + 1:] < -eps)
        if under.size == 0:
            # only rounding-level surplus left; cannot happen for x majorizing z
            break
        k = j + 1 + int(under[0])
        if d[j] <= -d[k]:
            fixed, other = j, k
        else:
            fixed, other = k, j
        a, b, t = w[fixed], w[other], z[fixed]
        cos2 = min(1.0, max(0.0, (t - b) / (a - b)))
        w[other] = a + b - t
        w[fixed] = t
        steps.append(TStep(fixed, other, cos2))
        traj.append(w.copy())
    return steps, np.array(traj)


def schur_horn_factor(x, z) -> OrthoFactor:
    """Orthogonal ``U`` with ``diag(U.T @ diag(x) @ U) = z``.

    Parameters
    ----------
    x, z : array_like
        Descending vectors of equal length with ``x`` majorizing ``z``.

    Raises
    ------
    MajorizationViolation
        If ``x`` does not majorize ``z``.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if not majorizes(x, z, tol=1e-10):
        raise MajorizationViolation("x does not majorize z")
    K = x.size
    steps, traj = t_transform_chain(x, z)
    U = np.eye(K)
    count = 0
    for st in steps:
        c, s = np.sqrt(st.cos2), np.sqrt(1.0 - st.cos2)
        if s == 0.0:
            continue
        _rotation(U, st.fixed, st.other, c, s)
        count += 1
    return OrthoFactor(U, count, tuple(steps), traj)
