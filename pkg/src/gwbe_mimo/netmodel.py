"""Network description, user indexing, pilot books and config ingestion.

Users are indexed cell-major: the flat (0-based) index of slot ``k`` in cell
``l`` is ``l * K + k``.  :class:`UserId` exposes the 1-based numbering used in
reports and CSV files.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .errors import (
    ConfigError,
    DimensionMismatch,
    MissingKey,
    NonPositiveGain,
    NonPositiveTarget,
    ParseError,
)

ASYMPTOTIC = "asymptotic"
DESIGNS = ("GWBE", "WBE", "FOS", "EXPLICIT")
UNIT_NORM_TOL = 1e-9

# keys understood by load_config; anything else in the mapping must be an
# experiment key (see EXPERIMENT_KEYS) or it is rejected as a typo
_CONFIG_KEYS = {
    "L", "K", "tau", "Nt", "sigma_w2", "sigma_n2", "beta",
    "own_gain", "cross_gain", "own", "cross",
}
EXPERIMENT_KEYS = {
    "targets", "inflated_targets", "project_inflated", "inflation",
    "wbe_mode", "fos_grouping", "user", "designs", "pattern",
}


def _frozen(a: Any, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class UserId:
    """1-based (cell, slot, flat) identity of a user."""

    cell: int
    slot: int
    flat: int

    @classmethod
    def from_flat(cls, flat: int, K: int) -> "UserId":
        if flat < 1 or K < 1:
            raise ValueError(f"flat index {flat} out of range")
        return cls((flat - 1) // K + 1, (flat - 1) % K + 1, flat)

    @classmethod
    def from_cell_slot(cls, cell: int, slot: int, K: int) -> "UserId":
        if not 1 <= slot <= K or cell < 1:
            raise ValueError(f"slot {slot} / cell {cell} out of range")
        return cls(cell, slot, (cell - 1) * K + slot)

    @property
    def index(self) -> int:
        """0-based flat index for array access."""
        return self.flat - 1


@dataclass(frozen=True, eq=False)
class NetworkConfig:
    """Static description of an L-cell network with K users per cell.

    ``beta[u, m]`` is the large-scale gain from flat user ``u`` to the BS of
    (0-based) cell ``m``.  ``Nt`` is an antenna count or :data:`ASYMPTOTIC`.
    """

    L: int
    K: int
    tau: int
    beta: np.ndarray
    Nt: int | str = ASYMPTOTIC
    sigma_w2: float = 1.0
    sigma_n2: float = 1.0

    def __post_init__(self):
        for name in ("L", "K", "tau"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.Nt != ASYMPTOTIC:
            if isinstance(self.Nt, bool) or int(self.Nt) != self.Nt or self.Nt < 1:
                raise ConfigError(f"Nt must be >= 1 or {ASYMPTOTIC!r}, got {self.Nt!r}")
            object.__setattr__(self, "Nt", int(self.Nt))
        for name in ("sigma_w2", "sigma_n2"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, v)
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (self.K_tot, self.L):
            raise DimensionMismatch(
                f"beta must have shape (K_tot, L) = {(self.K_tot, self.L)}, got {beta.shape}"
            )
        if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
            raise NonPositiveGain("all large-scale gains must be finite and > 0")
        object.__setattr__(self, "beta", _frozen(beta))

    @property
    def K_tot(self) -> int:
        return self.K * self.L

    @property
    def cell_of(self) -> np.ndarray:
        """0-based serving cell of every flat user."""
        return np.repeat(np.arange(self.L), self.K)

    @property
    def own_gain(self) -> np.ndarray:
        return self.beta[np.arange(self.K_tot), self.cell_of]

    def users(self) -> list[UserId]:
        return [UserId.from_flat(f, self.K) for f in range(1, self.K_tot + 1)]

    def cell_slice(self, cell: int) -> slice:
        """Column range of 0-based ``cell``."""
        return slice(cell * self.K, (cell + 1) * self.K)

    def with_(self, **changes) -> "NetworkConfig":
        d = dict(L=self.L, K=self.K, tau=self.tau, beta=self.beta, Nt=self.Nt,
                 sigma_w2=self.sigma_w2, sigma_n2=self.sigma_n2)
        d.update(changes)
        return NetworkConfig(**d)

    @classmethod
    def symmetric(cls, L: int, K: int, tau: int, own: float = 1.0,
                  cross: float | None = None, **kw) -> "NetworkConfig":
        """Config whose gains are ``own`` to the serving BS and ``cross`` elsewhere."""
        if cross is None:
            if L > 1:
                raise MissingKey("cross_gain is required when L > 1")
            cross = own
        if own <= 0 or cross <= 0:
            raise NonPositiveGain(f"gains must be > 0 (own={own}, cross={cross})")
        cell = np.repeat(np.arange(L), K)
        beta = np.where(cell[:, None] == np.arange(L)[None, :], float(own), float(cross))
        return cls(L=L, K=K, tau=tau, beta=beta, **kw)

    def to_dict(self) -> dict:
        return {
            "L": self.L, "K": self.K, "tau": self.tau, "Nt": self.Nt,
            "sigma_w2": self.sigma_w2, "sigma_n2": self.sigma_n2,
            "beta": self.beta.tolist(),
        }

    def __eq__(self, other):
        if not isinstance(other, NetworkConfig):
            return NotImplemented
        return (self.L, self.K, self.tau, self.Nt, self.sigma_w2, self.sigma_n2) == (
            other.L, other.K, other.tau, other.Nt, other.sigma_w2, other.sigma_n2
        ) and np.array_equal(self.beta, other.beta)

    __hash__ = None

    def digest(self) -> str:
        """Short content hash used to tag emitted files."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class PilotBook:
    """Network pilot matrix ``Q`` (tau x K_tot), one column per user."""

    Q: np.ndarray
    design: str
    L: int
    K: int
    strict: bool = field(default=True, repr=False)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[1] != self.L * self.K:
            raise DimensionMismatch(f"Q must be tau x {self.L * self.K}, got {Q.shape}")
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design tag {self.design!r}")
        if not np.all(np.isfinite(Q)):
            raise ValueError("pilot entries must be finite")
        object.__setattr__(self, "Q", _frozen(Q))
        if self.strict:
            err = self.norm_residual()
            if err > UNIT_NORM_TOL:
                raise ValueError(f"pilot columns are not unit-norm (max residual {err:.3g})")

    @property
    def tau(self) -> int:
        return self.Q.shape[0]

    @property
    def K_tot(self) -> int:
        return self.Q.shape[1]

    @property
    def cell_blocks(self) -> list[slice]:
        return [slice(l * self.K, (l + 1) * self.K) for l in range(self.L)]

    def block(self, cell: int) -> np.ndarray:
        return self.Q[:, cell * self.K:(cell + 1) * self.K]

    def gram(self) -> np.ndarray:
        """Correlation matrix ``rho[u, v] = q_u . q_v``."""
        return self.Q.T @ self.Q

    def norm_residual(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.Q, axis=0) - 1.0)))

    def to_text(self) -> str:
        lines = [f"tau={self.tau} K_tot={self.K_tot} design={self.design} cells={self.L}"]
        lines += [" ".join(f"{v:.17g}" for v in row) for row in self.Q]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, strict: bool = True) -> "PilotBook":
        rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows:
            raise ParseError("empty pilot book")
        head = dict(re.findall(r"(\w+)=(\S+)", rows[0]))
        try:
            tau, K_tot, design = int(head["tau"]), int(head["K_tot"]), head["design"]
            L = int(head.get("cells", 1))
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad pilot book header: {rows[0]!r}") from exc
        try:
            Q = np.array([[float(v) for v in r.split()] for r in rows[1:]])
        except ValueError as exc:
            raise ParseError(f"non-numeric pilot entry: {exc}") from exc
        if Q.shape != (tau, K_tot) or K_tot % L:
            raise ParseError(f"header says {tau}x{K_tot} over {L} cells, body is {Q.shape}")
        return cls(Q, design, L, K_tot // L, strict=strict)


@dataclass(frozen=True, eq=False)
class SinrTargets:
    """Per-user SINR requirements in flat user order.

    ``inflated`` optionally holds the boundary targets actually used for a GWBE
    construction (may be ``inf`` for users that end up with orthogonal pilots).
    Within-cell order is the user order; :meth:`is_descending` reports whether
    each cell is already sorted.
    """

    gamma: np.ndarray
    L: int
    K: int
    inflated: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float).reshape(-1)
        if g.size != self.L * self.K:
            raise DimensionMismatch(f"expected {self.L * self.K} targets, got {g.size}")
        if not np.all(np.isfinite(g)) or np.any(g <= 0):
            raise NonPositiveTarget("SINR targets must be finite and > 0")
        object.__setattr__(self, "gamma", _frozen(g))
        if self.inflated is not None:
            h = np.asarray(self.inflated, dtype=float).reshape(-1)
            if h.shape != g.shape:
                raise DimensionMismatch("inflated targets must match gamma")
            if np.any(h < g * (1 - 1e-12)):
                raise ValueError("inflated targets must dominate gamma elementwise")
            object.__setattr__(self, "inflated", _frozen(h))

    @classmethod
    def from_cells(cls, cells: Sequence[Sequence[float]],
                   inflated: Sequence[Sequence[float]] | None = None) -> "SinrTargets":
        arr = np.asarray(cells, dtype=float)
        if arr.ndim != 2:
            raise DimensionMismatch("targets must be a list of equal-length per-cell lists")
        inf = None if inflated is None else np.asarray(inflated, dtype=float).reshape(-1)
        return cls(arr.reshape(-1), arr.shape[0], arr.shape[1], inf)

    def per_cell(self) -> np.ndarray:
        return self.gamma.reshape(self.L, self.K)

    def is_descending(self) -> bool:
        pc = self.per_cell()
        return bool(np.all(pc[:, :-1] >= pc[:, 1:]))

    @property
    def effective(self) -> np.ndarray:
        """Targets a design must meet: inflated if present, else gamma."""
        return self.gamma if self.inflated is None else self.inflated


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """Downlink data powers ``P`` and uplink pilot powers ``p`` per user."""

    P: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float).reshape(-1)
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if P.shape != p.shape:
            raise DimensionMismatch("P and p must have the same length")
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(p))):
            raise ValueError("powers must be finite")
        if np.any(P < 0) or np.any(p <= 0):
            raise ValueError("need P >= 0 and p > 0")
        object.__setattr__(self, "P", _frozen(P))
        object.__setattr__(self, "p", _frozen(p))

    @property
    def downlink_set(self) -> bool:
        return bool(np.any(self.P > 0))

    def with_downlink(self, P) -> "PowerAllocation":
        return PowerAllocation(P, self.p)


@dataclass(frozen=True, eq=False)
class DeltaVector:
    """Per-user MRT normalisation (mean estimated channel power per antenna)."""

    delta: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delta, dtype=float).reshape(-1)
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("delta entries must be finite and > 0")
        object.__setattr__(self, "delta", _frozen(d))


def uplink_power_control(cfg: NetworkConfig) -> PowerAllocation:
    """Pilot powers that invert the own-cell gain, so eta_{u,cell(u)} = 1."""
    p = 1.0 / cfg.own_gain
    return PowerAllocation(np.zeros(cfg.K_tot), p)


# --- config documents -------------------------------------------------------

def _parse_mapping(text: str | Mapping) -> dict:
    if isinstance(text, Mapping):
        return dict(text)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("config must be a key/value mapping")
    return doc


def _num(doc: dict, key: str, default=None) -> float:
    if key not in doc or doc[key] is None:
        if default is None:
            raise MissingKey(key)
        return default
    try:
        return float(doc[key])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{key} must be numeric, got {doc[key]!r}") from exc


def _int(doc: dict, key: str) -> int:
    v = _num(doc, key)
    if v != int(v):
        raise ParseError(f"{key} must be an integer, got {doc[key]!r}")
    return int(v)


def config_from_mapping(doc: Mapping) -> NetworkConfig:
    doc = dict(doc)
    unknown = set(doc) - _CONFIG_KEYS - EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    L, K, tau = _int(doc, "L"), _int(doc, "K"), _int(doc, "tau")
    Nt = doc.get("Nt", ASYMPTOTIC)
    if isinstance(Nt, str) and Nt.strip().lower() in (ASYMPTOTIC, "inf", "infinity"):
        Nt = ASYMPTOTIC
    elif not isinstance(Nt, int):
        try:
            Nt = int(Nt)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"Nt must be an integer or {ASYMPTOTIC!r}") from exc
    kw = dict(Nt=Nt, sigma_w2=_num(doc, "sigma_w2", 1.0), sigma_n2=_num(doc, "sigma_n2", 1.0))
    if doc.get("beta") is not None:
        try:
            beta = np.array(doc["beta"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParseError("beta must be a numeric matrix") from exc
        if beta.ndim == 0:
            raise DimensionMismatch("beta must be a K_tot x L matrix")
        return NetworkConfig(L=L, K=K, tau=tau, beta=beta, **kw)
    own_key = "own_gain" if "own_gain" in doc else "own"
    cross_key = "cross_gain" if "cross_gain" in doc else "cross"
    own = _num(doc, own_key)
    cross = doc.get(cross_key)
    if cross is not None:
        cross = _num(doc, cross_key)
    return NetworkConfig.symmetric(L, K, tau, own, cross, **kw)


def load_config(text: str | Mapping) -> NetworkConfig:
    """Parse a YAML config document (or mapping) into a :class:`NetworkConfig`."""
    return config_from_mapping(_parse_mapping(text))


def dump_config(cfg: NetworkConfig) -> str:
    """Serialise ``cfg`` so that ``load_config(dump_config(cfg)) == cfg``."""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


@dataclass
class Experiment:
    """A config document plus the experiment keys that ride along with it."""

    config: NetworkConfig
    targets: SinrTargets | None
    options: dict


def load_experiment(text: str | Mapping) -> Experiment:
    doc = _parse_mapping(text)
    cfg = config_from_mapping(doc)
    targets = None
    if doc.get("targets") is not None:
        targets = SinrTargets.from_cells(doc["targets"], doc.get("inflated_targets"))
        if (targets.L, targets.K) != (cfg.L, cfg.K):
            raise DimensionMismatch(
                f"targets are {targets.L}x{targets.K}, config has L={cfg.L}, K={cfg.K}"
            )
    opts = {k: doc[k] for k in EXPERIMENT_KEYS if k in doc and k not in ("targets",)}
    return Experiment(cfg, targets, opts)
