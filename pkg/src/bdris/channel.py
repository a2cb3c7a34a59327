"""Multiuser MIMO channel realizations with distance path loss and Rician fading."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .network import ScatteringMatrix
from .topology import SystemDims


class DimensionMismatch(ValueError):
    pass


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def pathloss_linear(d: float, l0_db: float, alpha: float) -> float:
    """Large-scale power gain ``L0 * d^-alpha`` with ``L0`` given in dB at 1 m."""
    if d <= 0:
        raise ValueError("distance must be positive")
    return db_to_linear(l0_db) * d ** (-alpha)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for trial ``trial`` under base seed ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial)]))


@dataclass(frozen=True, eq=False)
class ChannelSet:
    g: np.ndarray
    h_r: np.ndarray
    h_d: np.ndarray
    user_dims: tuple[int, ...]
    noise_power: float

    def __post_init__(self):
        object.__setattr__(self, "user_dims", tuple(int(u) for u in self.user_dims))
        n_ris, n_tx = self.g.shape
        n_rx = sum(self.user_dims)
        if self.h_r.shape != (n_rx, n_ris):
            raise DimensionMismatch(f"h_r must be {n_rx}x{n_ris}, got {self.h_r.shape}")
        if self.h_d.shape != (n_rx, n_tx):
            raise DimensionMismatch(f"h_d must be {n_rx}x{n_tx}, got {self.h_d.shape}")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")

    @property
    def n_ris(self) -> int:
        return self.g.shape[0]

    @property
    def n_tx(self) -> int:
        return self.g.shape[1]

    @property
    def n_rx(self) -> int:
        return sum(self.user_dims)

    def user_slices(self) -> list[slice]:
        edges = np.concatenate([[0], np.cumsum(self.user_dims)])
        return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


@dataclass
class ScenarioConfig:
    """One simulated deployment; defaults follow the desk-scale reproduction setup."""

    dims: SystemDims = field(default_factory=lambda: SystemDims(4, 16, (1, 1, 1, 1)))
    d_tx_ris: float = 50.0
    d_ris_user: float = 2.5
    pathloss_ref_db: float = -30.0
    pathloss_exponent: float = 2.2
    rician_factor_db: float = 2.0
    fading: str = "rician"
    direct_blocked: bool = True
    noise_dbm: float = -80.0
    power_budget_dbm: float = 10.0
    seed: int = 0
    # direct-link distance; None means d_tx_ris
    d_tx_user: float | None = None

    def __post_init__(self):
        if isinstance(self.dims, dict):
            self.dims = SystemDims(**self.dims)
        if self.d_tx_ris <= 0 or self.d_ris_user <= 0 or (self.d_tx_user is not None and self.d_tx_user <= 0):
            raise ValueError("distances must be positive")
        if self.pathloss_exponent <= 0:
            raise ValueError("path-loss exponent must be positive")
        if self.fading not in ("rician", "rayleigh"):
            raise ValueError(f"unknown fading model {self.fading!r}")

    @property
    def noise_power(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    @property
    def power_budget(self) -> float:
        return dbm_to_watts(self.power_budget_dbm)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["dims"] = {
            "n_tx": self.dims.n_tx,
            "n_ris": self.dims.n_ris,
            "users": list(self.dims.users),
            "streams": None if self.dims.streams is None else list(self.dims.streams),
        }
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ScenarioConfig":
        obj = dict(obj)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        if "dims" in obj and isinstance(obj["dims"], dict):
            obj["dims"] = SystemDims(**obj["dims"])
        return cls(**obj)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def ula_response(n: int, angle: float) -> np.ndarray:
    """Half-wavelength uniform linear array response with unit-modulus entries."""
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def sample_link(rng: np.random.Generator, n_rx: int, n_tx: int, gain: float, k_factor: float) -> np.ndarray:
    """``sqrt(gain) * (sqrt(K/(1+K)) H_los + sqrt(1/(1+K)) H_nlos)`` for one link."""
    nlos = _cn(rng, (n_rx, n_tx))
    if k_factor == 0:
        return np.sqrt(gain) * nlos
    aoa, aod = rng.uniform(-np.pi / 2, np.pi / 2, size=2)
    los = np.outer(ula_response(n_rx, aoa), ula_response(n_tx, aod).conj())
    return np.sqrt(gain) * (np.sqrt(k_factor / (1 + k_factor)) * los + np.sqrt(1 / (1 + k_factor)) * nlos)


def sample_channels(cfg: ScenarioConfig, rng: np.random.Generator | None = None) -> ChannelSet:
    """Draw ``G``, ``H_r`` and ``H_d``; each user's block is its own link.

    Without ``rng`` the generator is seeded from ``cfg.seed``.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    dims = cfg.dims
    k = 0.0 if cfg.fading == "rayleigh" else db_to_linear(cfg.rician_factor_db)
    pl = lambda d: pathloss_linear(d, cfg.pathloss_ref_db, cfg.pathloss_exponent)  # noqa: E731

    g = sample_link(rng, dims.n_ris, dims.n_tx, pl(cfg.d_tx_ris), k)
    h_r = np.vstack([sample_link(rng, nk, dims.n_ris, pl(cfg.d_ris_user), k) for nk in dims.users])
    if cfg.direct_blocked:
        h_d = np.zeros((dims.n_rx, dims.n_tx), dtype=complex)
    else:
        d_direct = cfg.d_tx_ris if cfg.d_tx_user is None else cfg.d_tx_user
        h_d = np.vstack([sample_link(rng, nk, dims.n_tx, pl(d_direct), k) for nk in dims.users])
    return ChannelSet(g, h_r, h_d, dims.users, cfg.noise_power)


def effective_channel(ch: ChannelSet, theta) -> np.ndarray:
    """``H_d + H_r Theta G`` stacked over users."""
    theta = theta.theta if isinstance(theta, ScatteringMatrix) else np.asarray(theta)
    if theta.shape != (ch.n_ris, ch.n_ris):
        raise DimensionMismatch(f"Theta must be {ch.n_ris}x{ch.n_ris}, got {theta.shape}")
    return ch.h_d + ch.h_r @ theta @ ch.g
