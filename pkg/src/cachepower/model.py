"""Core system types and the demand vector -> leader set reduction.

Users are indexed 1..K from the weakest channel to the strongest, files 1..N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

# |t - round(t)| below this is treated as an integer cache parameter
T_SNAP = 1e-9


class ConfigError(ValueError):
    """Invalid system configuration or demand vector."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class SystemConfig:
    K: int
    N: int
    R: float
    M: float
    gains: tuple[float, ...]  # squared channel gains h_k^2, non-decreasing

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))

    @classmethod
    def from_inverse_gains(cls, K, N, R, M, inv_gains: Sequence[float]) -> "SystemConfig":
        return cls(K, N, R, M, tuple(1.0 / g for g in inv_gains))

    def with_memory(self, M: float) -> "SystemConfig":
        return SystemConfig(self.K, self.N, self.R, M, self.gains)

    @property
    def t(self) -> float:
        """Normalized global cache size M*K/N, snapped to an integer within T_SNAP."""
        t = self.M * self.K / self.N
        r = round(t)
        return float(r) if abs(t - r) < T_SNAP else t

    @property
    def t_exact(self) -> Fraction:
        # Fraction(repr(M)) keeps decimal inputs like 0.1 exact
        t = Fraction(repr(float(self.M))) * self.K / self.N
        r = round(t)
        return Fraction(r) if abs(t - r) < T_SNAP else t

    @property
    def is_integer_t(self) -> bool:
        return self.t_exact.denominator == 1


def validate_config(cfg: SystemConfig) -> SystemConfig:
    if not isinstance(cfg.K, int) or cfg.K < 1:
        raise ConfigError("K", f"must be a positive integer, got {cfg.K!r}")
    if not isinstance(cfg.N, int) or cfg.N < 1:
        raise ConfigError("N", f"must be a positive integer, got {cfg.N!r}")
    if not (cfg.R > 0) or math.isinf(cfg.R):
        raise ConfigError("R", f"must be a positive finite real, got {cfg.R!r}")
    if not (0 <= cfg.M <= cfg.N):
        raise ConfigError("M", f"must lie in [0, N={cfg.N}], got {cfg.M!r}")
    if len(cfg.gains) != cfg.K:
        raise ConfigError("gains", f"expected {cfg.K} entries, got {len(cfg.gains)}")
    for k, g in enumerate(cfg.gains, start=1):
        if not (g > 0) or math.isinf(g):
            raise ConfigError("gains", f"entry {k} must be positive and finite, got {g!r}")
    for k in range(1, cfg.K):
        if cfg.gains[k] < cfg.gains[k - 1]:
            raise ConfigError("gains", f"gains not non-decreasing at user {k + 1}")
    return cfg


def validate_demand(d: Sequence[int], cfg: SystemConfig) -> tuple[int, ...]:
    d = tuple(d)
    if len(d) != cfg.K:
        raise ConfigError("d", f"demand vector must have length K={cfg.K}, got {len(d)}")
    for k, f in enumerate(d, start=1):
        if not 1 <= f <= cfg.N:
            raise ConfigError("d", f"user {k} requests file {f} outside [1, {cfg.N}]")
    return d


@dataclass(frozen=True)
class DemandClass:
    """A leader set U_d over K users; all demand vectors sharing it need the same power."""

    leaders: tuple[int, ...]
    K: int
    better_leaders: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        leaders = tuple(self.leaders)
        if not leaders or leaders[0] != 1:
            raise ConfigError("leaders", "user 1 must be a leader")
        if any(b <= a for a, b in zip(leaders, leaders[1:])):
            raise ConfigError("leaders", "leader indices must be strictly increasing")
        if leaders[-1] > self.K:
            raise ConfigError("leaders", f"leader {leaders[-1]} exceeds K={self.K}")
        object.__setattr__(self, "leaders", leaders)
        # entry k-1 counts leaders strictly above user k
        counts = []
        above = len(leaders)
        j = 0
        for k in range(1, self.K + 1):
            while j < len(leaders) and leaders[j] <= k:
                j += 1
            counts.append(above - j)
        object.__setattr__(self, "better_leaders", tuple(counts))

    @property
    def n_distinct(self) -> int:
        return len(self.leaders)

    def is_leader(self, k: int) -> bool:
        return k in self.leaders


def leader_set(d: Sequence[int]) -> DemandClass:
    """Keep the first (weakest) user requesting each distinct file."""
    seen = set()
    leaders = []
    for k, f in enumerate(d, start=1):
        if f not in seen:
            seen.add(f)
            leaders.append(k)
    return DemandClass(tuple(leaders), len(d))


def worst_class(K: int, N: int) -> DemandClass:
    """The class where the min(N, K) weakest users ask for distinct files."""
    return DemandClass(tuple(range(1, min(N, K) + 1)), K)
