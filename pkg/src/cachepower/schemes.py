"""Per-user target rates of the centralized and decentralized coded delivery schemes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .combinatorics import binom
from .model import DemandClass, SystemConfig, worst_class

CENTRALIZED = "centralized"
DECENTRALIZED = "decentralized"
SCHEMES = (CENTRALIZED, DECENTRALIZED)

Number = Union[int, Fraction]


@dataclass(frozen=True)
class RateVector:
    rates: tuple[float, ...]
    scheme: str

    def __len__(self):
        return len(self.rates)

    def __iter__(self):
        return iter(self.rates)

    def __getitem__(self, i):
        return self.rates[i]


def _check_scheme(scheme: str) -> str:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    return scheme


def _layer_share(K: int, k: int, nk: int | None, t: int) -> Fraction:
    """Fraction of an integer-t subsystem delivered in layer k.

    (t+1)-sets whose smallest member is k number C(K-k, t); for a non-leader
    those avoiding every leader above k (C(K-k-nk, t) of them) are not sent.
    """
    total = binom(K, t)
    if total == 0:
        return Fraction(0)
    sent = binom(K - k, t)
    if nk is not None:
        sent -= binom(K - k - nk, t)
    return Fraction(sent, total)


def centralized_rate_fractions(cls: DemandClass, t: Number) -> tuple[Fraction, ...]:
    """Layer rates as exact fractions of R, memory-shared between floor(t) and floor(t)+1."""
    t = Fraction(t)
    K = cls.K
    t1 = math.floor(t)
    w1 = t1 + 1 - t
    w2 = t - t1
    out = []
    for k in range(1, K + 1):
        nk = None if cls.is_leader(k) else cls.better_leaders[k - 1]
        r = Fraction(0)
        if w1:
            r += _layer_share(K, k, nk, t1) * w1
        if w2:
            r += _layer_share(K, k, nk, t1 + 1) * w2
        out.append(r)
    return tuple(out)


def centralized_rates(cls: DemandClass, cfg: SystemConfig) -> RateVector:
    # exact integer binomials, one double division per ratio
    K = cls.K
    t = cfg.t
    t1 = math.floor(t)
    parts = [(t1, t1 + 1 - t), (t1 + 1, t - t1)]
    out = []
    for k in range(1, K + 1):
        nk = None if cls.is_leader(k) else cls.better_leaders[k - 1]
        r = 0.0
        for tt, w in parts:
            total = binom(K, tt)
            if w == 0 or total == 0:
                continue
            sent = binom(K - k, tt)
            if nk is not None:
                sent -= binom(K - k - nk, tt)
            r += sent / total * w
        out.append(r * cfg.R)
    return RateVector(tuple(out), CENTRALIZED)


def decentralized_rates(cls: DemandClass, cfg: SystemConfig) -> RateVector:
    q = 1.0 - cfg.M / cfg.N  # fraction of each file a given user has not cached
    out = []
    for k in range(1, cfg.K + 1):
        r = q**k * cfg.R
        if not cls.is_leader(k):
            r *= 1.0 - q ** cls.better_leaders[k - 1]
        out.append(r)
    return RateVector(tuple(out), DECENTRALIZED)


def scheme_rates(cls: DemandClass, cfg: SystemConfig, scheme: str) -> RateVector:
    if _check_scheme(scheme) == CENTRALIZED:
        return centralized_rates(cls, cfg)
    return decentralized_rates(cls, cfg)


def worst_case_rates(cfg: SystemConfig, scheme: str) -> RateVector:
    return scheme_rates(worst_class(cfg.K, cfg.N), cfg, scheme)
