"""Superposition-coding power engine and the average / peak power of both schemes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .combinatorics import ClassWeight, EnumerationLimitError, enumerate_classes
from .model import DemandClass, SystemConfig, validate_config, worst_class
from .schemes import CENTRALIZED, DECENTRALIZED, _check_scheme, scheme_rates

LN2 = math.log(2.0)
# switch to log-domain accumulation once a partial product passes 1e300
LOG2_SWITCH = math.log2(1e300)
# enumerate is the default peak method up to this many users
ENUM_DEFAULT_MAX_K = 20


@dataclass(frozen=True)
class PowerResult:
    total: float
    layer_shares: tuple[float, ...]
    log2_total: float

    def __post_init__(self):
        object.__setattr__(self, "layer_shares", tuple(self.layer_shares))


@dataclass(frozen=True)
class TradeoffPoint:
    M: float
    avg_ub_c: float
    peak_ub_c: float
    avg_ub_d: float
    peak_ub_d: float


def _gain_factor(r: float) -> float:
    """2^(2r) - 1 without cancellation for small r."""
    return math.expm1(2.0 * r * LN2)


def _log2_gain_factor(r: float) -> float:
    if r <= 0:
        return -math.inf
    # log2(2^(2r) - 1) = 2r + log2(1 - 2^(-2r))
    return 2.0 * r + math.log1p(-(2.0 ** (-2.0 * r))) / LN2


def _log2_total(rates: Sequence[float], gains: Sequence[float]) -> float:
    acc = 0.0
    terms = []
    for r, g in zip(rates, gains):
        if r > 0:
            terms.append(_log2_gain_factor(r) - math.log2(g) + acc)
        acc += 2.0 * r
    if not terms:
        return -math.inf
    top = max(terms)
    return top + math.log2(math.fsum(2.0 ** (x - top) for x in terms))


def _shares(rates: Sequence[float], gains: Sequence[float]) -> list[float]:
    K = len(rates)
    a = [_gain_factor(r) / g for r, g in zip(rates, gains)]
    shares = []
    for k in range(K):
        if rates[k] == 0:
            shares.append(0.0)
            continue
        inner = 0.0
        for i in range(k + 1, K):
            prod = 1.0
            for j in range(k + 1, i):
                prod *= 2.0 ** (2.0 * rates[j])
            inner += a[i] * prod
        shares.append(a[k] * (1.0 + gains[k] * inner))
    return shares


def _check(rates, gains):
    rates = tuple(float(r) for r in rates)
    if len(rates) != len(gains):
        raise ValueError(f"{len(rates)} rates for {len(gains)} users")
    if any(r < 0 for r in rates):
        raise ValueError("rates must be non-negative")
    return rates


def total_power(rates: Sequence[float], gains: Sequence[float]) -> float:
    """The total of min_power without the per-layer split."""
    rates = _check(rates, gains)
    if 2.0 * sum(rates) > LOG2_SWITCH:
        log2_total = _log2_total(rates, gains)
        return 2.0**log2_total if log2_total < 1023 else math.inf
    total = 0.0
    prod = 1.0
    for r, g in zip(rates, gains):
        total += _gain_factor(r) / g * prod
        prod *= 2.0 ** (2.0 * r)
    return total


def min_power(rates: Sequence[float], gains: Sequence[float]) -> PowerResult:
    """Minimum total power delivering rate rates[k] to user k by superposition coding.

    Layer k is decoded by user k with layers k+1..K treated as noise; the
    weaker layers have already been stripped by successive decoding.
    """
    rates = _check(rates, gains)
    gains = tuple(gains)
    if 2.0 * sum(rates) > LOG2_SWITCH:
        log2_total = _log2_total(rates, gains)
        total = 2.0**log2_total if log2_total < 1023 else math.inf
        try:
            shares = _shares(rates, gains)
        except OverflowError:
            shares = [math.inf if r > 0 else 0.0 for r in rates]
        return PowerResult(total, shares, log2_total)
    total = total_power(rates, gains)
    log2_total = math.log2(total) if total > 0 else -math.inf
    return PowerResult(total, _shares(rates, gains), log2_total)


def class_power(cls: DemandClass, cfg: SystemConfig, scheme: str) -> PowerResult:
    return min_power(scheme_rates(cls, cfg, scheme).rates, cfg.gains)


def class_total(cls: DemandClass, cfg: SystemConfig, scheme: str) -> float:
    return total_power(scheme_rates(cls, cfg, scheme).rates, cfg.gains)


def average_power(cfg: SystemConfig, scheme: str, classes: list[ClassWeight] | None = None) -> float:
    """Expected power over uniformly random demands, summed class by class."""
    validate_config(cfg)
    _check_scheme(scheme)
    if classes is None:
        classes = enumerate_classes(cfg.K, cfg.N)
    return math.fsum(w.probability * class_total(w.cls, cfg, scheme) for w in classes)


def peak_class(cfg: SystemConfig, scheme: str, classes: list[ClassWeight] | None = None):
    """(class, power) maximizing the required power; first maximizer in class order."""
    validate_config(cfg)
    if classes is None:
        classes = enumerate_classes(cfg.K, cfg.N)
    best = None
    for w in classes:
        p = class_total(w.cls, cfg, scheme)
        if best is None or p > best[1]:
            best = (w.cls, p)
    return best


def argmax_classes(cfg: SystemConfig, scheme: str, classes: list[ClassWeight] | None = None,
                   rtol: float = 1e-12) -> tuple[list[DemandClass], float]:
    """All classes whose power is within rtol of the maximum.

    Ties are common: once t is large the strongest leaders get rate zero, so
    dropping them from the leader set leaves the power unchanged.
    """
    validate_config(cfg)
    if classes is None:
        classes = enumerate_classes(cfg.K, cfg.N)
    powers = [(w.cls, class_total(w.cls, cfg, scheme)) for w in classes]
    top = max(p for _, p in powers)
    return [c for c, p in powers if p >= top - rtol * abs(top)], top


def peak_closed_form(cfg: SystemConfig, scheme: str) -> float:
    """Worst-case power with the min(N, K) weakest users requesting distinct files."""
    validate_config(cfg)
    if _check_scheme(scheme) == CENTRALIZED:
        return class_total(worst_class(cfg.K, cfg.N), cfg, CENTRALIZED)
    # decentralized: prod_{j<i} 2^(2R q^j) = 2^(2R (N/M - 1)(1 - q^(i-1))), q = 1 - M/N
    q = 1.0 - cfg.M / cfg.N
    total = 0.0
    for i in range(1, min(cfg.N, cfg.K) + 1):
        if cfg.M == 0:
            expo = float(i - 1)
        else:
            expo = (cfg.N / cfg.M - 1.0) * (1.0 - q ** (i - 1))
        total += _gain_factor(cfg.R * q**i) / cfg.gains[i - 1] * 2.0 ** (2.0 * cfg.R * expo)
    return total


def peak_power(cfg: SystemConfig, scheme: str, method: str | None = None,
               classes: list[ClassWeight] | None = None) -> float:
    if method is None:
        method = "enumerate" if cfg.K <= ENUM_DEFAULT_MAX_K else "closed_form"
    if method == "closed_form":
        return peak_closed_form(cfg, scheme)
    if method != "enumerate":
        raise ValueError(f"unknown peak method {method!r}")
    if cfg.K > ENUM_DEFAULT_MAX_K:
        raise EnumerationLimitError(f"peak enumeration limited to K <= {ENUM_DEFAULT_MAX_K}")
    return peak_class(cfg, scheme, classes)[1]


def tradeoff_point(cfg: SystemConfig, classes: list[ClassWeight] | None = None) -> TradeoffPoint:
    if classes is None and cfg.K <= ENUM_DEFAULT_MAX_K:
        classes = enumerate_classes(cfg.K, cfg.N)
    return TradeoffPoint(
        cfg.M,
        average_power(cfg, CENTRALIZED, classes),
        peak_power(cfg, CENTRALIZED, classes=classes),
        average_power(cfg, DECENTRALIZED, classes),
        peak_power(cfg, DECENTRALIZED, classes=classes),
    )
