"""Lower bounds under uncoded placement, the convexity probe and multiplicative gaps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .combinatorics import ClassWeight, all_subsets, enumerate_classes
from .model import SystemConfig, validate_config
from .power import (
    ENUM_DEFAULT_MAX_K,
    TradeoffPoint,
    total_power,
    tradeoff_point,
)

# lower_bound_peak enumerates subsets (and checks the analytic maximizer) up to this size
PEAK_LB_ENUM_MAX = 12
PEAK_LB_HARD_MAX = 20


def nested_power(s: Sequence[float], gains: Sequence[float]) -> float:
    """sum_i (2^(2 s_i) - 1)/g_i * prod_{j<i} 2^(2 s_j); the power of a layered code."""
    return total_power(s, gains)


def lb_rate_terms(cfg: SystemConfig, count: int) -> list[float]:
    """Residual rate of the i-th distinct request after i caches are pooled."""
    if not 1 <= count <= cfg.K:
        raise ValueError(f"count must lie in [1, K={cfg.K}], got {count}")
    return [cfg.R * (1.0 - min(i * cfg.M / cfg.N, 1.0)) for i in range(1, count + 1)]


def lower_bound_average(cfg: SystemConfig, classes: list[ClassWeight] | None = None) -> float:
    validate_config(cfg)
    if classes is None:
        classes = enumerate_classes(cfg.K, cfg.N)
    terms = lb_rate_terms(cfg, min(cfg.N, cfg.K))
    acc = []
    for w in classes:
        nd = w.cls.n_distinct
        # leaders are index-sorted and gains non-decreasing, so the i-th leader
        # is also the i-th weakest
        g = [cfg.gains[u - 1] for u in w.cls.leaders]
        acc.append(w.probability * nested_power(terms[:nd], g))
    return math.fsum(acc)


def _peak_lb_value(cfg: SystemConfig, S: Sequence[int], terms: Sequence[float]) -> float:
    return nested_power(terms[: len(S)], [cfg.gains[u - 1] for u in sorted(S)])


def lower_bound_peak(cfg: SystemConfig, method: str | None = None) -> float:
    """Max over subsets S of the min(N, K) weakest users of the layered lower bound."""
    validate_config(cfg)
    m = min(cfg.N, cfg.K)
    terms = lb_rate_terms(cfg, m)
    analytic = _peak_lb_value(cfg, range(1, m + 1), terms)
    if method is None:
        method = "enumerate" if m <= PEAK_LB_ENUM_MAX else "analytic"
    if method == "analytic":
        return analytic
    if method != "enumerate":
        raise ValueError(f"unknown method {method!r}")
    if m > PEAK_LB_HARD_MAX:
        raise ValueError(f"subset enumeration capped at min(N, K) <= {PEAK_LB_HARD_MAX}")
    best = max(_peak_lb_value(cfg, S, terms) for S in all_subsets(range(1, m + 1)))
    if best > analytic * (1 + 1e-12) + 1e-300:
        raise AssertionError(f"peak lower bound maximized away from [1..{m}]: {best} > {analytic}")
    return best


@dataclass(frozen=True)
class ConvexityReport:
    dim: int
    trials: int
    violations: int
    max_violation: float  # largest f(mid) - (f(s)+f(s'))/2, clipped at 0


def convexity_probe(dim: int, gains: Sequence[float], trials: int, seed: int = 0,
                    R: float = 1.0, tol: float = 1e-9) -> ConvexityReport:
    """Random midpoint-convexity checks of the layered power function on [0, R]^dim."""
    gains = list(gains)[:dim]
    if len(gains) < dim:
        raise ValueError(f"need {dim} gains, got {len(gains)}")
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.0, R, size=(trials, dim))
    sp = rng.uniform(0.0, R, size=(trials, dim))
    violations = 0
    worst = 0.0
    for a, b in zip(s, sp):
        gap = nested_power((a + b) / 2, gains) - (nested_power(a, gains) + nested_power(b, gains)) / 2
        if gap > tol:
            violations += 1
        worst = max(worst, gap)
    return ConvexityReport(dim, trials, violations, worst)


@dataclass(frozen=True)
class BoundPoint:
    M: float
    avg_lb: float
    peak_lb: float
    gap_avg_c: Optional[float]
    gap_avg_d: Optional[float]
    gap_peak_c: Optional[float]
    gap_peak_d: Optional[float]
    upper: TradeoffPoint


def _ratio(ub: float, lb: float) -> Optional[float]:
    if lb == 0:
        if abs(ub) > 1e-12:
            raise ArithmeticError(f"upper bound {ub} is positive where the lower bound vanishes")
        return None
    return ub / lb


def gaps(cfg: SystemConfig, classes: list[ClassWeight] | None = None) -> BoundPoint:
    """Upper / lower bound ratios; None where both bounds are zero (M = N)."""
    validate_config(cfg)
    if classes is None and cfg.K <= ENUM_DEFAULT_MAX_K:
        classes = enumerate_classes(cfg.K, cfg.N)
    up = tradeoff_point(cfg, classes)
    avg_lb = lower_bound_average(cfg, classes)
    peak_lb = lower_bound_peak(cfg)
    return BoundPoint(
        cfg.M, avg_lb, peak_lb,
        _ratio(up.avg_ub_c, avg_lb), _ratio(up.avg_ub_d, avg_lb),
        _ratio(up.peak_ub_c, peak_lb), _ratio(up.peak_ub_d, peak_lb),
        up,
    )
