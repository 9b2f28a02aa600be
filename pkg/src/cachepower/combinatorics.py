"""Binomials, subset orderings and demand-class enumeration with multiplicities."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator

from .model import DemandClass

# 2^(K-1) classes; beyond this the enumeration is not practical
MAX_ENUM_K = 30


class EnumerationLimitError(ValueError):
    pass


def binom(n: int, k: int) -> int:
    """C(n, k) with C(n, k) = 0 for k > n or any negative argument."""
    if n < 0 or k < 0 or k > n:
        return 0
    return math.comb(n, k)


def mask_of(users: Iterable[int]) -> int:
    m = 0
    for u in users:
        m |= 1 << (u - 1)
    return m


def subsets_of_size(K: int, size: int) -> list[tuple[int, ...]]:
    """All `size`-subsets of [1, K] in colexicographic (bitmask) order."""
    subs = list(combinations(range(1, K + 1), size))
    subs.sort(key=mask_of)
    return subs


def all_subsets(users: Iterable[int], nonempty: bool = True) -> Iterator[tuple[int, ...]]:
    """Subsets of `users` in binary counting order over their positions."""
    users = tuple(users)
    start = 1 if nonempty else 0
    for m in range(start, 1 << len(users)):
        yield tuple(u for i, u in enumerate(users) if m >> i & 1)


@dataclass(frozen=True)
class ClassWeight:
    cls: DemandClass
    count: int  # number of demand vectors in [N]^K with this leader set
    N: int
    probability: float = field(init=False)

    def __post_init__(self):
        # exact int / int true division rounds once, however large N^K is
        object.__setattr__(self, "probability", self.count / self.N**self.cls.K)

    @property
    def log_probability(self) -> float:
        if self.count == 0:
            return -math.inf
        return math.log(self.count) - self.cls.K * math.log(self.N)


def class_multiplicity(cls: DemandClass, N: int) -> int:
    """Number of demand vectors whose leader set is `cls.leaders`.

    Leaders pick distinct files in N!/(N-N_d)! ways; a non-leader sitting
    between the j-th and (j+1)-th leader must copy one of the first j leaders.
    """
    nd = cls.n_distinct
    if nd > N:
        return 0
    u = list(cls.leaders) + [cls.K + 1]
    count = math.perm(N, nd)
    for j in range(1, nd + 1):
        count *= j ** (u[j] - u[j - 1] - 1)
    return count


def enumerate_classes(K: int, N: int) -> list[ClassWeight]:
    """Every feasible leader set with its multiplicity, in binary counting order over [2..K]."""
    if K < 1 or N < 1:
        raise ValueError("K and N must be positive")
    if K > MAX_ENUM_K:
        raise EnumerationLimitError(f"K={K} exceeds the enumeration limit {MAX_ENUM_K}")
    return list(_classes(K, N))


@lru_cache(maxsize=64)
def _classes(K: int, N: int) -> tuple[ClassWeight, ...]:
    cap = min(N, K)
    out = []
    for rest in all_subsets(range(2, K + 1), nonempty=False):
        if len(rest) + 1 > cap:
            continue
        cls = DemandClass((1,) + rest, K)
        out.append(ClassWeight(cls, class_multiplicity(cls, N), N))
    return tuple(out)
