import math

import pytest

from cachepower.combinatorics import (
    EnumerationLimitError,
    all_subsets,
    binom,
    class_multiplicity,
    enumerate_classes,
    subsets_of_size,
)
from cachepower.model import DemandClass

from oracles import class_counts


def test_binom():
    assert binom(5, 2) == 10
    assert binom(3, 5) == 0
    assert binom(0, 0) == 1
    assert binom(-1, 0) == 0 and binom(4, -1) == 0
    assert binom(200, 100) == math.comb(200, 100)


def test_multiplicity_small():
    assert class_multiplicity(DemandClass((1,), 2), 2) == 2
    assert class_multiplicity(DemandClass((1, 2), 2), 2) == 2
    assert class_multiplicity(DemandClass((1,), 3), 2) == 2
    assert class_multiplicity(DemandClass((1, 2), 3), 2) == 4
    assert class_multiplicity(DemandClass((1, 3), 3), 2) == 2
    assert class_multiplicity(DemandClass((1, 2, 3), 3), 2) == 0
    for N in (1, 2, 7):
        assert class_multiplicity(DemandClass((1,), 1), N) == N


def test_enumerate_small():
    got = [(w.cls.leaders, w.count) for w in enumerate_classes(2, 2)]
    assert got == [((1,), 2), ((1, 2), 2)]
    got = [(w.cls.leaders, w.count) for w in enumerate_classes(3, 1)]
    assert got == [((1,), 1)]


def test_fig1_classes():
    ws = enumerate_classes(5, 8)
    assert len(ws) == 16
    assert sum(w.count for w in ws) == 8**5
    assert math.fsum(w.probability for w in ws) == pytest.approx(1.0, abs=1e-12)


def test_order_is_binary_counting():
    got = [w.cls.leaders for w in enumerate_classes(4, 4)]
    assert got[:5] == [(1,), (1, 2), (1, 3), (1, 2, 3), (1, 4)]


@pytest.mark.parametrize("K", range(1, 5))
@pytest.mark.parametrize("N", range(1, 5))
def test_partition_matches_brute_force(K, N):
    brute = class_counts(K, N)
    got = {w.cls.leaders: w.count for w in enumerate_classes(K, N)}
    assert got == dict(brute)
    assert math.fsum(w.probability for w in enumerate_classes(K, N)) == pytest.approx(1, abs=1e-12)


def test_huge_counts_stay_exact():
    ws = enumerate_classes(20, 1000)
    assert sum(w.count for w in ws) == 1000**20
    assert math.fsum(w.probability for w in ws) == pytest.approx(1.0, abs=1e-12)
    w = ws[-1]
    assert w.log_probability == pytest.approx(math.log(w.probability))


def test_enumeration_limit():
    with pytest.raises(EnumerationLimitError):
        enumerate_classes(31, 2)


def test_subset_orders():
    assert subsets_of_size(3, 2) == [(1, 2), (1, 3), (2, 3)]
    assert subsets_of_size(4, 2)[:4] == [(1, 2), (1, 3), (2, 3), (1, 4)]
    assert subsets_of_size(3, 0) == [()]
    assert list(all_subsets([1, 2])) == [(1,), (2,), (1, 2)]
    assert list(all_subsets([5], nonempty=False)) == [(), (5,)]
