import itertools
from fractions import Fraction

import numpy as np
import pytest

from cachepower.combinatorics import binom, enumerate_classes, subsets_of_size
from cachepower.delivery import (
    MissingPacketError,
    SubfileId,
    expected_layer_rates,
    generate_packets,
    group_by_layer,
    lemma_sets,
    make_packet,
    packet_trace,
    place_centralized,
    random_files,
    reconstruct_packet,
    representative_demand,
    verify_decentralized_masses,
    verify_delivery,
    zero_sum_holds,
)
from cachepower.model import DemandClass, SystemConfig, leader_set

from oracles import demands

D_EX = (1, 2, 1, 1, 3)


def unit(K, N, M=0.0):
    return SystemConfig(K, N, 1.0, M, (1.0,) * K)


def W(i, *holders):
    return SubfileId(i, tuple(holders))


def example_packets(seed=0):
    cfg = unit(5, 3, 0.6)
    files = random_files(3, 5 * 8, seed)
    pl = place_centralized(cfg, 1, list(files))
    return cfg, pl, generate_packets(D_EX, cfg, 1, pl)


def test_placement_trivial_ends():
    cfg = unit(3, 2)
    files = list(random_files(2, 6, 1))
    pl = place_centralized(cfg, 0, files)
    assert set(pl.subfiles) == {W(1), W(2)}
    assert all(not c for c in pl.caches)
    pl = place_centralized(cfg, 3, files)
    assert all(set(c) == {W(1, 1, 2, 3), W(2, 1, 2, 3)} for c in pl.caches)


def test_placement_example_caches():
    cfg, pl, _ = example_packets()
    for k in range(1, 6):
        assert set(pl.caches[k - 1]) == {W(i, k) for i in (1, 2, 3)}
    # cache budget is file_bits * N * t / K
    assert all(pl.cache_bits(k) == 40 * 3 * 1 // 5 for k in range(1, 6))


def test_placement_divisibility():
    with pytest.raises(ValueError, match="multiple of C"):
        place_centralized(unit(4, 2), 2, list(random_files(2, 7, 0)))


def test_worked_example_packets():
    _, pl, pk = example_packets()
    expected = {
        (1, 2): {W(1, 2), W(2, 1)},
        (1, 3): {W(1, 3), W(1, 1)},
        (1, 4): {W(1, 4), W(1, 1)},
        (1, 5): {W(1, 5), W(3, 1)},
        (2, 3): {W(2, 3), W(1, 2)},
        (2, 4): {W(2, 4), W(1, 2)},
        (2, 5): {W(2, 5), W(3, 2)},
        (3, 5): {W(1, 5), W(3, 3)},
        (4, 5): {W(1, 5), W(3, 4)},
    }
    assert {C: set(p.terms) for C, p in pk.items()} == expected
    for C, p in pk.items():
        a, b = sorted(p.terms)
        assert np.array_equal(p.payload, pl.subfiles[a] ^ pl.subfiles[b])
        assert p.bit_length == 8 and p.layer == C[0]
    groups = group_by_layer(pk, 5)
    assert groups == {1: [(1, 2), (1, 3), (1, 4), (1, 5)], 2: [(2, 3), (2, 4), (2, 5)],
                      3: [(3, 5)], 4: [(4, 5)], 5: []}


def test_worked_example_reconstruction():
    cfg, pl, pk = example_packets()
    q34 = reconstruct_packet((3, 4), pk, D_EX)
    assert np.array_equal(q34.payload, pk[(1, 3)].payload ^ pk[(1, 4)].payload)
    direct = make_packet((3, 4), D_EX, pl)
    assert q34.terms == direct.terms == {W(1, 4), W(1, 3)}
    assert np.array_equal(q34.payload, direct.payload)


def test_worked_example_decodes():
    rep = verify_delivery(unit(5, 3, 0.6), D_EX, 1, rng_seed=7)
    assert rep.ok and rep.seed == 7
    assert rep.layer_rates == tuple(Fraction(x, 5) for x in (4, 3, 1, 1, 0))
    assert [u.packets_reconstructed for u in rep.users] == [0, 0, 1, 1, 0]
    assert all(u.max_layer_used <= u.user for u in rep.users)


def test_reconstruct_small_overlap():
    cfg = unit(4, 2, 0.5)
    d = (1, 1, 2, 2)
    pl = place_centralized(cfg, 1, list(random_files(2, 4 * 5, 3)))
    pk = generate_packets(d, cfg, 1, pl)
    q = reconstruct_packet((2, 4), pk, d)
    assert np.array_equal(q.payload, pl.subfiles[W(1, 4)] ^ pl.subfiles[W(2, 2)])


def test_reconstruct_errors():
    _, _, pk = example_packets()
    with pytest.raises(ValueError):
        reconstruct_packet((1, 3), pk, D_EX)
    partial = dict(pk)
    del partial[(1, 4)]
    with pytest.raises(MissingPacketError) as e:
        reconstruct_packet((3, 4), partial, D_EX)
    assert e.value.missing == (1, 4) and e.value.removed == (2, 3, 5)


def test_all_same_file_at_t0():
    cfg = unit(4, 3)
    pl = place_centralized(cfg, 0, list(random_files(3, 4, 0)))
    pk = generate_packets((1, 1, 1, 1), cfg, 0, pl)
    assert list(pk) == [(1,)]


def test_distinct_demands_send_everything():
    cfg = unit(4, 4, 2.0)
    pl = place_centralized(cfg, 2, list(random_files(4, 6 * 2, 0)))
    assert len(generate_packets((2, 1, 4, 3), cfg, 2, pl)) == binom(4, 3)


def test_full_cache_needs_nothing():
    rep = verify_delivery(unit(3, 2, 2.0), (1, 2, 1), 3, 0)
    assert rep.ok and rep.packets_generated == 0 and all(r == 0 for r in rep.layer_rates)


@pytest.mark.parametrize("K", range(1, 5))
def test_exhaustive_delivery(K):
    for N in range(1, 5):
        for t in range(K + 1):
            cfg = unit(K, N, t * N / K)
            for d in demands(K, N):
                rep = verify_delivery(cfg, d, t, rng_seed=11)
                assert rep.ok, (K, N, t, d, [u.missing for u in rep.users])
                assert rep.layer_rates == expected_layer_rates(d, t)
                assert all(u.max_layer_used <= u.user for u in rep.users)
                # n*M*R bits of cache with n*R = file_bits
                assert all(b * K == rep.file_bits * N * t for b in rep.cache_bits)


def test_rate_accounting_k5():
    for t in range(6):
        for w in enumerate_classes(5, 5):
            d = representative_demand(w.cls)
            rep = verify_delivery(unit(5, 5, float(t)), d, t, 0)
            assert rep.ok and rep.layer_rates == expected_layer_rates(d, t)


@pytest.mark.parametrize("K,N,M", [(4, 4, 1.5), (3, 2, 0.5), (5, 3, 1.0), (4, 3, 2.0)])
def test_memory_sharing_delivery(K, N, M):
    cfg = unit(K, N, M)
    assert not cfg.is_integer_t
    for d in itertools.islice(demands(K, N), 0, None, 3):
        rep = verify_delivery(cfg, d, rng_seed=5)
        assert rep.ok
        assert rep.layer_rates == expected_layer_rates(d, cfg.t_exact)
        assert all(b == rep.file_bits * M for b in rep.cache_bits)


def test_zero_sum_lemma():
    for K in range(1, 5):
        for N in range(1, 5):
            for t in range(K):
                cfg = unit(K, N, t * N / K)
                pl = place_centralized(cfg, t, list(random_files(N, binom(K, t) * 4, 2)))
                for d in demands(K, N):
                    U = set(leader_set(d).leaders)
                    allp = generate_packets(d, cfg, t, pl, delivered_only=False)
                    for B in subsets_of_size(K, t + 1 + len(U)):
                        if U <= set(B):
                            assert zero_sum_holds(B, allp, d)


def test_lemma_sets():
    assert lemma_sets((1, 2, 3, 4), (1, 1, 2, 2)) == [(1, 3), (2, 3), (1, 4), (2, 4)]


def test_trace_format():
    _, _, pk = example_packets()
    lines = packet_trace(pk).splitlines()
    assert len(lines) == 9
    assert lines[0] == "1,1-2,8"
    assert "4,4-5,8" in lines


def test_mass_model_trivial():
    cls = DemandClass((1, 3), 4)
    rep = verify_decentralized_masses(unit(4, 3, 0.0), cls)
    assert rep.ok
    assert rep.layer_masses == (1.0, 0.0, 1.0, 0.0)
    rep = verify_decentralized_masses(unit(2, 2, 1.0), DemandClass((1,), 2))
    assert rep.layer_masses == pytest.approx((0.5, 0.0), abs=1e-15)


def test_mass_model_exhaustive():
    for K in range(1, 5):
        for N in range(1, 5):
            for M in (0.0, N / 4, N / 2, 3 * N / 4, N):
                for w in enumerate_classes(K, N):
                    rep = verify_decentralized_masses(unit(K, N, M), w.cls)
                    assert rep.ok and rep.max_error <= 1e-12


def test_mass_model_any_representative():
    cfg = unit(4, 4, 1.0)
    for d in demands(4, 3):
        assert verify_decentralized_masses(cfg, leader_set(d), d).ok
