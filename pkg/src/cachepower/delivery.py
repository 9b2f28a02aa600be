"""Bit-exact simulation of centralized coded delivery and a mass-model check of the decentralized one.

Subsets of users are sorted tuples of 1-based indices; wherever a family of
subsets is listed it is in colexicographic (bitmask) order.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

from .combinatorics import all_subsets, binom, mask_of, subsets_of_size
from .model import DemandClass, SystemConfig, leader_set, validate_config, validate_demand
from .schemes import centralized_rate_fractions, decentralized_rates

Subset = tuple[int, ...]

DEFAULT_SUBFILE_BITS = 16


class DeliveryError(RuntimeError):
    pass


class MissingPacketError(DeliveryError):
    def __init__(self, target: Subset, missing: Subset, removed: Subset):
        super().__init__(
            f"cannot rebuild Q{list(target)}: constituent Q{list(missing)} "
            f"(G = {list(removed)}) was not delivered"
        )
        self.target = target
        self.missing = missing
        self.removed = removed


@dataclass(frozen=True, order=True)
class SubfileId:
    file: int
    holders: Subset


@dataclass(frozen=True)
class CodedPacket:
    target_set: Subset
    terms: frozenset  # SubfileIds XORed together
    payload: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def layer(self) -> int:
        return self.target_set[0]

    @property
    def bit_length(self) -> int:
        return 0 if self.payload is None else int(self.payload.size)


@dataclass
class Placement:
    K: int
    N: int
    t: int
    subfile_bits: int
    subfiles: dict[SubfileId, np.ndarray]
    caches: list[dict[SubfileId, np.ndarray]]  # caches[k - 1] is user k's cache

    def cache_bits(self, k: int) -> int:
        return sum(int(b.size) for b in self.caches[k - 1].values())

    def order(self) -> list[Subset]:
        return subsets_of_size(self.K, self.t)


def random_files(N: int, bits: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=(N, bits), dtype=np.uint8)


def place_centralized(cfg: SystemConfig, t: int, files: Sequence[np.ndarray]) -> Placement:
    """Split every file into C(K, t) equal pieces; user k stores the pieces labelled with sets containing k."""
    K, N = cfg.K, cfg.N
    if not (isinstance(t, int) and 0 <= t <= K):
        raise ValueError(f"t must be an integer in [0, {K}], got {t!r}")
    if len(files) != N:
        raise ValueError(f"expected {N} files, got {len(files)}")
    order = subsets_of_size(K, t)
    pieces = len(order)
    subfiles: dict[SubfileId, np.ndarray] = {}
    sub_bits = None
    for i, f in enumerate(files, start=1):
        f = np.asarray(f, dtype=np.uint8)
        if f.size % pieces:
            raise ValueError(
                f"file {i} has {f.size} bits, not a multiple of C({K},{t}) = {pieces}"
            )
        sub_bits = f.size // pieces
        for j, holders in enumerate(order):
            subfiles[SubfileId(i, holders)] = f[j * sub_bits:(j + 1) * sub_bits]
    caches = [{sid: b for sid, b in subfiles.items() if k in sid.holders} for k in range(1, K + 1)]
    return Placement(K, N, t, sub_bits or 0, subfiles, caches)


def _xor(blocks: Iterable[np.ndarray]) -> np.ndarray:
    return reduce(np.bitwise_xor, blocks)


def packet_terms(C: Subset, d: Sequence[int]) -> frozenset:
    return frozenset(SubfileId(d[k - 1], tuple(u for u in C if u != k)) for k in C)


def make_packet(C: Subset, d: Sequence[int], placement: Placement | None = None) -> CodedPacket:
    terms = packet_terms(C, d)
    payload = None
    if placement is not None:
        payload = _xor(placement.subfiles[s] for s in sorted(terms))
    return CodedPacket(C, terms, payload)


def generate_packets(d: Sequence[int], cfg: SystemConfig, t: int, placement: Placement,
                     delivered_only: bool = True) -> dict[Subset, CodedPacket]:
    """Coded packets Q_C for the (t+1)-sets C; by default only those touching a leader."""
    leaders = set(leader_set(d).leaders)
    out = {}
    for C in subsets_of_size(cfg.K, t + 1):
        if delivered_only and leaders.isdisjoint(C):
            continue
        out[C] = make_packet(C, d, placement)
    return out


def group_by_layer(packets: Mapping[Subset, CodedPacket], K: int) -> dict[int, list[Subset]]:
    """Per user k, the packets whose weakest target is k (those ride on layer k)."""
    groups: dict[int, list[Subset]] = {k: [] for k in range(1, K + 1)}
    for C in sorted(packets, key=mask_of):
        groups[packets[C].layer].append(C)
    return groups


def lemma_sets(B: Subset, d: Sequence[int]) -> list[Subset]:
    """Subsets G of B holding exactly one user per file requested inside B."""
    by_file: dict[int, list[int]] = {}
    for u in B:
        by_file.setdefault(d[u - 1], []).append(u)
    return sorted((tuple(sorted(g)) for g in product(*by_file.values())), key=mask_of)


def reconstruction_sources(S: Subset, d: Sequence[int]) -> list[tuple[Subset, Subset]]:
    """(G, B minus G) pairs whose packets XOR to Q_S, with B = S + leaders and G != leaders."""
    cls = leader_set(d)
    U = set(cls.leaders)
    if not U.isdisjoint(S):
        raise ValueError(f"S={list(S)} contains a leader; Q_S is delivered directly")
    B = tuple(sorted(U.union(S)))
    out = []
    for G in lemma_sets(B, d):
        if G == cls.leaders:
            continue
        out.append((G, tuple(u for u in B if u not in G)))
    return out


def reconstruct_packet(S: Subset, delivered: Mapping[Subset, CodedPacket], d: Sequence[int]) -> CodedPacket:
    """Rebuild an undelivered packet as the XOR of delivered packets."""
    S = tuple(sorted(S))
    parts = []
    for G, src in reconstruction_sources(S, d):
        if src not in delivered:
            raise MissingPacketError(S, src, G)
        parts.append(delivered[src])
    if not parts:
        raise ValueError(f"nothing to XOR for Q{list(S)}")
    terms = reduce(lambda a, b: a ^ b, (p.terms for p in parts))
    payload = None
    if all(p.payload is not None for p in parts):
        payload = _xor(p.payload for p in parts)
    return CodedPacket(S, terms, payload)


def zero_sum_holds(B: Subset, packets: Mapping[Subset, CodedPacket], d: Sequence[int]) -> bool:
    """XOR over G of Q_{B minus G} is the zero block (and the empty symbolic sum)."""
    parts = [packets[tuple(u for u in B if u not in G)] for G in lemma_sets(B, d)]
    terms = reduce(lambda a, b: a ^ b, (p.terms for p in parts))
    if terms:
        return False
    if all(p.payload is not None for p in parts):
        return not _xor(p.payload for p in parts).any()
    return True


def packet_trace(packets: Mapping[Subset, CodedPacket]) -> str:
    """One line per packet: ``layer,target_set,bit_length`` with targets joined by '-'."""
    lines = []
    for C in sorted(packets, key=mask_of):
        p = packets[C]
        lines.append(f"{p.layer},{'-'.join(map(str, C))},{p.bit_length}")
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class UserReport:
    user: int
    decoded_ok: bool
    file_hash: str
    packets_received: int
    packets_reconstructed: int
    max_layer_used: int
    missing: str | None = None


@dataclass
class DeliveryReport:
    demand: tuple[int, ...]
    t: Fraction
    seed: int
    file_bits: int
    users: list[UserReport]
    layer_rates: tuple[Fraction, ...]  # per-layer delivered rate as a fraction of R
    packets_generated: int
    reconstructions: int
    cache_bits: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return all(u.decoded_ok for u in self.users)

    def rates(self, R: float) -> tuple[float, ...]:
        return tuple(float(r) * R for r in self.layer_rates)


def _digest(bits: np.ndarray) -> str:
    return hashlib.sha256(np.packbits(bits).tobytes() + str(bits.size).encode()).hexdigest()[:16]


@dataclass
class _Run:
    decoded: list[np.ndarray | None]
    received: list[int]
    rebuilt: list[int]
    max_layer: list[int]
    missing: list[str | None]
    layer_counts: list[int]
    sub_bits: int
    packets: int
    cache_bits: list[int]


def _run_integer(cfg: SystemConfig, d: tuple[int, ...], t: int, files: np.ndarray) -> _Run:
    K = cfg.K
    placement = place_centralized(cfg, t, list(files))
    delivered = generate_packets(d, cfg, t, placement)
    groups = group_by_layer(delivered, K)
    order = placement.order()
    rebuilt_cache: dict[Subset, CodedPacket] = {}
    run = _Run([None] * K, [0] * K, [0] * K, [0] * K, [None] * K,
               [len(groups[k]) for k in range(1, K + 1)], placement.subfile_bits,
               len(delivered), [placement.cache_bits(k) for k in range(1, K + 1)])

    for k in range(1, K + 1):
        cache = placement.caches[k - 1]
        # successive decoding: user k strips layers 1..k
        heard = {C: p for C, p in delivered.items() if p.layer <= k}
        run.received[k - 1] = len(heard)
        want = d[k - 1]
        pieces = []
        try:
            for T in order:
                if k in T:
                    pieces.append(cache[SubfileId(want, T)])
                    continue
                C = tuple(sorted(T + (k,)))
                if C in heard:
                    Q = heard[C]
                    run.max_layer[k - 1] = max(run.max_layer[k - 1], Q.layer)
                elif C in delivered:
                    raise DeliveryError(f"user {k}: Q{list(C)} sits on layer {delivered[C].layer} > {k}")
                else:
                    srcs = reconstruction_sources(C, d)
                    for G, src in srcs:
                        if src not in heard:
                            raise MissingPacketError(C, src, G)
                        run.max_layer[k - 1] = max(run.max_layer[k - 1], heard[src].layer)
                    if C not in rebuilt_cache:
                        rebuilt_cache[C] = reconstruct_packet(C, heard, d)
                    Q = rebuilt_cache[C]
                    run.rebuilt[k - 1] += 1
                side = [cache[SubfileId(d[j - 1], tuple(u for u in C if u != j))] for j in C if j != k]
                pieces.append(_xor([Q.payload] + side) if side else Q.payload.copy())
        except (DeliveryError, KeyError) as exc:
            run.missing[k - 1] = str(exc)
            continue
        run.decoded[k - 1] = np.concatenate(pieces) if pieces else np.zeros(0, np.uint8)
    return run


def verify_delivery(cfg: SystemConfig, d: Sequence[int], t: int | None = None, rng_seed: int = 0,
                    subfile_bits: int = DEFAULT_SUBFILE_BITS) -> DeliveryReport:
    """Simulate placement, filtered delivery and decoding at integer t; check every file bitwise."""
    validate_config(cfg)
    d = validate_demand(d, cfg)
    if t is None:
        t = cfg.t_exact
        if t.denominator != 1:
            return verify_delivery_shared(cfg, d, rng_seed, subfile_bits)
        t = int(t)
    file_bits = binom(cfg.K, t) * subfile_bits
    files = random_files(cfg.N, file_bits, rng_seed)
    run = _run_integer(cfg, d, t, files)
    users = []
    for k in range(1, cfg.K + 1):
        got = run.decoded[k - 1]
        ok = got is not None and np.array_equal(got, files[d[k - 1] - 1])
        users.append(UserReport(
            k, ok, _digest(got) if got is not None else "", run.received[k - 1],
            run.rebuilt[k - 1], run.max_layer[k - 1],
            run.missing[k - 1] or (None if ok else "reconstructed file differs"),
        ))
    rates = tuple(Fraction(c * run.sub_bits, file_bits) for c in run.layer_counts)
    return DeliveryReport(d, Fraction(t), rng_seed, file_bits, users, rates, run.packets,
                          sum(run.rebuilt), tuple(run.cache_bits))


def verify_delivery_shared(cfg: SystemConfig, d: Sequence[int], rng_seed: int = 0,
                           subfile_bits: int = DEFAULT_SUBFILE_BITS) -> DeliveryReport:
    """Non-integer t: split each file between the floor(t) and floor(t)+1 systems and run both."""
    validate_config(cfg)
    d = validate_demand(d, cfg)
    t = cfg.t_exact
    t1 = math.floor(t)
    w1, w2 = t1 + 1 - t, t - t1
    c1, c2 = binom(cfg.K, t1), binom(cfg.K, t1 + 1)
    L = t.denominator * c1 * c2 * subfile_bits
    bits1 = int(w1 * L)
    files = random_files(cfg.N, L, rng_seed)
    run1 = _run_integer(cfg, d, t1, files[:, :bits1])
    run2 = _run_integer(cfg, d, t1 + 1, files[:, bits1:])
    users = []
    for k in range(1, cfg.K + 1):
        a, b = run1.decoded[k - 1], run2.decoded[k - 1]
        got = None if a is None or b is None else np.concatenate([a, b])
        ok = got is not None and np.array_equal(got, files[d[k - 1] - 1])
        users.append(UserReport(
            k, ok, _digest(got) if got is not None else "",
            run1.received[k - 1] + run2.received[k - 1],
            run1.rebuilt[k - 1] + run2.rebuilt[k - 1],
            max(run1.max_layer[k - 1], run2.max_layer[k - 1]),
            run1.missing[k - 1] or run2.missing[k - 1] or (None if ok else "reconstructed file differs"),
        ))
    rates = tuple(Fraction(a * run1.sub_bits + b * run2.sub_bits, L)
                  for a, b in zip(run1.layer_counts, run2.layer_counts))
    return DeliveryReport(d, t, rng_seed, L, users, rates, run1.packets + run2.packets,
                          sum(run1.rebuilt) + sum(run2.rebuilt),
                          tuple(x + y for x, y in zip(run1.cache_bits, run2.cache_bits)))


def expected_layer_rates(d: Sequence[int], t) -> tuple[Fraction, ...]:
    return centralized_rate_fractions(leader_set(d), t)


# --- decentralized placement: exact expected-mass model ---------------------

def representative_demand(cls: DemandClass) -> tuple[int, ...]:
    """A demand vector with leader set `cls`: leaders get files 1..N_d, others copy the nearest leader below."""
    d = []
    nxt = 0
    for k in range(1, cls.K + 1):
        if cls.is_leader(k):
            nxt += 1
        d.append(nxt)
    return tuple(d)


@dataclass
class MassReport:
    layer_masses: tuple[float, ...]
    binomial_sums: tuple[float, ...]
    closed_form: tuple[float, ...]
    max_error: float
    mismatched_layers: tuple[int, ...]
    uncovered: list[str]

    @property
    def ok(self) -> bool:
        return not self.mismatched_layers and not self.uncovered


def verify_decentralized_masses(cfg: SystemConfig, cls: DemandClass, d: Sequence[int] | None = None,
                                tol: float = 1e-12) -> MassReport:
    """Sum subfile masses per layer over the delivered sets and check decodability symbolically.

    Subfile W_{i,S} (cached by exactly the users in S) carries a fraction
    p^|S| q^(K-|S|) of the file, p = M/N, q = 1 - p.
    """
    validate_config(cfg)
    K, R = cfg.K, cfg.R
    p = cfg.M / cfg.N
    q = 1.0 - p
    U = set(cls.leaders)
    masses = [[] for _ in range(K)]
    for S in all_subsets(range(1, K + 1)):
        if U.isdisjoint(S):
            continue
        masses[S[0] - 1].append(p ** (len(S) - 1) * q ** (K - len(S) + 1) * R)
    layer = tuple(math.fsum(m) for m in masses)

    def tail(n):
        return math.fsum(binom(n, i) * p**i * q ** (K - i) * R for i in range(n + 1))

    sums = []
    for k in range(1, K + 1):
        v = tail(K - k)
        if not cls.is_leader(k):
            v -= tail(K - k - cls.better_leaders[k - 1])
        sums.append(v)
    closed = decentralized_rates(cls, cfg).rates
    errs = [max(abs(a - b), abs(a - c)) for a, b, c in zip(layer, sums, closed)]
    bad = tuple(k for k, e in enumerate(errs, start=1) if e > tol * max(1.0, R))

    if d is None:
        d = representative_demand(cls)
    if leader_set(d).leaders != cls.leaders:
        raise ValueError(f"demand {tuple(d)} does not belong to class {cls.leaders}")
    uncovered = []
    for k in range(1, K + 1):
        for S in all_subsets(range(1, K + 1)):
            if k not in S:
                continue
            if not U.isdisjoint(S):
                continue  # delivered directly on layer min(S) <= k
            srcs = reconstruction_sources(S, d)
            late = [src for _, src in srcs if U.isdisjoint(src) or src[0] > k]
            terms = reduce(lambda a, b: a ^ b, (packet_terms(src, d) for _, src in srcs), frozenset())
            if late or terms != packet_terms(S, d):
                uncovered.append(f"user {k}: Q{list(S)}")
    return MassReport(layer, tuple(sums), tuple(closed), max(errs), bad, uncovered)
