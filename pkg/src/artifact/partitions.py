"""Set partitions, even partitions of left/right labels, Ursell coefficients
and the counting lemmas for permutation degrees."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations, product
from typing import Iterable, Iterator

import numpy as np

from .errors import BadSplit, BudgetExceeded, DivergentBound, NotEven
from .permgraph import Permutation, all_permutations

PARTITION_CAP = 10


@dataclass(frozen=True)
class Partition:
    k: int
    lumps: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        lumps = tuple(sorted(tuple(sorted(l)) for l in self.lumps))
        object.__setattr__(self, "lumps", lumps)
        flat = [x for l in lumps for x in l]
        if any(len(l) == 0 for l in lumps):
            raise ValueError("empty lump")
        if sorted(flat) != list(range(1, self.k + 1)):
            raise ValueError(f"lumps {lumps} do not partition 1..{self.k}")

    @property
    def support(self) -> frozenset[int]:
        """S(A): union of the nontrivial lumps."""
        return frozenset(x for l in self.lumps if len(l) >= 2 for x in l)

    @property
    def s(self) -> int:
        return len(self.support)

    def lump_of(self, i: int) -> tuple[int, ...]:
        for l in self.lumps:
            if i in l:
                return l
        raise KeyError(i)

    def is_trivial(self) -> bool:
        return all(len(l) == 1 for l in self.lumps)

    def __str__(self) -> str:
        return json.dumps([list(l) for l in self.lumps], separators=(",", ":"))

    @classmethod
    def parse(cls, text: str) -> "Partition":
        lumps = json.loads(text)
        k = sum(len(l) for l in lumps)
        return cls(k, tuple(tuple(l) for l in lumps))

    @classmethod
    def trivial(cls, k: int) -> "Partition":
        return cls(k, tuple((i,) for i in range(1, k + 1)))


@dataclass(frozen=True)
class EvenPartition:
    """Lumps of left labels I_k and right labels I~_k, stored as (left, right) pairs."""

    k: int
    lumps: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]

    def __post_init__(self):
        lumps = tuple(sorted((tuple(sorted(a)), tuple(sorted(b))) for a, b in self.lumps))
        object.__setattr__(self, "lumps", lumps)

    def check(self) -> None:
        left = [x for a, _ in self.lumps for x in a]
        right = [x for _, b in self.lumps for x in b]
        full = list(range(1, self.k + 1))
        if sorted(left) != full or sorted(right) != full:
            raise NotEven(f"lumps do not partition both label sets: {self.lumps}")
        for a, b in self.lumps:
            if len(a) != len(b) or len(a) == 0:
                raise NotEven(f"lump {a}|{b} is not balanced")

    def projection(self) -> Partition:
        return Partition(self.k, tuple(a for a, _ in self.lumps))

    def __str__(self) -> str:
        return json.dumps([[list(a), [f"~{x}" for x in b]] for a, b in self.lumps],
                          separators=(",", ":"))


def even_partition(A: Partition, sigma: Permutation) -> EvenPartition:
    """P(A, sigma): lumps A_mu united with sigma(A_mu)."""
    return EvenPartition(A.k, tuple((l, tuple(sigma(i) for i in l)) for l in A.lumps))


def is_compatible(sigma: Permutation, P: EvenPartition) -> bool:
    where = {}
    for idx, (a, b) in enumerate(P.lumps):
        for x in a:
            where[("L", x)] = idx
        for x in b:
            where[("R", x)] = idx
    return all(where[("L", i)] == where[("R", sigma(i))] for i in range(1, P.k + 1))


def bell_number(n: int) -> int:
    b = [1]
    for m in range(n):
        b.append(sum(math.comb(m, j) * b[j] for j in range(m + 1)))
    return b[n]


def enumerate_partitions(k: int, cap: int = PARTITION_CAP) -> Iterator[Partition]:
    """All set partitions of {1..k} via restricted growth strings."""
    if k > cap:
        raise BudgetExceeded(f"k={k} exceeds partition cap {cap}")
    if k == 0:
        yield Partition(0, ())
        return

    def rec(i: int, blocks: list[list[int]]):
        if i > k:
            yield Partition(k, tuple(tuple(b) for b in blocks))
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(1, [])


def enumerate_even_partitions(k: int, cap: int = PARTITION_CAP) -> list[EvenPartition]:
    """Every even partition of I_k and I~_k, generated as P(A, sigma)."""
    seen = set()
    out = []
    for A in enumerate_partitions(k, cap):
        for sigma in all_permutations(k):
            P = even_partition(A, sigma)
            if P not in seen:
                seen.add(P)
                out.append(P)
    return out


# Ursell coefficients

def _connected(adj: list[int], n: int) -> bool:
    full = (1 << n) - 1
    seen = 1
    frontier = 1
    while frontier:
        nxt = 0
        f = frontier
        while f:
            low = f & -f
            nxt |= adj[low.bit_length() - 1]
            f ^= low
        frontier = nxt & ~seen
        seen |= nxt
    return seen == full


URSELL_MAX_N = 7


@lru_cache(maxsize=None)
def ursell(n: int, mode: str = "lattice") -> int:
    """c(n) = sum over connected spanning subgraphs G of K_n of (-1)^|G|.

    ``mode="continuum"`` returns the other branch, c(1)=1 and c(n)=0 otherwise.
    Subsets of edges are visited in Gray-code order so each step toggles a
    single edge in the adjacency bitmasks.
    """
    if mode not in ("lattice", "continuum"):
        raise ValueError(f"unknown mode {mode!r}")
    if n < 1:
        raise ValueError("n must be positive")
    if mode == "continuum" or n == 1:
        return 1 if n == 1 else 0
    if n > URSELL_MAX_N:
        raise BudgetExceeded(f"brute force Ursell enumeration limited to n <= {URSELL_MAX_N}")
    edges = [(a, b) for a in range(n) for b in range(a + 1, n)]
    m = len(edges)
    adj = [0] * n
    total = 0
    nedges = 0
    for g in range(1, 1 << m):
        flip = (g & -g).bit_length() - 1
        a, b = edges[flip]
        adj[a] ^= 1 << b
        adj[b] ^= 1 << a
        if adj[a] >> b & 1:
            nedges += 1
        else:
            nedges -= 1
        if nedges >= n - 1 and _connected(adj, n):
            total += -1 if nedges & 1 else 1
    return total


def ursell_closed_form(n: int) -> int:
    return (-1) ** (n - 1) * math.factorial(n - 1)


# compatible permutations and the greedy flip

def compatible_count(P: EvenPartition) -> int:
    P.check()
    return math.prod(math.factorial(len(a)) for a, _ in P.lumps)


def compatible_permutations(P: EvenPartition) -> tuple[Iterator[Permutation], int]:
    P.check()
    count = compatible_count(P)

    def gen():
        lumps = P.lumps
        for choice in product(*(permutations(b) for _, b in lumps)):
            m = [0] * P.k
            for (a, _), b in zip(lumps, choice):
                for x, y in zip(a, b):
                    m[x - 1] = y
            yield Permutation(tuple(m))

    return gen(), count


def _ladder_set(sigma: Permutation) -> set[int]:
    s = sigma.ext()
    inv = sigma.ext_inverse()
    out = set()
    for i in range(1, sigma.k + 1):
        j = inv[i]
        left, right = s[j - 1], s[j + 1]
        if i > max(left, right):
            continue
        if i < min(left, right):
            continue
        if i - 1 in (left, right):
            out.add(i)
    return out


def internal_ladders_fast(sigma: Permutation) -> set[int]:
    inv = sigma.ext_inverse()
    return {i for i in _ladder_set(sigma)
            if abs(inv[i - 1] - inv[i]) == 1 and abs(inv[i + 1] - inv[i]) == 1}


def fast_degree(sigma: Permutation) -> int:
    return sigma.k - len(_ladder_set(sigma))


@dataclass
class FlipResult:
    sigma: Permutation
    flips: int
    start: Permutation
    trace: list[int] = field(default_factory=list)  # |I*_l ∩ sigma(S(A))| after each step


def greedy_flip(P: EvenPartition, max_iter: int | None = None) -> FlipResult:
    """Compatible permutation whose internal ladder indices avoid sigma(S(A)).

    Starts from the lexicographically smallest compatible permutation and
    repeatedly swaps the image of the smallest offending index with that of
    the smallest other element of its lump.
    """
    P.check()
    k = P.k
    m = [0] * k
    for a, b in P.lumps:
        for x, y in zip(a, b):
            m[x - 1] = y
    start = Permutation(tuple(m))
    A = P.projection()
    support = A.support
    if max_iter is None:
        max_iter = k * k + 1

    def offending(sig: list[int]) -> list[int]:
        perm = Permutation(tuple(sig))
        image = {sig[x - 1] for x in support}
        return sorted(internal_ladders_fast(perm) & image)

    trace = [len(offending(m))]
    flips = 0
    while True:
        bad = offending(m)
        if not bad:
            break
        if flips >= max_iter:
            raise RuntimeError(f"greedy flip did not terminate for {P}")
        i = bad[0]
        ip = m.index(i) + 1
        lump = A.lump_of(ip)
        jp = min(x for x in lump if x != ip)
        m[ip - 1], m[jp - 1] = m[jp - 1], m[ip - 1]
        flips += 1
        trace.append(len(offending(m)))
    return FlipResult(Permutation(tuple(m)), flips, start, trace)


def joint_degree(A: Partition, sigma: Permutation) -> float:
    if A.k != sigma.k:
        raise ValueError("partition and permutation sizes differ")
    d = fast_degree(sigma)
    half = A.s / 2
    return d if d >= half else half


# Operation I

@dataclass
class AuxMomentaLedger:
    u: dict[tuple[int, ...], np.ndarray]
    radius_checks: list[tuple[float, float, bool]] = field(default_factory=list)

    def total(self) -> np.ndarray:
        vals = list(self.u.values())
        return np.sum(vals, axis=0) if vals else np.zeros(0)

    def copy(self) -> "AuxMomentaLedger":
        return AuxMomentaLedger({key: v.copy() for key, v in self.u.items()},
                                list(self.radius_checks))


def zero_ledger(A: Partition, d: int = 3) -> AuxMomentaLedger:
    return AuxMomentaLedger({l: np.zeros(d) for l in A.lumps})


def break_lump(A: Partition, lump: int | Iterable[int], split, r, ledger: AuxMomentaLedger,
               radius_bound: float | None = None) -> tuple[Partition, AuxMomentaLedger]:
    """Split one lump in two; the new auxiliary momenta are u - r and r."""
    if isinstance(lump, int):
        target = A.lumps[lump]
    else:
        target = tuple(sorted(lump))
        if target not in A.lumps:
            raise BadSplit(f"{target} is not a lump of {A}")
    first, second = (tuple(sorted(x)) for x in split)
    if not first or not second:
        raise BadSplit("split parts must be nonempty")
    if set(first) & set(second):
        raise BadSplit("split parts overlap")
    if sorted(first + second) != list(target):
        raise BadSplit(f"split {first}|{second} does not cover lump {target}")
    r = np.asarray(r, dtype=float)
    new_lumps = [l for l in A.lumps if l != target] + [first, second]
    out = ledger.copy()
    u = out.u.pop(target)
    out.u[first] = u - r
    out.u[second] = r.copy()
    if radius_bound is not None:
        norm = float(np.linalg.norm(r))
        out.radius_checks.append((norm, radius_bound, norm <= radius_bound))
    return Partition(A.k, tuple(new_lumps)), out


def break_all(A: Partition, ledger: AuxMomentaLedger, rs: Iterable | None = None,
              radius_bound: float | None = None) -> tuple[Partition, AuxMomentaLedger, int]:
    """Peel single elements off nontrivial lumps until all are singletons."""
    rs = iter(rs) if rs is not None else None
    steps = 0
    while not A.is_trivial():
        target = next(l for l in A.lumps if len(l) > 1)
        d = next(iter(ledger.u.values())).shape[0]
        r = next(rs) if rs is not None else np.zeros(d)
        A, ledger = break_lump(A, target, ((target[0],), target[1:]), r, ledger, radius_bound)
        steps += 1
    return A, ledger, steps


# counting lemmas

def count_by_ladder(k: int, cap: int = 7) -> dict[int, tuple[int, float]]:
    """{l: (#{sigma : l(sigma) = l}, 2(2k)^(k-l))} over the whole of S_k."""
    if k > cap:
        raise BudgetExceeded(f"exhaustive count limited to k <= {cap}")
    counts = Counter(len(_ladder_set(s)) for s in all_permutations(k))
    return {ell: (counts.get(ell, 0), 2.0 * (2 * k) ** (k - ell)) for ell in range(k, -1, -1)}


def degree_counts(k: int, cap: int = 7) -> dict[int, int]:
    if k > cap:
        raise BudgetExceeded(f"exhaustive count limited to k <= {cap}")
    return dict(Counter(fast_degree(s) for s in all_permutations(k)))


@dataclass
class DegreeSum:
    value: float
    bound: float
    holds: bool


def degree_sum(k: int, gamma: float, lam: float, D: int, cap: int = 7) -> DegreeSum:
    """Exact sum of lambda^(gamma deg) over deg >= D with its geometric bound."""
    ratio = 2 * k * lam**gamma
    if ratio >= 1:
        raise DivergentBound(f"2k lambda^gamma = {ratio:.3g} >= 1")
    counts = degree_counts(k, cap)
    value = sum(c * lam ** (gamma * m) for m, c in counts.items() if m >= D)
    bound = 2 * sum(ratio**m for m in range(D, k + 1))
    return DegreeSum(value, bound, value <= bound)
