"""Permutation graphs: tower matrices, index classification and pivots.

Indices are 1-based throughout so that the printed sets read the same way
they are usually written down.  A permutation of {1..k} is extended by
sigma~(0) = 0 and sigma~(k+1) = k+1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import AuxiliarySumNonzero, BudgetExceeded


@dataclass(frozen=True)
class Permutation:
    map: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "map", tuple(int(x) for x in self.map))
        if sorted(self.map) != list(range(1, len(self.map) + 1)):
            raise ValueError(f"not a permutation of 1..{len(self.map)}: {self.map}")

    @property
    def k(self) -> int:
        return len(self.map)

    @classmethod
    def parse(cls, text: str) -> "Permutation":
        text = text.strip().strip("()[]")
        parts = text.replace(",", " ").split()
        return cls(tuple(int(p) for p in parts))

    @classmethod
    def identity(cls, k: int) -> "Permutation":
        return cls(tuple(range(1, k + 1)))

    def __str__(self) -> str:
        return " ".join(str(x) for x in self.map)

    def __call__(self, j: int) -> int:
        return self.map[j - 1]

    def inverse(self) -> "Permutation":
        inv = [0] * self.k
        for j, s in enumerate(self.map, start=1):
            inv[s - 1] = j
        return Permutation(tuple(inv))

    def ext(self) -> tuple[int, ...]:
        """sigma~ as a tuple indexed 0..k+1."""
        return (0,) + self.map + (self.k + 1,)

    def ext_inverse(self) -> tuple[int, ...]:
        return self.inverse().ext()

    def is_identity(self) -> bool:
        return all(s == j for j, s in enumerate(self.map, start=1))


def all_permutations(k: int) -> Iterator[Permutation]:
    for p in itertools.permutations(range(1, k + 1)):
        yield Permutation(p)


@dataclass(frozen=True)
class TowerMatrix:
    sigma: Permutation
    entries: np.ndarray
    tops: tuple[int, ...]  # t(j) for j = 1..k+1, stored at position j-1
    bottoms: tuple[int, ...]
    signs: tuple[int, ...]

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def top(self, j: int) -> int:
        return self.tops[j - 1]

    def bottom(self, j: int) -> int:
        return self.bottoms[j - 1]

    def row(self, i: int) -> np.ndarray:
        return self.entries[i - 1].copy()


def tower_matrix(sigma: Permutation) -> TowerMatrix:
    k = sigma.k
    s = sigma.ext()
    n = k + 1
    m = np.zeros((n, n), dtype=np.int64)
    tops, bottoms, signs = [], [], []
    for j in range(1, n + 1):
        a, b = s[j - 1], s[j]
        sign = 1 if a < b else -1
        lo, hi = min(a, b), max(a, b)
        m[lo:hi, j - 1] = sign  # rows lo+1..hi in 1-based terms
        tops.append(lo + 1)
        bottoms.append(hi)
        signs.append(sign)
    return TowerMatrix(sigma, m, tuple(tops), tuple(bottoms), tuple(signs))


def is_tower_matrix(m: np.ndarray) -> bool:
    for col in np.asarray(m).T:
        nz = np.flatnonzero(col)
        if len(nz) == 0:
            continue
        if nz[-1] - nz[0] + 1 != len(nz):
            return False
        if len(set(col[nz].tolist())) != 1:
            return False
    return True


@dataclass(frozen=True)
class IndexClassification:
    k: int
    peaks: frozenset[int]
    valleys: frozenset[int]
    ladders: frozenset[int]
    slopes: frozenset[int]
    last: frozenset[int]
    ladder_tops: frozenset[int]
    ladder_bottoms: frozenset[int]
    pivots: dict[int, int] = field(default_factory=dict)
    valley_alt: dict[int, int] = field(default_factory=dict)
    covered: frozenset[int] = frozenset()
    uncovered: frozenset[int] = frozenset()

    @property
    def degree(self) -> int:
        return self.k - len(self.ladders)

    def class_of(self, i: int) -> str:
        for name in ("peaks", "valleys", "ladders", "slopes", "last"):
            if i in getattr(self, name):
                return name[:-1] if name != "last" else "last"
        raise KeyError(i)

    def to_json(self) -> dict:
        def srt(x):
            return sorted(x)

        return {
            "peaks": srt(self.peaks),
            "valleys": srt(self.valleys),
            "ladders": srt(self.ladders),
            "slopes": srt(self.slopes),
            "degree": self.degree,
            "last": srt(self.last),
            "ladderTops": srt(self.ladder_tops),
            "ladderBottoms": srt(self.ladder_bottoms),
            "covered": srt(self.covered),
            "uncovered": srt(self.uncovered),
            "pivots": {str(i): c for i, c in sorted(self.pivots.items())},
            "valleyAlt": {str(i): c for i, c in sorted(self.valley_alt.items())},
        }


def _ladder_runs(ladders: frozenset[int]) -> list[list[int]]:
    runs: list[list[int]] = []
    for i in sorted(ladders):
        if runs and runs[-1][-1] == i - 1:
            runs[-1].append(i)
        else:
            runs.append([i])
    return runs


def classify(sigma: Permutation) -> IndexClassification:
    """Peak/valley/ladder/slope classification including pivots and coverage."""
    k = sigma.k
    s = sigma.ext()
    inv = sigma.inverse()
    sinv = inv.ext()
    peaks, valleys, ladders, slopes = set(), set(), set(), set()
    for i in range(1, k + 1):
        j = inv(i)
        left, right = s[j - 1], s[j + 1]
        if i < min(left, right):
            peaks.add(i)
        elif i > max(left, right):
            valleys.add(i)
        elif i - 1 in (left, right):
            ladders.add(i)
        else:
            slopes.add(i)

    tops, bottoms = set(), set()
    for run in _ladder_runs(frozenset(ladders)):
        top = run[0] - 1
        end = run[-1]
        tops.add(top)
        if abs(sinv[end + 1] - sinv[end]) != 1:
            bottoms.add(end)
        else:
            bottoms.add(end + 1)

    base = IndexClassification(
        k=k,
        peaks=frozenset(peaks),
        valleys=frozenset(valleys),
        ladders=frozenset(ladders),
        slopes=frozenset(slopes),
        last=frozenset({k + 1}),
        ladder_tops=frozenset(tops),
        ladder_bottoms=frozenset(bottoms),
    )
    return pivot_table(sigma, base)


def pivot_table(sigma: Permutation, cls: IndexClassification | None = None) -> IndexClassification:
    """Fill in c(i), c~(i) and the covered/uncovered split of the slopes."""
    if cls is None:
        return classify(sigma)
    tm = tower_matrix(sigma)
    k = sigma.k
    by_bottom: dict[int, list[int]] = {}
    for j in range(1, k + 2):
        by_bottom.setdefault(tm.bottom(j), []).append(j)

    pivots: dict[int, int] = {}
    alt: dict[int, int] = {}
    for i in sorted(cls.ladders | cls.slopes | cls.last):
        cols = by_bottom.get(i, [])
        assert len(cols) == 1, (sigma, i, cols)
        pivots[i] = cols[0]
    for i in sorted(cls.valleys):
        cols = by_bottom[i]
        assert len(cols) == 2, (sigma, i, cols)
        a, b = cols
        assert tm.top(a) != tm.top(b)
        if tm.top(a) < tm.top(b):
            pivots[i], alt[i] = a, b
        else:
            pivots[i], alt[i] = b, a
    for i in cls.peaks:
        assert i not in by_bottom

    h = sorted(cls.valleys | cls.slopes)
    covered, uncovered = set(), set()
    for mu, hm in enumerate(h):
        if hm not in cls.slopes:
            continue
        if mu + 1 < len(h) and tm.top(pivots[h[mu + 1]]) <= hm:
            covered.add(hm)
        else:
            uncovered.add(hm)

    return IndexClassification(
        k=cls.k,
        peaks=cls.peaks,
        valleys=cls.valleys,
        ladders=cls.ladders,
        slopes=cls.slopes,
        last=cls.last,
        ladder_tops=cls.ladder_tops,
        ladder_bottoms=cls.ladder_bottoms,
        pivots=pivots,
        valley_alt=alt,
        covered=frozenset(covered),
        uncovered=frozenset(uncovered),
    )


def degree(sigma: Permutation) -> int:
    return classify(sigma).degree


def internal_ladder_indices(sigma: Permutation) -> frozenset[int]:
    cls = classify(sigma)
    sinv = sigma.ext_inverse()
    out = set()
    for i in cls.ladders:
        if abs(sinv[i - 1] - sinv[i]) == 1 and abs(sinv[i + 1] - sinv[i]) == 1:
            out.add(i)
    return frozenset(out)


def v_vector(xi: np.ndarray, u: np.ndarray) -> np.ndarray:
    """v_l = xi + u_1 + ... + u_{l-1}, l = 1..k+1."""
    xi = np.asarray(xi, dtype=float)
    u = np.asarray(u, dtype=float).reshape(-1, xi.shape[-1])
    csum = np.vstack([np.zeros_like(xi)[None, :], np.cumsum(u, axis=0)])
    return xi[None, :] + csum


def resolve_tilde(sigma: Permutation, p: np.ndarray, u: np.ndarray, xi: np.ndarray,
                  atol: float = 1e-12) -> np.ndarray:
    """Tilde momenta p~ = M p - M v solving every delta constraint."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.size and np.max(np.abs(u.sum(axis=0))) > atol * max(1.0, np.max(np.abs(u))):
        raise AuxiliarySumNonzero(f"sum of auxiliary momenta is {u.sum(axis=0)}")
    m = tower_matrix(sigma).entries.astype(float)
    return m @ p - m @ v_vector(xi, u)


def delta_residuals(sigma: Permutation, p, pt, u, xi) -> np.ndarray:
    """Residuals of the k+1 constraints; all zero for a consistent assignment."""
    k = sigma.k
    p, pt, u, xi = (np.asarray(a, dtype=float) for a in (p, pt, u, xi))
    res = [pt[k] - p[k] + xi]
    for ell in range(1, k + 1):
        s = sigma(ell)
        res.append(p[ell] - p[ell - 1] - (pt[s] - pt[s - 1]) - u[ell - 1])
    return np.array(res)


@dataclass
class UnimodularityReport:
    unimodular: bool
    inverse_ok: bool
    checked: int
    sampled: bool
    worst: int

    def to_json(self) -> dict:
        return {"unimodular": self.unimodular, "inverseOk": self.inverse_ok,
                "checked": self.checked, "sampled": self.sampled, "worst": self.worst}


def _batched_dets(m: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    sub = m[rows[:, :, None], cols[:, None, :]]
    return np.rint(np.linalg.det(sub)).astype(np.int64)


def unimodularity_check(m: TowerMatrix | np.ndarray, max_order: int | None = None, *,
                        cap: int = 10**7, n_samples: int = 10**5, sample: bool = True,
                        seed: int = 0, chunk: int = 200_000) -> UnimodularityReport:
    """Check that every square subdeterminant up to ``max_order`` is 0 or +-1.

    Above ``cap`` subdeterminants a uniform random sample of ``n_samples``
    submatrices is checked instead, unless ``sample`` is False, in which case
    BudgetExceeded is raised.
    """
    mat = m.entries if isinstance(m, TowerMatrix) else np.asarray(m)
    mat = mat.astype(float)
    n = mat.shape[0]
    if mat.shape[1] != n:
        raise ValueError("square matrix expected")
    max_order = n if max_order is None else max_order
    if max_order > n:
        raise ValueError("max_order exceeds matrix size")
    total = sum(math.comb(n, r) ** 2 for r in range(1, max_order + 1))

    worst = 0
    checked = 0
    sampled = total > cap
    if sampled:
        if not sample:
            raise BudgetExceeded(f"{total} subdeterminants exceed cap {cap}")
        rng = np.random.default_rng(seed)
        weights = np.array([math.comb(n, r) ** 2 for r in range(1, max_order + 1)], dtype=float)
        orders = rng.choice(np.arange(1, max_order + 1), size=n_samples, p=weights / weights.sum())
        for r in np.unique(orders):
            cnt = int(np.sum(orders == r))
            rows = np.sort(rng.random((cnt, n)).argsort(axis=1)[:, :r], axis=1)
            cols = np.sort(rng.random((cnt, n)).argsort(axis=1)[:, :r], axis=1)
            d = _batched_dets(mat, rows, cols)
            worst = max(worst, int(np.max(np.abs(d))))
            checked += cnt
    else:
        for r in range(1, max_order + 1):
            combos = np.array(list(itertools.combinations(range(n), r)), dtype=np.int64)
            ri, ci = np.meshgrid(np.arange(len(combos)), np.arange(len(combos)), indexing="ij")
            ri, ci = ri.ravel(), ci.ravel()
            for start in range(0, len(ri), chunk):
                d = _batched_dets(mat, combos[ri[start:start + chunk]], combos[ci[start:start + chunk]])
                worst = max(worst, int(np.max(np.abs(d))))
            checked += len(ri)

    inverse_ok = True
    if isinstance(m, TowerMatrix):
        minv = tower_matrix(m.sigma.inverse()).entries
        inverse_ok = bool(np.array_equal(m.entries @ minv, np.eye(n, dtype=np.int64)))
    return UnimodularityReport(worst <= 1, inverse_ok, checked, sampled, worst)


def parse_perm(text: str | Sequence[int]) -> Permutation:
    if isinstance(text, str):
        return Permutation.parse(text)
    return Permutation(tuple(text))
