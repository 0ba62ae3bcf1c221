"""Time-simplex identity, ladder values, the row-elimination schedule and
the lambda-power ledger for a pairing permutation.

The time-simplex integral of free phases

    D(w_1..w_{k+1}; t) = int_{s_j >= 0, sum s_j = t} prod_j exp(-i s_j w_j) ds

equals i^k f[w_1..w_{k+1}] for f(z) = exp(-i t z) (Hermite-Genocchi).  The
contour integral (i e^{eta t} / 2 pi) int exp(-i a t) prod_j (a - w_j + i eta)^{-1} da
closes in the lower half plane and equals f[w] itself, so the two sides agree
after multiplying the contour side by i^k; their moduli agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.linalg import expm

from .errors import BudgetExceeded, DegenerateFrequencies, KappaTooLarge, QuadratureFailure
from .permgraph import IndexClassification, Permutation, classify, tower_matrix
from .profiles import RadialProfile, gaussian_potential, gaussian_state
from .selfenergy import PropagatorParams, SelfEnergyTable, get_table, omega, shell_average_gl

GAP_TOL = 1e-6


# divided differences of exp(-i t z)

def _min_gap(w: np.ndarray) -> float:
    if w.size < 2:
        return math.inf
    return float(np.min(np.abs(w[:, None] - w[None, :])[~np.eye(w.size, dtype=bool)]))


def divided_difference_confluent(omegas: Sequence[complex], t: float) -> complex:
    """f[w_1..w_n] for f(z) = exp(-i t z) from the exponential of a bidiagonal matrix.

    The [0, n-1] entry of f(Z), Z = diag(w) + superdiagonal ones, is the
    divided difference (Opitz); valid for coincident points.
    """
    w = np.asarray(omegas, dtype=complex)
    n = w.size
    z = np.diag(w) + np.diag(np.ones(n - 1), 1)
    return complex(expm(-1j * t * z)[0, n - 1])


def divided_difference(omegas: Sequence[complex], t: float, *, gap_tol: float = GAP_TOL,
                       on_degenerate: str = "switch") -> complex:
    """f[w_1..w_n] for f(z) = exp(-i t z).

    Distinct points use the closed sum over f(w_j) / prod_{l != j}(w_j - w_l).
    If two points are closer than ``gap_tol`` the confluent formula is used,
    or DegenerateFrequencies is raised when ``on_degenerate="raise"``.
    """
    w = np.asarray(omegas, dtype=complex)
    if w.size == 0:
        raise ValueError("need at least one frequency")
    if _min_gap(w) < gap_tol:
        if on_degenerate == "raise":
            raise DegenerateFrequencies(f"frequency gap {_min_gap(w):.2e} below {gap_tol:.1e}")
        return divided_difference_confluent(w, t)
    diff = w[:, None] - w[None, :]
    np.fill_diagonal(diff, 1.0)
    return complex(np.sum(np.exp(-1j * t * w) / np.prod(diff, axis=1)))


def simplex_integral(omegas: Sequence[complex], t: float) -> complex:
    """D(w; t) from the divided difference: i^k f[w]."""
    w = np.asarray(omegas, dtype=complex)
    return (1j) ** (w.size - 1) * divided_difference(w, t)


def simplex_integral_nested(omegas: Sequence[complex], t: float, n: int = 48) -> complex:
    """D(w; t) by nested one-dimensional Gauss-Legendre quadrature.

    D_m(t) = int_0^t exp(-i s w_m) D_{m-1}(t - s) ds with D_1(t) = exp(-i t w_1).
    The integrand is entire, so a fixed high-order rule is exact to rounding
    for moderate |w| t.
    """
    w = list(np.asarray(omegas, dtype=complex))
    x, wt = np.polynomial.legendre.leggauss(n)

    def rec(m: int, tt: float) -> complex:
        if m == 1:
            return complex(np.exp(-1j * tt * w[0]))
        if tt == 0:
            return 0j
        s = 0.5 * tt * (x + 1)
        inner = np.array([rec(m - 1, tt - si) for si in s])
        return complex(0.5 * tt * np.sum(wt * np.exp(-1j * s * w[m - 1]) * inner))

    return rec(len(w), float(t))


# contour side of the identity

def _fourier_tail(g: Callable[[float], complex], a: float, t: float, sign: int) -> complex:
    """int_a^inf exp(sign * i x t) g(x) dx with QAWF on the real and imaginary parts."""
    def part(fun, weight):
        val, err = integrate.quad(fun, a, np.inf, weight=weight, wvar=t, limlst=200)
        return val

    gr = lambda x: g(x).real  # noqa: E731
    gi = lambda x: g(x).imag  # noqa: E731
    c_r, c_i = part(gr, "cos"), part(gi, "cos")
    s_r, s_i = part(gr, "sin"), part(gi, "sin")
    # exp(i s x t) = cos + i s sin
    return complex(c_r - sign * s_i, c_i + sign * s_r)


def contour_side(omegas: Sequence[complex], t: float, eta: float, *, epsrel: float = 1e-12,
                 span: float = 12.0) -> tuple[complex, float]:
    """(i e^{eta t} / 2 pi) int_R exp(-i a t) prod_j (a - w_j + i eta)^{-1} da.

    The window [-A, A] around the resonances is integrated adaptively with
    breakpoints at Re w_j; both tails are oscillatory Fourier integrals
    handled by QAWF, so no finite cutoff is introduced.
    Returns (value, error estimate of the window part).
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    w = np.asarray(omegas, dtype=complex)
    if np.any(w.imag > 1e-14):
        raise ValueError("frequencies must satisfy Im w <= 0")

    def g(a: float) -> complex:
        return complex(1.0 / np.prod(a - w + 1j * eta))

    A = float(np.max(np.abs(w.real))) + span
    pts = sorted({float(x) for x in w.real})
    kw = dict(points=pts, limit=4000, epsabs=1e-15, epsrel=epsrel, full_output=1)
    vr = integrate.quad(lambda a: (np.exp(-1j * a * t) * g(a)).real, -A, A, **kw)
    vi = integrate.quad(lambda a: (np.exp(-1j * a * t) * g(a)).imag, -A, A, **kw)
    window = complex(vr[0], vi[0])
    err = float(abs(vr[1]) + abs(vi[1]))
    if not np.isfinite(window.real + window.imag):
        raise QuadratureFailure("contour window integral is not finite")
    right = _fourier_tail(g, A, t, -1)
    left = _fourier_tail(lambda x: g(-x), A, t, +1)
    total = window + right + left
    pref = 1j * math.exp(eta * t) / (2 * math.pi)
    return pref * total, abs(pref) * err


@dataclass
class KIdentityResult:
    lhs: complex
    rhs: complex  # i^k times the contour integral
    residual: float
    confluent: bool
    unphased_residual: float  # |lhs - contour integral| without the i^k phase

    def to_json(self) -> dict:
        return {"lhsRe": self.lhs.real, "lhsIm": self.lhs.imag, "rhsRe": self.rhs.real,
                "rhsIm": self.rhs.imag, "residual": self.residual, "confluent": self.confluent,
                "unphasedResidual": self.unphased_residual}


def k_identity_check(omegas: Sequence[complex], t: float, eta: float, *,
                     gap_tol: float = GAP_TOL, on_degenerate: str = "switch") -> KIdentityResult:
    """Compare the divided-difference value of the simplex integral with i^k times the contour integral."""
    w = np.asarray(omegas, dtype=complex)
    confluent = _min_gap(w) < gap_tol
    phase = (1j) ** (w.size - 1)
    lhs = phase * divided_difference(w, t, gap_tol=gap_tol, on_degenerate=on_degenerate)
    contour, _ = contour_side(w, t, eta)
    rhs = phase * contour
    return KIdentityResult(lhs, rhs, abs(lhs - rhs), confluent, abs(lhs - contour))


def random_frequencies(rng: np.random.Generator, k: int, re: float = 2.0,
                       im: float = 0.5) -> np.ndarray:
    """k+1 complex energies with Re in [-re, re] and Im in [-im, 0]."""
    return rng.uniform(-re, re, k + 1) - 1j * rng.uniform(0, im, k + 1)


# ladder values with radial profiles in d = 3

def _dd1(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """f[a, b] for exp(-i t z), stable as a -> b."""
    z = -1j * t * (a - b)
    small = np.abs(z) < 1e-12
    phi = np.where(small, 1 + 0.5 * z, np.expm1(z) / np.where(small, 1, z))
    return -1j * t * np.exp(-1j * t * b) * phi


def _dd2_rows(o1: np.ndarray, o2: complex, o3: np.ndarray, F12: np.ndarray, F23: np.ndarray,
              F13: np.ndarray, t: float) -> np.ndarray:
    """f[o1_i, o2, o3_j] as a matrix from precomputed first differences.

    Of the three equivalent quotients the one with the widest denominator is
    kept; when all three points coincide to t*gap < 1e-3 the centroid Taylor
    value f''(m)/2 is used.
    """
    d13 = o1[:, None] - o3[None, :]
    d12 = np.broadcast_to((o1 - o2)[:, None], d13.shape)
    d32 = np.broadcast_to((o3 - o2)[None, :], d13.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        q13 = (F12[:, None] - F23[None, :]) / d13
        q12 = (F13 - F23[None, :]) / d12
        q32 = (F13 - F12[:, None]) / d32
    a13, a12, a32 = np.abs(d13), np.abs(d12), np.abs(d32)
    out = np.where(a13 >= np.maximum(a12, a32), q13, np.where(a12 >= a32, q12, q32))
    near = np.maximum(a13, np.maximum(a12, a32)) * t < 1e-3
    if np.any(near):
        m = (o1[:, None] + o2 + o3[None, :]) / 3
        out = np.where(near, -0.5 * t * t * np.exp(-1j * t * m), out)
    return out


def _support_radius(fun: Callable, tol: float = 1e-10, r_hi: float = 50.0) -> float:
    """Radius beyond which fun(r) < tol * max fun, scanned on a fine grid."""
    r = np.linspace(0, r_hi, 50001)
    v = np.abs(fun(r))
    keep = np.nonzero(v >= tol * v.max())[0]
    return float(r[keep[-1]]) + 0.05


def _radial_nodes(r_lo: float, r_hi: float, t: float, h_max: float = 0.1,
                  order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes; panels shrink where exp(-i t r^2/2) oscillates fast."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = [r_lo]
    while edges[-1] < r_hi:
        r = edges[-1]
        h = min(h_max, 1.5 / (t * max(r, 0.5))) if t > 0 else h_max
        edges.append(min(r + h, r_hi))
    e = np.asarray(edges)
    a, b = e[:-1, None], e[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


def collision_kernel_angular(r: np.ndarray, q: float, potential: RadialProfile) -> np.ndarray:
    """int_{S^2} |B^(r phi - q e)|^2 dphi, closed form for the Gaussian preset."""
    r = np.asarray(r, dtype=float)
    if potential.name == "gaussian":
        w2 = potential.params[0] ** 2
        rq = r * q
        with np.errstate(divide="ignore", invalid="ignore"):
            val = math.pi * w2 / rq * (np.exp(-(r - q) ** 2 / w2) - np.exp(-(r + q) ** 2 / w2))
        return np.where(rq < 1e-12, 4 * math.pi * np.exp(-(r * r + q * q) / w2), val)
    return shell_average_gl(potential.sq, r, q, 3)


LADDER_NODE_BUDGET = 2 * 10**8


@dataclass
class LadderValue:
    t: float
    k: int
    value: complex
    err: float
    nodes: int

    def to_row(self) -> dict:
        return {"t": self.t, "k": self.k, "re": self.value.real, "im": self.value.imag,
                "err": self.err}


def _ladder_once(t: float, k: int, params: PropagatorParams, state: RadialProfile,
                 potential: RadialProfile, table: SelfEnergyTable, h_max: float,
                 order: int, budget: int) -> tuple[complex, int]:
    lam = params.lam
    r1_max = _support_radius(lambda r: r * r * state.sq(r))
    reach = _support_radius(potential.sq)
    r1, w1 = _radial_nodes(0.0, r1_max, t, h_max, order)
    psi2 = w1 * r1**2 * state.sq(r1)

    def om(r):
        return omega(r, params, table)

    o1 = om(r1)
    if k == 0:
        return complex(4 * math.pi * np.sum(psi2 * np.exp(2 * t * o1.imag))), r1.size

    r2, w2 = _radial_nodes(0.0, r1_max + reach, t, h_max, order)
    o2 = om(r2)
    if k == 1:
        K12 = np.stack([collision_kernel_angular(r1, q, potential) for q in r2], axis=1)
        dd = _dd1(o1[:, None], o2[None, :], t)
        integrand = psi2[:, None] * K12 * (w2 * r2**2)[None, :] * np.abs(dd) ** 2
        return complex(lam**2 * 4 * math.pi * np.sum(integrand)), r1.size * r2.size

    r3, w3 = _radial_nodes(0.0, r1_max + 2 * reach, t, h_max, order)
    o3 = om(r3)
    F13 = _dd1(o1[:, None], o3[None, :], t)
    F12 = _dd1(o1[None, :], o2[:, None], t)
    F23 = _dd1(o3[None, :], o2[:, None], t)
    win1 = [np.nonzero(np.abs(r1 - q) <= reach)[0] for q in r2]
    win3 = [np.nonzero(np.abs(r3 - q) <= reach)[0] for q in r2]
    n = sum(a.size * b.size for a, b in zip(win1, win3))
    if n > budget:
        raise BudgetExceeded(f"k = 2 ladder at t = {t} needs {n:.3g} nodes (budget {budget:.3g})")
    total = 0.0
    for j, q in enumerate(r2):
        i1, i3 = win1[j], win3[j]
        if i1.size == 0:
            continue
        left = psi2[i1] * collision_kernel_angular(r1[i1], q, potential)
        right = w3[i3] * r3[i3] ** 2 * collision_kernel_angular(r3[i3], q, potential)
        dd = _dd2_rows(o1[i1], o2[j], o3[i3], F12[j, i1], F23[j, i3], F13[np.ix_(i1, i3)], t)
        total += w2[j] * q * q * float(left @ (np.abs(dd) ** 2) @ right)
    return complex(lam**4 * 4 * math.pi * total), n


def ladder_value(t: float, k: int, params: PropagatorParams, *,
                 state: RadialProfile | None = None, potential: RadialProfile | None = None,
                 table: SelfEnergyTable | None = None, h_max: float = 0.1,
                 order: int = 8, budget: int = LADDER_NODE_BUDGET) -> LadderValue:
    """V(t, k) for the ladder graph of order k in d = 3.

    By the time-simplex identity the double contour integral collapses to
    |D(w(p_1)..w(p_{k+1}); t)|^2, so

        V = lambda^{2k} int |psi_0(p_1)|^2 prod |B^(p_{j+1} - p_j)|^2 |f[w]|^2 dp,

    which is independent of eta.  Angular integrals are done around p_2 with
    the shell kernel, leaving a k+1 dimensional radial integral.  The error
    estimate compares against panels half as wide (k <= 1) or a rule two
    orders lower (k = 2).
    """
    if k >= 3:
        raise BudgetExceeded("ladder_value is limited to k <= 2")
    if k < 0 or t < 0:
        raise ValueError("need k >= 0 and t >= 0")
    state = state or gaussian_state(3)
    potential = potential or gaussian_potential()
    table = table or get_table(potential, 3)
    args = (t, k, params, state, potential, table)
    if k == 2:
        val, n = _ladder_once(*args, h_max, order, budget)
        alt, _ = _ladder_once(*args, h_max, order - 2, budget)
    else:
        alt, _ = _ladder_once(*args, h_max, order, budget)
        val, n = _ladder_once(*args, h_max / 2, order, budget)
    if not np.isfinite(val.real):
        raise QuadratureFailure("ladder value is not finite")
    return LadderValue(t, k, val, abs(val - alt), n)


def one_collision_weight(t: float, params: PropagatorParams, *,
                         state: RadialProfile | None = None,
                         potential: RadialProfile | None = None,
                         table: SelfEnergyTable | None = None) -> float:
    """Probability of exactly one jump by time t for the momentum jump process.

    The jump rate on the shell e(p) is lambda^2 sigma_0 = -2 lambda^2 Im theta,
    and jumps preserve energy, so the count is Poisson along each path.
    """
    state = state or gaussian_state(3)
    potential = potential or gaussian_potential()
    table = table or get_table(potential, 3)
    r_max = _support_radius(lambda r: r * r * state.sq(r))
    r, w = _radial_nodes(0.0, r_max, 0.0, 0.05, 16)
    rate = -2 * params.lam**2 * table(0.5 * r * r).imag
    mu = rate * t
    return float(4 * math.pi * np.sum(w * r * r * state.sq(r) * mu * np.exp(-mu)))


# k = 0 Wigner pairing

@dataclass(frozen=True)
class Observable:
    """O^(xi, v) = g(|xi|) h(|v|); ``v_support`` bounds the v-quadrature."""

    g: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    xi_max: float = 8.0
    v_support: tuple[float, float] | None = None


def _wigner_hat_conj(state: RadialProfile, v: np.ndarray, xi: np.ndarray, c: np.ndarray,
                     eps: float) -> np.ndarray:
    """conj(W^_0)(eps xi, v) = psi(v - eps xi/2) conj(psi(v + eps xi/2)) for radial psi."""
    base = v * v + 0.25 * (eps * xi) ** 2
    cross = eps * v * xi * c
    minus = np.sqrt(np.clip(base - cross, 0, None))
    plus = np.sqrt(np.clip(base + cross, 0, None))
    return state(minus) * np.conj(state(plus))


@dataclass
class FreeTermValue:
    t: float
    value: complex
    pairing: complex
    abs_bound: float


def free_term_W(t: float, obs: Observable, params: PropagatorParams, *, eps: float | None = None,
                state: RadialProfile | None = None, potential: RadialProfile | None = None,
                table: SelfEnergyTable | None = None, n_xi: int = 96, n_v: int = 16,
                n_c: int = 64) -> FreeTermValue:
    """int dxi dv exp(i t eps v.xi) exp(2 t Im w(v)) O^(xi, v) conj(W^_0)(eps xi, v) in d = 3.

    ``eps`` defaults to lambda^(2 + kappa/2).  Also returns the t = 0 pairing and
    the bound int |O^| |W^_0| on the same grid.
    """
    state = state or gaussian_state(3)
    potential = potential or gaussian_potential()
    table = table or get_table(potential, 3)
    eps = params.lam ** (2 + params.kappa / 2) if eps is None else eps
    xg, xw = np.polynomial.legendre.leggauss(n_xi)
    xi = 0.5 * obs.xi_max * (xg + 1)
    wxi = 0.5 * obs.xi_max * xw
    lo, hi = obs.v_support or (0.0, state.cutoff)
    v, wv = _radial_nodes(lo, hi, 0.0, (hi - lo) / 40, n_v)
    cg, cw = np.polynomial.legendre.leggauss(n_c)
    XI, V, C = np.meshgrid(xi, v, cg, indexing="ij")
    W = wxi[:, None, None] * wv[None, :, None] * cw[None, None, :]
    base = 8 * math.pi**2 * XI**2 * V**2 * W * obs.g(XI) * obs.h(V) \
        * _wigner_hat_conj(state, V, XI, C, eps)
    damp = np.exp(2 * t * omega(v, params, table).imag) if params.lam else np.ones_like(v)
    phase = np.exp(1j * t * eps * V * XI * C)
    value = complex(np.sum(base * phase * damp[None, :, None]))
    return FreeTermValue(t, value, complex(np.sum(base)), float(np.sum(np.abs(base))))


def gaussian_pairing(obs: Observable, eps: float, width: float = 1.0) -> float:
    """<O^, W^_0> for the Gaussian state, where conj(W^_0)(eps xi, v) = Z^-2 exp(-2v^2/w^2 - eps^2 xi^2/(2w^2))."""
    z2 = (math.pi * width**2 / 2) ** 1.5
    gi = integrate.quad(lambda x: x * x * obs.g(np.array(x)) * math.exp(-(eps * x) ** 2 / (2 * width**2)),
                        0, obs.xi_max, limit=200, epsabs=1e-14)[0]
    lo, hi = obs.v_support or (0.0, 6.0 * width)
    vi = integrate.quad(lambda v: v * v * obs.h(np.array(v)) * math.exp(-2 * v * v / width**2),
                        lo, hi, limit=200, epsabs=1e-14)[0]
    return 16 * math.pi**2 * gi * vi / z2


# row-elimination schedule

CASE_PEAK = "peak"
CASE_LADDER = "ladder-block"
CASE_US = "uncovered-slope"
CASE_CS = "covered-slope"
CASE_VALLEY = "valley"
CASE_LAST = "last"


@dataclass(frozen=True)
class Step:
    row: int
    case: str
    rows: tuple[int, ...]
    variables: tuple[int, ...]
    b: tuple[int, ...] | None  # carried point-singularity vector after the step, None if empty

    def to_json(self) -> dict:
        return {"row": self.row, "case": self.case, "rows": list(self.rows),
                "variables": list(self.variables),
                "b": None if self.b is None else list(self.b)}


@dataclass
class Schedule:
    sigma: Permutation
    steps: list[Step]
    cls: IndexClassification

    def to_json(self) -> dict:
        return {"sigma": str(self.sigma), "steps": [s.to_json() for s in self.steps]}

    def violations(self) -> list[str]:
        """Structural invariants of the schedule; an empty list means all hold."""
        out = []
        k1 = self.sigma.k + 1
        rows = [r for s in self.steps for r in s.rows]
        if sorted(rows) != list(range(1, k1 + 1)):
            out.append("rows not eliminated exactly once")
        cols = [c for s in self.steps for c in s.variables]
        if len(cols) != len(set(cols)):
            out.append("a column is integrated twice")
        if sorted(cols) != list(range(1, k1 + 1)):
            out.append("columns integrated do not cover all momenta")
        cls = self.cls
        ladder_pivots = {cls.pivots[i] for i in cls.ladders}
        prev = None
        for s in self.steps:
            if s.case == CASE_LADDER:
                run = list(s.rows)
                if run != list(range(run[0], run[-1] + 1)) or run[0] - 1 in cls.ladders \
                        or run[-1] + 1 in cls.ladders:
                    out.append(f"ladder block {run} is not a maximal run")
            if s.b is not None and any(s.b[c - 1] != 0 for c in ladder_pivots):
                out.append(f"ladder pivot inside carried b at row {s.row}")
            if s.case in (CASE_US, CASE_CS, CASE_VALLEY) and prev is not None:
                if prev[cls.pivots[s.row] - 1] == 0:
                    out.append(f"carried b misses the integration variable at row {s.row}")
            if s.case == CASE_LAST and prev is not None:
                out.append("point singularity present entering the last step")
            prev = s.b
        return out


def b_vector(sigma: Permutation, h: int, cls: IndexClassification | None = None,
             m: np.ndarray | None = None) -> tuple[int, ...] | None:
    """The carried singularity vector after row h, or None when it is empty.

    h_mu is the largest valley or slope index <= h; if it is a covered slope the
    vector is row h_mu of M with its pivot entry (h_mu, c(h_mu)) set to zero.
    """
    cls = cls or classify(sigma)
    m = tower_matrix(sigma).entries if m is None else m
    listing = [i for i in sorted(cls.valleys | cls.slopes) if i <= h]
    if not listing or listing[-1] not in cls.covered:
        return None
    hm = listing[-1]
    row = m[hm - 1].astype(int).copy()
    row[cls.pivots[hm] - 1] = 0
    return tuple(int(x) for x in row)


def schedule(sigma: Permutation) -> Schedule:
    """Eliminate rows 1..k+1 in increasing order, one case per index type."""
    cls = classify(sigma)
    m = tower_matrix(sigma).entries
    k1 = sigma.k + 1
    steps: list[Step] = []
    h = 1
    while h <= k1:
        if h in cls.ladders:
            run = [h]
            while run[-1] + 1 in cls.ladders:
                run.append(run[-1] + 1)
            b = b_vector(sigma, run[-1], cls, m)
            steps.append(Step(h, CASE_LADDER, tuple(run), tuple(cls.pivots[i] for i in run), b))
            h = run[-1] + 1
            continue
        b = b_vector(sigma, h, cls, m)
        if h in cls.peaks:
            steps.append(Step(h, CASE_PEAK, (h,), (), b))
        elif h in cls.valleys:
            steps.append(Step(h, CASE_VALLEY, (h,), (cls.pivots[h], cls.valley_alt[h]), b))
        elif h in cls.covered:
            steps.append(Step(h, CASE_CS, (h,), (cls.pivots[h],), b))
        elif h in cls.uncovered:
            steps.append(Step(h, CASE_US, (h,), (cls.pivots[h],), b))
        else:
            steps.append(Step(h, CASE_LAST, (h,), (cls.pivots[h],), b))
        h += 1
    return Schedule(sigma, steps, cls)


# lambda-power ledger

def kappa_limit(d: int) -> float:
    return 2 / (6 + 9 * d)


def delta_constant(d: int) -> float:
    """Coefficient of delta per unit degree: 3 d (2v+s+1) <= (9d/2) deg."""
    return 4.5 * d


@dataclass
class ExponentReport:
    sigma: str
    counts: dict
    degree: int
    total_lambda_power: float
    simplified_bound: float
    per_degree: float
    applicable: bool
    kappa: float
    delta: float
    d: int
    c_delta: float

    @property
    def holds(self) -> bool:
        return self.total_lambda_power >= self.simplified_bound - 1e-12

    def to_json(self) -> dict:
        return {"sigma": self.sigma, "counts": self.counts, "degree": self.degree,
                "totalLambdaPower": self.total_lambda_power,
                "simplifiedBound": self.simplified_bound, "perDegree": self.per_degree,
                "applicable": self.applicable, "holds": self.holds, "kappa": self.kappa,
                "delta": self.delta, "d": self.d, "cDelta": self.c_delta}


def raw_total_power(v: int, s: int, us: int, kappa: float, delta: float, d: int) -> float:
    return 2 * (2 * v + s) - (1 + kappa / 2) * (3 * v + s + us) - (kappa + 3 * delta) * d * (2 * v + s + 1)


def exponent_report(sigma: Permutation, kappa: float, d: int = 3, delta: float = 0.0, *,
                    c_delta: float | None = None) -> ExponentReport:
    """Total lambda power of the elimination bound against (1/3 - (1+3d/2)kappa - C delta) deg.

    For the identity no elimination bound is needed (the ladder is the main
    term); both exponents are reported as 0 with ``applicable`` false.
    """
    if kappa >= kappa_limit(d):
        raise KappaTooLarge(f"kappa = {kappa} must be below 2/(6+9d) = {kappa_limit(d):.6f}")
    cls = classify(sigma)
    c_delta = delta_constant(d) if c_delta is None else c_delta
    v, s = len(cls.valleys), len(cls.slopes)
    us, cs = len(cls.uncovered), len(cls.covered)
    counts = {"l": len(cls.ladders), "v": v, "s": s, "us": us, "cs": cs,
              "p": len(cls.peaks), "t": len(cls.ladder_tops)}
    deg = cls.degree
    per = 1 / 3 - (1 + 1.5 * d) * kappa - c_delta * delta
    if sigma.is_identity():
        return ExponentReport(str(sigma), counts, 0, 0.0, 0.0, per, False, kappa, delta, d, c_delta)
    total = raw_total_power(v, s, us, kappa, delta, d)
    return ExponentReport(str(sigma), counts, deg, total, per * deg, per, True,
                          kappa, delta, d, c_delta)


# Method I versus Method II

@dataclass
class PointwiseBound:
    k: int
    method_i: float
    method_ii: float
    ratio: float
    lambda_factor: float
    bookkeeping: float

    def to_json(self) -> dict:
        return self.__dict__.copy()


def pointwise_bound(k: int, params: PropagatorParams, C: float = 1.0) -> PointwiseBound:
    """(C|log lam|)^{k+2} (lam^2/eta)^k against C (1 + C lam^{1-12 kappa})^k |log lam|^2.

    ``lambda_factor`` is (lam^2/eta)^k and ``bookkeeping`` collects the
    remaining constants and logarithms, so ratio = lambda_factor * bookkeeping.
    """
    lam, eta, kap = params.lam, params.eta, params.kappa
    L = abs(math.log(lam))
    m1 = (C * L) ** (k + 2) * (lam**2 / eta) ** k
    m2 = C * (1 + C * lam ** (1 - 12 * kap)) ** k * L**2
    factor = (lam**2 / eta) ** k
    book = C ** (k + 1) * L**k / (1 + C * lam ** (1 - 12 * kap)) ** k
    return PointwiseBound(k, m1, m2, m1 / m2, factor, book)
