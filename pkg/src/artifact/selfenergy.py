"""Self-energy of the random potential and propagator integral checks.

Energies are measured in units of the free dispersion e(p) = p^2/2.  For a
radial profile B^ the self-energy reduces, after the angular integration, to

    Theta_eps(alpha) = int_0^inf f(e) / (alpha - e + i eps) de,
    f(e) = (2e)^(d/2-1) S(e),   S(e) = int_{S^{d-1}} |B^(sqrt(2e)(phi_r - phi))|^2 dphi.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .errors import HypothesisViolated, OutOfTable, QuadratureFailure
from .profiles import RadialProfile, gaussian_potential, sphere_area

# chord lengths (in units of the profile width) used to split angular integrals
_CHORD_BREAKS = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)


def _quad(fun, a, b, *, points=None, epsabs=1e-13, epsrel=1e-10, limit=400, what="integral"):
    """scipy.quad that raises QuadratureFailure instead of warning.

    Roundoff-limited results are accepted when the reported error is within
    100x the requested tolerance.
    """
    kw = dict(epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    if points is not None and np.isfinite(b):
        pts = sorted({float(p) for p in points if a < p < b})
        if pts:
            kw["points"] = pts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(fun, a, b, **kw)
    val, err = out[0], out[1]
    if len(out) > 3 and not math.isfinite(val):
        raise QuadratureFailure(f"{what}: non-finite result")
    if len(out) > 3 and err > 100 * max(epsabs, epsrel * abs(val)):
        raise QuadratureFailure(f"{what}: error estimate {err:.3g} for value {val:.6g}")
    return val, err


def _angle_breaks(r: float, q: float, scale: float) -> list[float]:
    """Polar angles theta in (0, pi/2) where the chord |r phi - q e| hits a break."""
    out = []
    if r * q <= 0:
        return out
    for c in _CHORD_BREAKS:
        c2 = (c * scale) ** 2 - (r - q) ** 2
        if c2 > 0:
            s = math.sqrt(c2 / (4 * r * q))
            if s < 1:
                out.append(math.asin(s))
    return out


def shell_average(h: Callable, r: float, q: float, d: int = 3, *, scale: float = 1.0,
                  epsrel: float = 1e-11) -> tuple[float, float]:
    """int_{S^{d-1}} h(|r phi - q e|) dphi for a radial h, by adaptive quadrature.

    Uses c = cos(angle) = 1 - 2 sin^2(theta), theta in [0, pi/2], so that the
    chord is sqrt((r-q)^2 + 4 r q sin^2 theta) and the weight is smooth.
    Returns (value, error estimate).
    """
    if d < 2:
        raise ValueError("d >= 2 required")
    if r == 0 or q == 0:
        return float(h(np.array(abs(r - q)))) * sphere_area(d), 0.0
    pref = 2.0 * sphere_area(d - 1)
    rq4 = 4.0 * r * q
    dq2 = (r - q) ** 2

    def integrand(t):
        s = math.sin(t)
        return float(h(np.sqrt(dq2 + rq4 * s * s))) * math.sin(2 * t) ** (d - 2)

    val, err = _quad(integrand, 0.0, math.pi / 2, points=_angle_breaks(r, q, scale),
                     epsrel=epsrel, what="angular quadrature")
    return pref * val, pref * err


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def shell_average_gl(h: Callable, r: np.ndarray, q: float, d: int = 3, *,
                     scale: float = 1.0) -> np.ndarray:
    """Vectorized shell average with composite Gauss-Legendre panels.

    Panel edges follow the same chord breakpoints as the adaptive version,
    computed per radius, so narrow forward peaks at large r*q stay resolved.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    pref = 2.0 * sphere_area(d - 1)
    out = np.empty_like(r)
    zero = (r == 0) | (q == 0)
    out[zero] = h(np.abs(r[zero] - q)) * sphere_area(d)
    rr = r[~zero]
    if rr.size:
        rq4 = 4.0 * rr * q
        dq2 = (rr - q) ** 2
        edges = [np.zeros_like(rr)]
        for c in _CHORD_BREAKS:
            c2 = (c * scale) ** 2 - dq2
            s = np.sqrt(np.clip(c2 / rq4, 0.0, 1.0))
            edges.append(np.arcsin(s))
        edges.append(np.full_like(rr, math.pi / 2))
        edges = np.sort(np.stack(edges, axis=1), axis=1)
        a, b = edges[:, :-1, None], edges[:, 1:, None]
        t = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
        w = 0.5 * (b - a) * _GL_WEIGHTS
        s = np.sin(t)
        vals = h(np.sqrt(dq2[:, None, None] + rq4[:, None, None] * s * s)) * np.sin(2 * t) ** (d - 2)
        out[~zero] = pref * np.sum(vals * w, axis=(1, 2))
    return out


def angular_S(e: float, profile: RadialProfile | None = None, d: int = 3, *,
              epsrel: float = 1e-11) -> float:
    """S(e) = int_{S^{d-1}} |B^(sqrt(2e)(phi_r - phi))|^2 dphi."""
    if e < 0:
        raise ValueError("e must be nonnegative")
    profile = profile or gaussian_potential()
    r = math.sqrt(2.0 * e)
    val, err = shell_average(profile.sq, r, r, d, epsrel=epsrel)
    if err > max(1e-9 * abs(val), 1e-300) and err > 1e-13:
        raise QuadratureFailure(f"angular quadrature error {err:.2e} at e={e}")
    return val


def angular_S_grid(e: float, profile: RadialProfile | None = None, n_theta: int = 200,
                   n_phi: int = 400, tilt: tuple[float, float] = (0.7, 0.3)) -> float:
    """Second evaluation of S(e) in d = 3 on a tensor-product sphere rule.

    phi_r points in a generic direction so the rule does not exploit the
    azimuthal symmetry used by ``angular_S``.
    """
    profile = profile or gaussian_potential()
    x, w = np.polynomial.legendre.leggauss(n_theta)
    az = np.arange(n_phi) * (2 * np.pi / n_phi)
    ct = x[:, None]
    st = np.sqrt(1 - ct**2)
    a, b = tilt
    ref = np.array([math.sin(a) * math.cos(b), math.sin(a) * math.sin(b), math.cos(a)])
    dot = st * np.cos(az)[None, :] * ref[0] + st * np.sin(az)[None, :] * ref[1] + ct * ref[2]
    chord = np.sqrt(np.clip(2 - 2 * dot, 0, None)) * math.sqrt(2 * e)
    vals = profile.sq(chord)
    return float(np.sum(w[:, None] * vals) * (2 * np.pi / n_phi))


def angular_S_mc(e: float, profile: RadialProfile | None = None, d: int = 3,
                 n: int = 10**6, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate of S(e) with its standard error."""
    profile = profile or gaussian_potential()
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    chord = np.sqrt(np.clip(2 - 2 * x[:, 0], 0, None)) * math.sqrt(2 * e)
    vals = profile.sq(chord) * sphere_area(d)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


def f_density(e: float, profile: RadialProfile | None = None, d: int = 3) -> float:
    """f(e) = (2e)^(d/2-1) S(e); the spectral weight of the self-energy.

    S is evaluated with the panelled Gauss-Legendre rule, which agrees with
    the adaptive ``angular_S`` to ~1e-12 and is much cheaper inside nested
    quadratures.
    """
    profile = profile or gaussian_potential()
    if e <= 0:
        return float(angular_S(0.0, profile, d)) if d == 2 else 0.0
    r = math.sqrt(2.0 * e)
    return (2 * e) ** (d / 2 - 1) * float(shell_average_gl(profile.sq, np.array([r]), r, d)[0])


# tail of f beyond the tabulated range: f(e) ~ A e^(-1/2) in every d

def _tail_pv(alpha: float, E: float, A: float) -> float:
    """PV int_E^inf A e^(-1/2) / (alpha - e) de for alpha < E."""
    sE = math.sqrt(E)
    if alpha > 0:
        sa = math.sqrt(alpha)
        return A / sa * math.log((sE - sa) / (sE + sa))
    if alpha == 0:
        return -2 * A / sE
    sa = math.sqrt(-alpha)
    return -2 * A / sa * (math.pi / 2 - math.atan(sE / sa))


@dataclass
class SelfEnergyValue:
    alpha: float
    value: complex
    epsilon: float
    err: float = 0.0


def theta_direct(alpha: float, epsilon: float = 0.0, profile: RadialProfile | None = None,
                 d: int = 3, *, f: Callable[[float], float] | None = None,
                 e_split: float | None = None, epsrel: float = 1e-9) -> SelfEnergyValue:
    """Theta_eps(alpha) by adaptive quadrature with f evaluated on the fly.

    For eps = 0 the real part is a principal value computed with the
    subtraction f(e) - f(alpha) and the imaginary part is -pi f(alpha).
    For eps > 0 the imaginary part uses e = alpha + eps tan(t), which turns
    the Lorentzian into a flat weight.
    """
    profile = profile or gaussian_potential()
    if f is None:
        def f(e):
            return f_density(e, profile, d)
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    E = e_split if e_split is not None else max(4.0 * abs(alpha) + 20.0, 40.0)
    eps = float(epsilon)

    if alpha <= 0 and eps == 0:
        def g(e):
            return f(e) / (alpha - e)
        v1, e1 = _quad(g, 0.0, E, points=[1e-3, 0.1, 1.0], epsrel=epsrel, what="theta")
        v2, e2 = _quad(g, E, np.inf, epsrel=epsrel, what="theta tail")
        return SelfEnergyValue(alpha, complex(v1 + v2, 0.0), 0.0, e1 + e2)

    fa = f(alpha) if alpha > 0 else 0.0

    def gre(e):
        de = alpha - e
        if de == 0:
            return 0.0
        return (f(e) - fa) * de / (de * de + eps * eps)

    pts = [alpha] + ([alpha + s * m * eps for s in (-1, 1) for m in (1, 10, 100)] if eps > 0 else [])
    v1, e1 = _quad(gre, 0.0, E, points=pts, epsrel=epsrel, what="theta real part")
    log_term = 0.5 * math.log((alpha**2 + eps**2) / ((alpha - E) ** 2 + eps**2)) if alpha != 0 or eps else 0.0
    v2, e2 = _quad(lambda e: f(e) * (alpha - e) / ((alpha - e) ** 2 + eps * eps), E, np.inf,
                   epsrel=epsrel, what="theta real tail")
    re = v1 + fa * log_term + v2
    err = e1 + e2
    if eps == 0:
        im = -math.pi * fa
    else:
        t0 = math.atan(-alpha / eps)
        vi, ei = _quad(lambda t: f(alpha + eps * math.tan(t)), t0, math.pi / 2,
                       points=[0.0, math.atan(1.0 / eps) if alpha > 0 else 0.0],
                       epsrel=epsrel, what="theta imaginary part")
        im = -vi
        err += ei
    return SelfEnergyValue(alpha, complex(re, im), eps, err)


def energy_grid(n: int = 2048, e_max: float = 200.0, e_min: float = 1e-6) -> np.ndarray:
    """Logarithmic below e = 1, linear above; n points in total."""
    n_log = n // 2
    lo = np.geomspace(e_min, 1.0, n_log, endpoint=False)
    hi = np.linspace(1.0, e_max, n - n_log)
    return np.concatenate([lo, hi])


class SelfEnergyTable:
    """Tabulated theta(e) = Theta_0(e) on an energy grid with cubic interpolation."""

    def __init__(self, profile: RadialProfile | None = None, d: int = 3, n: int = 2048,
                 e_max: float = 200.0, epsrel: float = 1e-9, _data: dict | None = None):
        self.profile = profile or gaussian_potential()
        self.d = d
        self.epsrel = epsrel
        if _data is not None:
            self.grid = _data["grid"]
            self.re, self.im, self.err = _data["re"], _data["im"], _data["err"]
            self.fvals = -self.im / math.pi
        else:
            self.grid = energy_grid(n, e_max)
            self.fvals = np.array([f_density(e, self.profile, d) for e in self.grid])
            self._build_f()
            self.im = -math.pi * self.fvals
            self.re = self._pv_all(self.grid, 8)
            self.err = np.abs(self._pv_all(self.grid, 12) - self.re)
        self._build_f()
        self._re = CubicSpline(self.grid, self.re)
        self._im = CubicSpline(self.grid, self.im)

    def _build_f(self):
        self._f = CubicSpline(self.grid, self.fvals)
        self._tail_A = self.fvals[-1] * math.sqrt(self.grid[-1])

    @property
    def e_max(self) -> float:
        return float(self.grid[-1])

    def f(self, e):
        """Interpolated f(e), continued by A e^(-1/2) beyond the table."""
        e = np.asarray(e, dtype=float)
        inside = np.clip(e, self.grid[0], self.grid[-1])
        val = self._f(inside)
        if self.d == 3:
            # f ~ sqrt(2e) S(0) near the origin
            small = e < self.grid[0]
            val = np.where(small, self.fvals[0] * np.sqrt(np.clip(e, 0, None) / self.grid[0]), val)
        return np.where(e > self.grid[-1], self._tail_A / np.sqrt(np.maximum(e, 1e-300)), val)

    def _pv_all(self, alphas: np.ndarray, m: int) -> np.ndarray:
        """Subtracted principal value for every alpha at once.

        The interpolant is piecewise cubic, so Gauss-Legendre with ``m`` nodes
        on each table cell integrates (f(e) - f(alpha)) / (alpha - e) to near
        machine precision; alpha always sits on a cell edge.  Beyond e_max the
        power-law continuation is integrated on geometric panels up to
        2 e_max and in closed form from there.
        """
        E = 2.0 * self.e_max
        edges = np.concatenate([[0.0], self.grid, np.geomspace(self.e_max, E, 65)[1:]])
        x, w = np.polynomial.legendre.leggauss(m)
        lo, hi = edges[:-1, None], edges[1:, None]
        nodes = (0.5 * (hi - lo) * x + 0.5 * (hi + lo)).ravel()
        weights = (0.5 * (hi - lo) * w).ravel()
        fn = self.f(nodes)
        out = np.empty(len(alphas))
        for start in range(0, len(alphas), 128):
            al = alphas[start:start + 128]
            fa = self.f(al)
            vals = (fn[None, :] - fa[:, None]) / (al[:, None] - nodes[None, :])
            out[start:start + 128] = vals @ weights
        for i, al in enumerate(alphas):
            fa = float(self.f(al))
            log_term = math.log(al / (E - al)) if al > 0 else 0.0
            out[i] += fa * log_term + _tail_pv(float(al), E, self._tail_A)
        return out

    def __call__(self, alpha) -> np.ndarray:
        a = np.asarray(alpha, dtype=float)
        if np.any(a > self.e_max):
            raise OutOfTable(f"alpha up to {np.max(a):.3g} beyond table e_max={self.e_max:.3g}")
        if np.any(a < 0):
            raise OutOfTable("negative energies are not tabulated; use theta_direct")
        re = self._re(np.maximum(a, self.grid[0]))
        im = -math.pi * self.f(a)
        return re + 1j * im

    def theta(self, alpha: float) -> SelfEnergyValue:
        if alpha < 0:
            return theta_direct(alpha, 0.0, self.profile, self.d, f=lambda e: float(self.f(e)))
        return SelfEnergyValue(alpha, complex(self(alpha)), 0.0,
                               float(np.interp(alpha, self.grid, self.err)))

    # persistence
    def meta(self) -> dict:
        return {"profile": self.profile.describe(), "d": self.d, "n": len(self.grid),
                "e_max": self.e_max, "epsrel": self.epsrel,
                "grid": "log below e=1, linear above", "interpolation": "cubic spline"}

    def save(self, path: str | Path) -> None:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "re", "im", "err"])
            for row in zip(self.grid, self.re, self.im, self.err):
                w.writerow([repr(float(x)) for x in row])
        path.with_suffix(".json").write_text(json.dumps(self.meta(), indent=2))

    @classmethod
    def load(cls, path: str | Path, profile: RadialProfile) -> "SelfEnergyTable":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        meta = json.loads(Path(path).with_suffix(".json").read_text())
        if meta["profile"]["hash"] != profile.hash():
            raise ValueError("table was built for a different profile")
        return cls(profile, meta["d"], epsrel=meta["epsrel"],
                   _data={"grid": data[:, 0], "re": data[:, 1], "im": data[:, 2], "err": data[:, 3]})


_TABLES: dict = {}


def get_table(profile: RadialProfile | None = None, d: int = 3, n: int = 2048,
              e_max: float = 200.0) -> SelfEnergyTable:
    profile = profile or gaussian_potential()
    key = (profile.hash(), d, n, e_max)
    if key not in _TABLES:
        _TABLES[key] = SelfEnergyTable(profile, d, n, e_max)
    return _TABLES[key]


def holder_quotient(values: np.ndarray, alphas: np.ndarray) -> float:
    """max over pairs of |Theta(a) - Theta(a')| / |a - a'|^(1/2)."""
    v = np.asarray(values)
    a = np.asarray(alphas, dtype=float)
    dv = np.abs(v[:, None] - v[None, :])
    da = np.abs(a[:, None] - a[None, :])
    mask = da > 0
    return float(np.max(dv[mask] / np.sqrt(da[mask])))


# propagator parameters and the renormalized dispersion

@dataclass(frozen=True)
class PropagatorParams:
    lam: float
    eta: float | None = None
    kappa: float = 0.05
    delta: float = 0.0

    def __post_init__(self):
        if self.eta is None:
            object.__setattr__(self, "eta", self.lam ** (2 + self.kappa))

    @property
    def zeta(self) -> float:
        return self.lam ** (-self.kappa - 3 * self.delta)

    def hypothesis_ok(self) -> bool:
        lo = self.lam ** (2 + 4 * self.kappa)
        return lo * (1 - 1e-12) <= self.eta <= self.lam**2 * (1 + 1e-12) and self.kappa <= 1 / 12

    def require_hypothesis(self) -> None:
        if not self.hypothesis_ok():
            raise HypothesisViolated(
                f"need lambda^(2+4kappa) <= eta <= lambda^2 and kappa <= 1/12; "
                f"got lambda={self.lam}, eta={self.eta}, kappa={self.kappa}")


def omega(p, params: PropagatorParams, table: SelfEnergyTable | None = None) -> np.ndarray:
    """omega(p) = e(p) + lambda^2 theta(p); ``p`` are radii or d-vectors (last axis)."""
    p = np.asarray(p, dtype=float)
    r2 = p**2 if p.ndim <= 1 else np.sum(p**2, axis=-1)
    e = 0.5 * r2
    if params.lam == 0:
        return e + 0j
    table = table or get_table()
    return e + params.lam**2 * table(e)


def triple_norm(q, eta: float) -> np.ndarray:
    """|||q||| = eta + min(|q|, 1)."""
    q = np.asarray(q, dtype=float)
    n = np.abs(q) if q.ndim == 0 else np.linalg.norm(q, axis=-1)
    return eta + np.minimum(n, 1.0)


def _bracket(x) -> float:
    return math.sqrt(1 + x * x)


# propagator lemma checks

@dataclass
class LemmaReport:
    testcase: str
    rows: list[dict]
    calibration: float
    refined: float
    flag: bool
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"testcase": self.testcase, "calibration": self.calibration,
                "refined": self.refined, "flag": self.flag, "rows": self.rows, **self.extra}


def _radial_integral(G: Callable[[float], float], q: float, profile: RadialProfile, d: int,
                     h: Callable | None = None, resonances=(), r_max: float | None = None,
                     epsrel: float = 1e-8) -> tuple[float, float]:
    """int h(|p - q|) G(|p|) dp over R^d, reduced to a radial integral."""
    h = h or profile.sq
    r_max = r_max or (abs(q) + profile.cutoff)

    def integrand(r):
        return r ** (d - 1) * G(r) * float(shell_average_gl(h, np.array([r]), q, d)[0])

    pts = [x for x in resonances if 0 < x < r_max]
    return _quad(integrand, 0.0, r_max, points=pts, epsrel=epsrel, epsabs=1e-14, limit=800,
                 what="radial integral")


def _resonance_radius(alpha: float, params: PropagatorParams, table, renormalized: bool):
    if alpha <= 0:
        return []
    if not renormalized or params.lam == 0:
        return [math.sqrt(2 * alpha)]
    from scipy.optimize import brentq

    def g(r):
        return float(np.real(omega(np.array(r), params, table))) - alpha

    hi = math.sqrt(2 * (alpha + 10.0))
    try:
        return [brentq(g, 1e-9, hi)]
    except ValueError:
        return [math.sqrt(2 * alpha)]


def lemma_lhs(testcase: str, alpha: float, q: float, params: PropagatorParams,
              profile: RadialProfile | None = None, d: int = 3, a: float = 0.0,
              table: SelfEnergyTable | None = None, epsrel: float = 1e-8) -> float:
    profile = profile or gaussian_potential()
    table = table or get_table(profile, d)
    lam, eta = params.lam, params.eta

    if testcase == "threeAint":
        def G(r):
            return 1.0 / abs(alpha - 0.5 * r * r + 1j * eta) ** (2 - a)
        res = _resonance_radius(alpha, params, table, False)
        return _radial_integral(G, q, profile, d, resonances=res, epsrel=epsrel)[0]

    def w(r):
        return complex(omega(np.array(r), params, table))

    res = _resonance_radius(alpha, params, table, True)
    if testcase == "logest":
        def G(r):
            return 1.0 / abs(alpha - w(r) + 1j * eta)
        return _radial_integral(G, q, profile, d, resonances=res, epsrel=epsrel)[0]
    if testcase == "twoAint":
        def G(r):
            return 1.0 / abs(alpha - w(r) + 1j * eta) ** (2 - a)
        return _radial_integral(G, q, profile, d, resonances=res, epsrel=epsrel)[0]
    if testcase == "ladderint":
        def G(r):
            z = w(r)
            return lam**2 / ((alpha - z.real) ** 2 + (abs(z.imag) + eta) ** 2)
        return _radial_integral(G, q, profile, d, resonances=res, epsrel=epsrel)[0]
    raise ValueError(f"unknown testcase {testcase!r}")


def lemma_shape(testcase: str, alpha: float, q: float, params: PropagatorParams, a: float = 0.0,
                table: SelfEnergyTable | None = None) -> float:
    lam, eta = params.lam, params.eta
    sep = _bracket(abs(q) - math.sqrt(2 * abs(alpha)))
    if testcase == "logest":
        # log<alpha> vanishes at alpha = 0; 1 + log<alpha> keeps the shape positive
        return abs(math.log(lam)) * (1 + math.log(_bracket(alpha))) / (math.sqrt(_bracket(alpha)) * sep)
    if testcase == "twoAint":
        return lam ** (-2 * (1 - a)) / (_bracket(alpha) ** (a / 2) * sep)
    if testcase == "threeAint":
        return eta ** (-(1 - a)) / (_bracket(alpha) ** (a / 2) * sep)
    if testcase == "ladderint":
        wq = complex(omega(np.array(q), params, table))
        return lam ** (-12 * params.kappa) * (lam + math.sqrt(abs(alpha - wq)))
    raise ValueError(f"unknown testcase {testcase!r}")


def lemma33_check(params: PropagatorParams, profile: RadialProfile | None = None,
                  testcase: str = "logest", *, d: int = 3, a: float = 0.0,
                  coarse: tuple[int, int] = (3, 3), refine: int = 2,
                  alpha_range: tuple[float, float] = (0.05, 2.0),
                  q_range: tuple[float, float] = (0.0, 2.0),
                  table: SelfEnergyTable | None = None) -> LemmaReport:
    """Measure LHS / shape on a coarse (alpha, |q|) grid and again on a refined one.

    The calibration constant is the coarse maximum; the flag is raised when the
    refined maximum exceeds twice that value.  For ``ladderint`` the ratio is
    (LHS - 1)_+ / shape, the excess over the leading 1.
    """
    params.require_hypothesis()
    profile = profile or gaussian_potential()
    table = table or get_table(profile, d)

    def sweep(na, nq):
        rows = []
        for alpha in np.linspace(*alpha_range, na):
            for q in np.linspace(*q_range, nq):
                lhs = lemma_lhs(testcase, float(alpha), float(q), params, profile, d, a, table)
                shape = lemma_shape(testcase, float(alpha), float(q), params, a, table)
                ratio = max(lhs - 1.0, 0.0) / shape if testcase == "ladderint" else lhs / shape
                rows.append({"alpha": float(alpha), "q": float(q), "lam": params.lam,
                             "eta": params.eta, "lhs": lhs, "shape": shape, "ratio": ratio})
        return rows

    rows_c = sweep(*coarse)
    rows_f = sweep(coarse[0] * refine - 1, coarse[1] * refine - 1)
    cal = max(r["ratio"] for r in rows_c)
    ref = max(r["ratio"] for r in rows_f)
    flag = ref > 2 * cal if cal > 0 else ref > 0
    return LemmaReport(testcase, rows_c + rows_f, cal, ref, flag)


# appendix integrals over the ball |p| <= zeta with free propagators

@dataclass
class AppendixReport:
    I1: float
    I2: float
    J: float
    shapes: dict
    ratios: dict
    refined_ratios: dict
    stable: bool

    def to_json(self) -> dict:
        return {"I1": self.I1, "I2": self.I2, "J": self.J, "shapes": self.shapes,
                "ratios": self.ratios, "refinedRatios": self.refined_ratios, "stable": self.stable}


def _ball_integral(outer_res: list[float], G_outer, inner, zeta: float, d: int,
                   epsrel: float) -> float:
    """int_0^zeta u^{d-1} G_outer(u) inner(u) du with an adaptive outer rule."""
    def integrand(u):
        if u == 0:
            return 0.0
        return u ** (d - 1) * G_outer(u) * inner(u)

    return _quad(integrand, 0.0, zeta, points=outer_res, epsrel=epsrel, epsabs=1e-14,
                 limit=1000, what="appendix outer")[0]


def _inner_c(g, d: int, pts, epsrel: float, cusp: float | None = None) -> float:
    """|S^{d-2}| int_{-1}^{1} g(c) (1 - c^2)^((d-3)/2) dc.

    With ``cusp`` = +-1 the variable c = cusp (1 - s^2) removes a square-root
    cusp of g at that endpoint.
    """
    pref = sphere_area(d - 1)

    def fun(c):
        return g(c) if d == 3 else g(c) * (1 - c * c) ** ((d - 3) / 2)

    pts = sorted({p for p in pts if -1 < p < 1})
    kw = dict(epsrel=epsrel, epsabs=1e-14, limit=400, what="appendix inner")
    if cusp is None:
        return pref * _quad(fun, -1.0, 1.0, points=pts or None, **kw)[0]
    spts = sorted({math.sqrt(1 - cusp * p) for p in pts})
    val = _quad(lambda s: 2 * s * fun(cusp * (1 - s * s)), 0.0, math.sqrt(2.0),
                points=spts or None, **kw)[0]
    return pref * val


def appendix_integrals(q: float, r: float, eta: float, zeta: float, alpha: float, beta: float,
                       d: int = 3, epsrel: float = 1e-7) -> AppendixReport:
    """I1, I2 and J with their bound shapes.

    ``q`` and ``r`` are signed lengths along a common axis (r parallel to q).
    """
    def compute(tol):
        def G(u):
            return 1.0 / abs(alpha - 0.5 * u * u + 1j * eta)

        res = [math.sqrt(2 * alpha)] if alpha > 0 else []
        qa = abs(q)

        def c_beta(u):
            # resonance of the beta denominator in c
            if u == 0 or qa == 0:
                return []
            c = (2 * beta - u * u - qa * qa) / (2 * u * qa)
            return [c]

        def c_r(u):
            if u == 0 or r == 0:
                return []
            # |p - r|^2 = u^2 + r^2 - 2 u r c; kinks at |p - r| = 1 and its minimum
            return [(u * u + r * r - 1.0) / (2 * u * r)]

        cusp = None if r == 0 else math.copysign(1.0, r)

        def beta_den(u, c):
            x = 0.5 * (u * u + qa * qa + 2 * u * qa * c)
            return 1.0 / abs(beta - x + 1j * eta)

        def tri(u, c):
            dist = math.sqrt(max(u * u + r * r - 2 * u * r * c, 0.0))
            return 1.0 / (eta + min(dist, 1.0))

        I1 = _ball_integral(res, G, lambda u: _inner_c(lambda c: beta_den(u, c), d, c_beta(u), tol),
                            zeta, d, tol)
        I2 = _ball_integral(res, G, lambda u: _inner_c(lambda c: beta_den(u, c) * tri(u, c), d,
                                                       c_beta(u) + c_r(u), tol, cusp), zeta, d, tol)
        J = _ball_integral(res, G, lambda u: _inner_c(lambda c: tri(u, c), d, c_r(u), tol, cusp),
                           zeta, d, tol)
        return I1, I2, J

    I1, I2, J = compute(epsrel)
    tq = float(triple_norm(np.array(q), eta))
    le = abs(math.log(eta))
    shapes = {"I1": zeta ** (d - 3) * le**2 / tq,
              "I2": eta**-0.5 * zeta ** (d - 3) * le**2 / tq,
              "J": zeta ** (d - 2) * le}
    ratios = {"I1": I1 / shapes["I1"], "I2": I2 / shapes["I2"], "J": J / shapes["J"]}
    I1f, I2f, Jf = compute(epsrel * 1e-1)
    refined = {"I1": I1f / shapes["I1"], "I2": I2f / shapes["I2"], "J": Jf / shapes["J"]}
    stable = all(0.5 <= refined[k] / ratios[k] <= 2.0 for k in ratios if ratios[k] > 0)
    return AppendixReport(I1, I2, J, shapes, ratios, refined, stable)
