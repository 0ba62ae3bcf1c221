"""Collision kernel, momentum jump process and the diffusion constant.

Kinetic time units: a particle with momentum p on the shell e = p^2/2 moves
with velocity p/(2 pi), waits an Exp(sigma_0(e)) time, then jumps to a new
direction on the same shell with density proportional to |B^(p - p')|^2.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .errors import InsufficientSamples
from .profiles import RadialProfile, gaussian_potential, sphere_area
from .rng import task_chunks, task_rng
from .selfenergy import _angle_breaks, _quad

# coarea bracket

def coarea_bracket(h: Callable, e: float, d: int = 3) -> float:
    """[h](e) = (2e)^(d/2-1) int_{S^{d-1}} h(sqrt(2e) phi) dphi for a radial h."""
    if e < 0:
        raise ValueError("e must be nonnegative")
    if e == 0:
        return float(h(np.array(0.0))) * sphere_area(d) if d == 2 else 0.0
    r = math.sqrt(2 * e)
    return (2 * e) ** (d / 2 - 1) * sphere_area(d) * float(h(np.array(r)))


def coarea_total(h: Callable, d: int = 3, e_max: float = 200.0) -> float:
    """int_0^inf [h](e) de, by adaptive quadrature in sqrt(e)."""
    # e = s^2 / 2 removes the e^(d/2-1) endpoint behaviour
    def integrand(s):
        return s * coarea_bracket(h, 0.5 * s * s, d)

    s_max = math.sqrt(2 * e_max)
    return _quad(integrand, 0.0, s_max, points=[0.5, 1, 2, 4], epsrel=1e-11, epsabs=1e-15,
                 what="coarea total")[0]


# collision kernel moments

def _shell_moment(h: Callable, r: float, d: int, power: int) -> float:
    """int_{S^{d-1}} h(|r phi - r e|) cos(angle)^power dphi."""
    if r == 0:
        return float(h(np.array(0.0))) * sphere_area(d) if power == 0 else 0.0
    pref = 2.0 * sphere_area(d - 1)
    rr4 = 4.0 * r * r

    def integrand(t):
        s = math.sin(t)
        c = 1 - 2 * s * s
        return float(h(np.array(math.sqrt(rr4 * s * s)))) * c**power * math.sin(2 * t) ** (d - 2)

    return pref * _quad(integrand, 0.0, math.pi / 2, points=_angle_breaks(r, r, 1.0),
                        epsrel=1e-11, what="kernel moment")[0]


@dataclass(frozen=True)
class SigmaMoments:
    e: float
    sigma0: float
    sigma1: float

    @property
    def mean_cos(self) -> float:
        return self.sigma1 / self.sigma0

    @property
    def relaxation_rate(self) -> float:
        return self.sigma0 - self.sigma1


def sigma_moments(e: float, profile: RadialProfile | None = None, d: int = 3) -> SigmaMoments:
    """sigma_0(e) = 2 pi [|B^(p - .)|^2](e) and sigma_1 = sigma_0 <cos angle>."""
    if e <= 0:
        raise ValueError("e must be positive")
    profile = profile or gaussian_potential()
    r = math.sqrt(2 * e)
    jac = 2 * math.pi * (2 * e) ** (d / 2 - 1)
    s0 = jac * _shell_moment(profile.sq, r, d, 0)
    s1 = jac * _shell_moment(profile.sq, r, d, 1)
    return SigmaMoments(e, s0, s1)


def gaussian_mean_cos(e: float) -> float:
    """<cos> under the d = 3 Gaussian kernel exp(-|p - p'|^2): coth(4e) - 1/(4e)."""
    x = 4 * e
    return 1 / math.tanh(x) - 1 / x


# direction sampling

def _uniform_cos(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """cos of the angle to a fixed axis for a uniform point on S^{d-1}."""
    if d == 3:
        return rng.uniform(-1.0, 1.0, n)
    if d == 2:
        return np.cos(rng.uniform(0, 2 * math.pi, n))
    a = 0.5 * (d - 1)
    return 2 * rng.beta(a, a, n) - 1


class DirectionSampler:
    """Draws the cosine of the jump angle on the shell of energy e.

    ``method="rejection"`` proposes uniform points on the sphere and accepts
    with probability |B^(chord)|^2 / |B^(0)|^2 (the kernel maximum, since the
    profile is radially decreasing at the origin for every preset).  For the
    Gaussian preset in d = 3 the marginal of cos is exponential and
    ``method="inverse"`` samples it exactly by inversion.
    """

    def __init__(self, e: float, profile: RadialProfile, d: int = 3, method: str = "auto",
                 max_rounds: int = 10_000):
        self.e, self.profile, self.d = e, profile, d
        self.r = math.sqrt(2 * e)
        gaussian3 = profile.name == "gaussian" and d == 3
        if method == "auto":
            method = "inverse" if gaussian3 else "rejection"
        if method == "inverse" and not gaussian3:
            raise ValueError("inverse sampling is only available for the Gaussian preset in d = 3")
        self.method = method
        self.max_rounds = max_rounds
        grid = np.linspace(0, 2 * self.r, 2001)
        self.kmax = float(np.max(profile.sq(grid)))

    def cosines(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.method == "inverse":
            w2 = self.profile.params[0] ** 2
            a = 2 * self.r * self.r / w2  # density ~ exp(a c) on [-1, 1]
            u = rng.uniform(0.0, 1.0, n)
            return 1 + np.log1p(-u * -np.expm1(-2 * a)) / a
        out = np.empty(n)
        filled = 0
        for _ in range(self.max_rounds):
            need = n - filled
            if need == 0:
                return out
            m = max(64, int(need * 1.2 / max(self.acceptance_guess(), 1e-3)))
            c = _uniform_cos(rng, m, self.d)
            chord = self.r * np.sqrt(np.clip(2 - 2 * c, 0, None))
            acc = rng.uniform(0, 1, m) * self.kmax < self.profile.sq(chord)
            take = c[acc][:need]
            out[filled:filled + take.size] = take
            filled += take.size
        raise RuntimeError("rejection sampler exceeded its round cap")

    def acceptance_guess(self) -> float:
        if not hasattr(self, "_acc"):
            m = sigma_moments(self.e, self.profile, self.d) if self.e > 0 else None
            self._acc = (m.sigma0 / (2 * math.pi * (2 * self.e) ** (self.d / 2 - 1))
                         / (sphere_area(self.d) * self.kmax)) if m else 1.0
        return self._acc


def _rotate(phi: np.ndarray, c: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """New unit vectors at angle arccos(c) from phi with uniform azimuth."""
    n, d = phi.shape
    g = rng.standard_normal((n, d))
    g -= np.sum(g * phi, axis=1, keepdims=True) * phi
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    s = np.sqrt(np.clip(1 - c * c, 0, None))
    out = c[:, None] * phi + s[:, None] * g
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def uniform_directions(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass
class Trajectory:
    e: float
    jump_times: np.ndarray
    directions: np.ndarray  # direction on each segment, shape (n_jumps + 1, d)
    seed: int
    t_max: float

    @property
    def momenta(self) -> np.ndarray:
        return math.sqrt(2 * self.e) * self.directions

    def position(self, t: float) -> np.ndarray:
        """X(t) = (1/2 pi) int_0^t p(s) ds."""
        edges = np.concatenate([[0.0], self.jump_times, [np.inf]])
        dur = np.clip(np.minimum(edges[1:], t) - edges[:-1], 0, None)
        return (dur[:, None] * self.momenta).sum(axis=0) / (2 * math.pi)


def sample_jump_chain(e: float, t_max: float, seed: int, profile: RadialProfile | None = None,
                      d: int = 3, direction: np.ndarray | None = None,
                      method: str = "auto") -> Trajectory:
    """One trajectory of the momentum jump process on the shell of energy e."""
    if e <= 0 or t_max <= 0:
        raise ValueError("need e > 0 and t_max > 0")
    profile = profile or gaussian_potential()
    rng = np.random.default_rng(seed)
    s0 = sigma_moments(e, profile, d).sigma0
    sampler = DirectionSampler(e, profile, d, method)
    phi = uniform_directions(rng, 1, d) if direction is None else \
        np.asarray(direction, float).reshape(1, d) / np.linalg.norm(direction)
    times, dirs, t = [], [phi[0]], 0.0
    while True:
        t += rng.exponential(1 / s0)
        if t >= t_max:
            break
        phi = _rotate(phi, sampler.cosines(rng, 1), rng)
        times.append(t)
        dirs.append(phi[0])
    return Trajectory(e, np.array(times), np.array(dirs), seed, t_max)


# vectorized ensembles

@dataclass
class EnsembleSpec:
    e: float
    profile: RadialProfile
    d: int
    method: str
    sigma0: float


def _advance(spec: EnsembleSpec, rng: np.random.Generator, phi: np.ndarray, t_end: float,
             record: Callable[[np.ndarray, np.ndarray, np.ndarray], None]) -> np.ndarray:
    """Run every walker from time 0 to t_end.

    ``record(start, stop, phi)`` is called for each flight segment clipped to
    [0, t_end] (arrays over the active walkers).  Returns final directions.
    """
    sampler = DirectionSampler(spec.e, spec.profile, spec.d, spec.method)
    n = phi.shape[0]
    t = np.zeros(n)
    active = np.arange(n)
    while active.size:
        tau = rng.exponential(1 / spec.sigma0, active.size)
        start = t[active]
        stop = np.minimum(start + tau, t_end)
        record(active, start, stop)
        t[active] = start + tau
        alive = t[active] < t_end
        active = active[alive]
        if active.size:
            phi[active] = _rotate(phi[active], sampler.cosines(rng, active.size), rng)
    return phi


def _green_kubo_chunk(args) -> np.ndarray:
    spec, seed, task, n, horizon = args
    rng = task_rng(seed, task)
    phi = uniform_directions(rng, n, spec.d)
    phi0 = phi.copy()
    acc = np.zeros(n)

    def record(idx, start, stop):
        acc[idx] += (stop - start) * np.sum(phi[idx] * phi0[idx], axis=1)

    # phi is updated in place by _advance, so record sees the current segment
    _advance(spec, rng, phi, horizon, record)
    return 2 * spec.e * acc


def _map(fun, tasks, workers: int):
    if workers <= 1:
        return [fun(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fun, tasks))


@dataclass
class DiffusionEstimate:
    e: float
    mode: str
    value: float
    stderr: float
    closed_form: float
    n_traj: int = 0
    horizon: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def z_score(self) -> float:
        return (self.value - self.closed_form) / self.stderr if self.stderr > 0 else 0.0

    def to_json(self) -> dict:
        return {"e": self.e, "mode": self.mode, "value": self.value, "stderr": self.stderr,
                "closedForm": self.closed_form, "zScore": self.z_score, "nTraj": self.n_traj,
                "horizon": self.horizon, **self.extra}


def diffusion_closed_form(e: float, profile: RadialProfile | None = None, d: int = 3) -> float:
    """D_e = 2e / ((2 pi)^2 d (sigma_0 - sigma_1))."""
    m = sigma_moments(e, profile, d)
    return 2 * e / ((2 * math.pi) ** 2 * d * m.relaxation_rate)


def diffusion_constant(e: float, profile: RadialProfile | None = None, d: int = 3,
                       mode: str = "closedForm", *, n_traj: int = 100_000, seed: int = 0,
                       horizon_factor: float = 12.0, chunk: int = 10_000, workers: int = 1,
                       rtol: float | None = None, method: str = "auto") -> DiffusionEstimate:
    """D_e in closed form, or by Monte Carlo on the Green-Kubo integral.

    The Monte Carlo estimator integrates p(t).p(0) along each walker up to
    horizon_factor / (sigma_0 - sigma_1); the neglected tail is a relative
    exp(-horizon_factor).  Walkers are split into fixed chunks with their own
    seed streams, so the result does not depend on ``workers``.
    """
    profile = profile or gaussian_potential()
    m = sigma_moments(e, profile, d)
    closed = 2 * e / ((2 * math.pi) ** 2 * d * m.relaxation_rate)
    if mode == "closedForm":
        return DiffusionEstimate(e, mode, closed, 0.0, closed)
    if mode != "monteCarlo":
        raise ValueError(f"unknown mode {mode!r}")
    horizon = horizon_factor / m.relaxation_rate
    spec = EnsembleSpec(e, profile, d, method, m.sigma0)
    tasks = [(spec, seed, i, n, horizon) for i, n in enumerate(task_chunks(n_traj, chunk))]
    vals = np.concatenate(_map(_green_kubo_chunk, tasks, workers))
    scale = 1 / ((2 * math.pi) ** 2 * d)
    est = scale * float(np.mean(vals))
    se = scale * float(np.std(vals, ddof=1)) / math.sqrt(vals.size)
    if rtol is not None and se > rtol * abs(est):
        raise InsufficientSamples(f"relative error {se / abs(est):.3g} exceeds {rtol}")
    return DiffusionEstimate(e, mode, est, se, closed, vals.size, horizon)


# velocity autocorrelation

def _autocorr_chunk(args) -> np.ndarray:
    spec, seed, task, n, lags = args
    rng = task_rng(seed, task)
    phi = uniform_directions(rng, n, spec.d)
    phi0 = phi.copy()
    out = np.zeros((n, lags.size))

    def record(idx, start, stop):
        inside = (lags[None, :] >= start[:, None]) & (lags[None, :] < stop[:, None])
        if inside.any():
            dots = np.sum(phi[idx] * phi0[idx], axis=1)
            rows, cols = np.nonzero(inside)
            out[idx[rows], cols] = dots[rows]

    _advance(spec, rng, phi, float(lags.max()) + 1e-12, record)
    return 2 * spec.e * out


@dataclass
class AutocorrelationCurve:
    e: float
    lags: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    rate: float
    rate_stderr: float
    predicted_rate: float
    fit_residual: float
    n_traj: int

    def to_rows(self) -> list[dict]:
        return [{"lag": float(l), "mean": float(m), "stderr": float(s),
                 "fit": 2 * self.e * math.exp(-self.rate * l)}
                for l, m, s in zip(self.lags, self.mean, self.stderr)]


def _fit_rate(lags: np.ndarray, curve: np.ndarray, e: float) -> float:
    """Least-squares decay rate for 2e exp(-g t) through the fixed value at 0."""
    from scipy.optimize import minimize_scalar

    def loss(g):
        return float(np.sum((curve - 2 * e * np.exp(-g * lags)) ** 2))

    hi = 50.0 / max(lags.max(), 1e-12)
    return float(minimize_scalar(loss, bounds=(0.0, hi), method="bounded",
                                 options={"xatol": 1e-12}).x)


def autocorrelation(e: float, lags: np.ndarray | None = None, n_traj: int = 100_000,
                    seed: int = 0, profile: RadialProfile | None = None, d: int = 3, *,
                    chunk: int = 10_000, workers: int = 1, method: str = "auto",
                    rtol: float | None = None) -> AutocorrelationCurve:
    """E_e[p(t).p(0)] on a lag grid with an exponential fit.

    The default grid spans [0, 3 / (sigma_0 - sigma_1)].  The rate error bar
    comes from refitting each seed chunk separately.
    """
    profile = profile or gaussian_potential()
    m = sigma_moments(e, profile, d)
    if lags is None:
        lags = np.linspace(0, 3 / m.relaxation_rate, 31)
    lags = np.asarray(lags, float)
    if np.any(lags < 0):
        raise ValueError("lags must be nonnegative")
    spec = EnsembleSpec(e, profile, d, method, m.sigma0)
    chunks = list(task_chunks(n_traj, chunk))
    if len(chunks) < 2:
        raise InsufficientSamples("need at least two seed chunks for an error bar")
    tasks = [(spec, seed, i, n, lags) for i, n in enumerate(chunks)]
    parts = _map(_autocorr_chunk, tasks, workers)
    allv = np.concatenate(parts)
    mean = allv.mean(axis=0)
    se = allv.std(axis=0, ddof=1) / math.sqrt(allv.shape[0])
    rate = _fit_rate(lags, mean, e)
    rates = np.array([_fit_rate(lags, p.mean(axis=0), e) for p in parts])
    rate_se = float(rates.std(ddof=1) / math.sqrt(rates.size))
    fit = 2 * e * np.exp(-rate * lags)
    resid = float(np.linalg.norm(mean - fit) / np.linalg.norm(mean))
    if rtol is not None and rate_se > rtol * rate:
        raise InsufficientSamples(f"rate error {rate_se:.3g} exceeds {rtol} relative")
    return AutocorrelationCurve(e, lags, mean, se, rate, rate_se, m.relaxation_rate, resid,
                                allv.shape[0])


# heat equation comparison

@dataclass
class HeatSolution:
    D: float
    weight: float
    d: int = 3

    def density(self, T: float, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        r2 = np.sum(X * X, axis=-1)
        return self.weight * (4 * math.pi * self.D * T) ** (-self.d / 2) * np.exp(-r2 / (4 * self.D * T))


def heat_weight(state_sq: Callable, e: float, d: int = 3) -> float:
    """[|psi_0|^2](e), the energy density of the initial state."""
    return coarea_bracket(state_sq, e, d)


def _positions_chunk(args) -> np.ndarray:
    spec, seed, task, n, times = args
    rng = task_rng(seed, task)
    phi = uniform_directions(rng, n, spec.d)
    pos = np.zeros((n, times.size, spec.d))
    speed = math.sqrt(2 * spec.e) / (2 * math.pi)

    def record(idx, start, stop):
        # each recorded time gets the part of this flight before it
        dur = np.clip(np.minimum(stop[:, None], times[None, :]) - start[:, None], 0, None)
        pos[idx] += dur[:, :, None] * (speed * phi[idx])[:, None, :]

    _advance(spec, rng, phi, float(times.max()), record)
    return pos


@dataclass
class HeatReport:
    e: float
    D: float
    times: np.ndarray
    variances: np.ndarray  # per-coordinate, averaged over coordinates
    var_stderr: np.ndarray
    predicted: np.ndarray  # 2 D T
    slope: float
    slope_stderr: float
    ks_pvalues: list[float]
    msd: float
    n_traj: int
    rel_error: float

    @property
    def passed(self) -> bool:
        return self.rel_error < 0.05 and abs(self.slope / (2 * self.D) - 1) < 0.05 \
            and min(self.ks_pvalues) > 0.01

    def to_json(self) -> dict:
        return {"e": self.e, "D": self.D, "times": self.times.tolist(),
                "variances": self.variances.tolist(), "varStderr": self.var_stderr.tolist(),
                "predicted": self.predicted.tolist(), "slope": self.slope,
                "slopeStderr": self.slope_stderr, "ksPvalues": self.ks_pvalues,
                "msd": self.msd, "nTraj": self.n_traj, "relError": self.rel_error,
                "passed": self.passed}


def simulate_positions(e: float, times: np.ndarray, n_traj: int, seed: int,
                       profile: RadialProfile | None = None, d: int = 3, *,
                       chunk: int = 10_000, workers: int = 1, method: str = "auto") -> np.ndarray:
    """X(T) for each walker at each requested time, shape (n_traj, len(times), d)."""
    profile = profile or gaussian_potential()
    m = sigma_moments(e, profile, d)
    spec = EnsembleSpec(e, profile, d, method, m.sigma0)
    times = np.asarray(times, float)
    tasks = [(spec, seed, i, n, times) for i, n in enumerate(task_chunks(n_traj, chunk))]
    return np.concatenate(_map(_positions_chunk, tasks, workers))


def heat_compare(e: float, T: float | None = None, n_traj: int = 20_000, seed: int = 0,
                 profile: RadialProfile | None = None, d: int = 3, *, n_times: int = 5,
                 chunk: int = 10_000, workers: int = 1, method: str = "auto") -> HeatReport:
    """Compare the spread of X(T) with the heat kernel of diffusion constant D_e.

    T defaults to 400 relaxation times, where the finite-time variance
    deficit 2 D_e tau is a 0.25% effect.  The variance slope is fitted over
    n_times equally spaced times in [T/n_times, T]; the KS test uses the
    coordinates at T against N(0, 2 D_e T).
    """
    profile = profile or gaussian_potential()
    m = sigma_moments(e, profile, d)
    D = 2 * e / ((2 * math.pi) ** 2 * d * m.relaxation_rate)
    if T is None:
        T = 400 / m.relaxation_rate
    if T * m.sigma0 < 10:
        raise InsufficientSamples("T too short: fewer than 10 collisions expected")
    times = np.linspace(T / n_times, T, n_times)
    X = simulate_positions(e, times, n_traj, seed, profile, d, chunk=chunk, workers=workers,
                           method=method)
    var = np.mean(X**2, axis=(0, 2))
    per_coord = np.mean(X**2, axis=0)  # (times, d)
    var_se = np.std(np.mean(X**2, axis=2), axis=0, ddof=1) / math.sqrt(n_traj)
    slope, intercept = np.polyfit(times, var, 1)
    resid = var - (slope * times + intercept)
    sxx = np.sum((times - times.mean()) ** 2)
    slope_se = float(math.sqrt(np.sum(resid**2) / max(n_times - 2, 1) / sxx)) if n_times > 2 else 0.0
    sd = math.sqrt(2 * D * T)
    pvals = [float(stats.kstest(X[:, -1, j], "norm", args=(0, sd)).pvalue) for j in range(d)]
    msd = float(np.sum(per_coord[-1]))
    return HeatReport(e, D, times, var, var_se, 2 * D * times, float(slope), slope_se, pvals,
                      msd, n_traj, float(abs(var[-1] / (2 * D * T) - 1)))


def exact_variance(e: float, T: float, profile: RadialProfile | None = None, d: int = 3) -> float:
    """Per-coordinate Var X(T) for the jump process: 2D (T - tau (1 - exp(-T/tau)))."""
    m = sigma_moments(e, profile, d)
    tau = 1 / m.relaxation_rate
    D = 2 * e / ((2 * math.pi) ** 2 * d * m.relaxation_rate)
    return 2 * D * (T - tau * (1 - math.exp(-T / tau)))


def final_directions(e: float, t: float, n: int, seed: int, profile: RadialProfile | None = None,
                     d: int = 3, start: np.ndarray | None = None,
                     method: str = "auto") -> np.ndarray:
    """Directions at time t of n walkers all started from ``start`` (default e_d)."""
    profile = profile or gaussian_potential()
    m = sigma_moments(e, profile, d)
    spec = EnsembleSpec(e, profile, d, method, m.sigma0)
    rng = task_rng(seed, 0)
    s = np.zeros(d)
    s[-1] = 1.0
    s = s if start is None else np.asarray(start, float) / np.linalg.norm(start)
    phi = np.tile(s, (n, 1))
    return _advance(spec, rng, phi, t, lambda *a: None)


def jump_statistics(e: float, n_jumps: int, seed: int, profile: RadialProfile | None = None,
                    d: int = 3, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """(waiting times, jump cosines) for n_jumps independent jumps."""
    profile = profile or gaussian_potential()
    m = sigma_moments(e, profile, d)
    rng = task_rng(seed, 0)
    waits = rng.exponential(1 / m.sigma0, n_jumps)
    cos = DirectionSampler(e, profile, d, method).cosines(rng, n_jumps)
    return waits, cos
