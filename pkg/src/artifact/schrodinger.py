"""Random Schrodinger sandbox on a periodic box.

H = -(2 pi)^-2 Delta / 2 + lambda V, so a plane wave exp(2 pi i p.x) has
energy e(p) = p^2 / 2.  V(x) = sum_gamma v_gamma B(x - y_gamma) with Poisson
centres in [0, L)^d and Rademacher weights; B is the inverse Fourier
transform of the potential profile.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CFLViolation
from .profiles import RadialProfile, gaussian_potential
from .rng import task_rng

CFL_POTENTIAL = 0.5  # max lambda |V|_inf dt
CFL_KINETIC = math.pi  # max e_max dt


@dataclass
class BoxGrid:
    """Uniform periodic grid with n points per side on [0, L)^d."""

    n: int
    length: float
    d: int = 2

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    def axes(self) -> list[np.ndarray]:
        return [self.h * np.arange(self.n)] * self.d

    def coords(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def momenta(self) -> list[np.ndarray]:
        k = np.fft.fftfreq(self.n, d=self.h)
        return np.meshgrid(*([k] * self.d), indexing="ij")

    def p2(self) -> np.ndarray:
        return sum(p * p for p in self.momenta())

    @property
    def e_max(self) -> float:
        return self.d * (0.5 / self.h) ** 2 / 2

    @property
    def cell(self) -> float:
        return self.h**self.d


@dataclass
class WaveFunction:
    grid: BoxGrid
    values: np.ndarray

    def norm(self) -> float:
        return float(math.sqrt(self.grid.cell * np.sum(np.abs(self.values) ** 2)))

    def normalized(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.values / self.norm())

    def momentum(self) -> np.ndarray:
        return self.grid.cell * np.fft.fftn(self.values)

    def position_moments(self, center: np.ndarray) -> tuple[np.ndarray, float]:
        """(<x - center>, <|x - center|^2>) with minimum-image displacements."""
        rho = np.abs(self.values) ** 2 * self.grid.cell
        L = self.grid.length
        mean, msd = [], 0.0
        for x, c in zip(self.grid.coords(), center):
            dx = (x - c + L / 2) % L - L / 2
            mean.append(float(np.sum(rho * dx)))
            msd += float(np.sum(rho * dx * dx))
        return np.array(mean), msd


def gaussian_wavepacket(grid: BoxGrid, center, width: float, p0) -> WaveFunction:
    """|psi|^2 Gaussian of per-axis std ``width`` with mean momentum p0."""
    vals = np.ones(grid.shape, complex)
    L = grid.length
    for x, c, p in zip(grid.coords(), center, p0):
        dx = (x - c + L / 2) % L - L / 2
        vals = vals * np.exp(-dx * dx / (4 * width * width) + 2j * math.pi * p * dx)
    return WaveFunction(grid, vals).normalized()


@dataclass
class PoissonPotential:
    length: float
    d: int
    centers: np.ndarray  # (M, d)
    weights: np.ndarray  # (M,)
    profile: RadialProfile
    seed: int = 0

    @property
    def m(self) -> int:
        return self.weights.size

    def on_grid(self, grid: BoxGrid) -> np.ndarray:
        """V on the grid from the structure factor, exact for the periodized sum."""
        if grid.length != self.length or grid.d != self.d:
            raise ValueError("grid does not match the potential box")
        if self.m == 0:
            return np.zeros(grid.shape)
        k = np.fft.fftfreq(grid.n, d=grid.h)
        phases = [np.exp(-2j * math.pi * np.outer(self.centers[:, a], k)) for a in range(self.d)]
        # S(k) = sum_gamma v_gamma exp(-2 pi i k.y_gamma), one axis at a time
        letters = "abcdefgh"[:self.d]
        expr = "m," + ",".join(f"m{c}" for c in letters) + "->" + letters
        S = np.einsum(expr, self.weights.astype(complex), *phases)
        kk = np.sqrt(sum(q * q for q in np.meshgrid(*([k] * self.d), indexing="ij")))
        Vhat = self.profile(kk) * S / self.length**self.d
        return np.real(np.fft.ifftn(Vhat) * grid.n**self.d)


def sample_poisson_potential(L: float, profile: RadialProfile | None = None, seed: int = 0,
                             d: int = 2, task: int = 0) -> PoissonPotential:
    """M ~ Poisson(L^d) centres uniform in the box with Rademacher weights."""
    if L <= 0:
        raise ValueError("L must be positive")
    profile = profile or gaussian_potential()
    rng = task_rng(seed, task)
    m = int(rng.poisson(L**d))
    centers = rng.uniform(0, L, (m, d))
    weights = rng.choice([-1.0, 1.0], m)
    return PoissonPotential(L, d, centers, weights, profile, seed)


@dataclass
class Evolution:
    psi: WaveFunction
    times: np.ndarray
    norms: np.ndarray
    msd: np.ndarray
    dt: float
    steps: int
    extra: dict = field(default_factory=dict)

    @property
    def unitarity_error(self) -> float:
        return float(np.max(np.abs(self.norms - self.norms[0])))


def evolve_splitstep(psi0: WaveFunction, potential: PoissonPotential | None, lam: float,
                     t: float, dt: float, *, record_every: int = 1,
                     center=None) -> Evolution:
    """Strang splitting: half potential kick, exact kinetic step, half kick.

    Raises CFLViolation if lambda |V|_inf dt > 0.5 or e_max dt > pi.
    """
    grid = psi0.grid
    if t < 0 or dt <= 0:
        raise ValueError("need t >= 0 and dt > 0")
    V = potential.on_grid(grid) if potential is not None else np.zeros(grid.shape)
    vmax = float(np.max(np.abs(V))) if V.size else 0.0
    if lam * vmax * dt > CFL_POTENTIAL:
        raise CFLViolation(f"lambda |V|_inf dt = {lam * vmax * dt:.3g} > {CFL_POTENTIAL}")
    if grid.e_max * dt > CFL_KINETIC:
        raise CFLViolation(f"e_max dt = {grid.e_max * dt:.3g} > pi")
    steps = int(round(t / dt))
    if abs(steps * dt - t) > 1e-9 * max(t, 1):
        raise ValueError("t must be a multiple of dt")
    kin = np.exp(-0.5j * dt * grid.p2())
    half_kick = np.exp(-0.5j * dt * lam * V)
    if center is None:
        center = [float(np.sum(np.abs(psi0.values) ** 2 * x) * grid.cell) for x in grid.coords()]
    psi = psi0.values.copy()
    times, norms, msd = [0.0], [psi0.norm()], [psi0.position_moments(center)[1]]
    for s in range(1, steps + 1):
        psi = half_kick * np.fft.ifftn(kin * np.fft.fftn(half_kick * psi))
        if s % record_every == 0 or s == steps:
            w = WaveFunction(grid, psi)
            times.append(s * dt)
            norms.append(w.norm())
            msd.append(w.position_moments(center)[1])
    return Evolution(WaveFunction(grid, psi), np.array(times), np.array(norms), np.array(msd),
                     dt, steps)


def free_exact(psi0: WaveFunction, t: float) -> WaveFunction:
    """Exact free propagation exp(-i t p^2 / 2) in momentum space."""
    g = psi0.grid
    return WaveFunction(g, np.fft.ifftn(np.exp(-0.5j * t * g.p2()) * np.fft.fftn(psi0.values)))


def convergence_order(psi0: WaveFunction, potential: PoissonPotential, lam: float, t: float,
                      dts: list[float], dt_ref: float) -> tuple[list[float], list[float]]:
    """Errors at each dt against a fine reference and the observed orders."""
    ref = evolve_splitstep(psi0, potential, lam, t, dt_ref).psi.values
    errs = []
    for dt in dts:
        v = evolve_splitstep(psi0, potential, lam, t, dt).psi.values
        errs.append(float(math.sqrt(psi0.grid.cell * np.sum(np.abs(v - ref) ** 2))))
    orders = [math.log(errs[i] / errs[i + 1]) / math.log(dts[i] / dts[i + 1])
              for i in range(len(dts) - 1)]
    return errs, orders


def _msd_task(args):
    grid, seed, task, lam, t, dt, width, p0, every = args
    pot = sample_poisson_potential(grid.length, None, seed, grid.d, task)
    c = [grid.length / 2] * grid.d
    psi0 = gaussian_wavepacket(grid, c, width, p0)
    ev = evolve_splitstep(psi0, pot, lam, t, dt, record_every=every, center=c)
    return ev.times, ev.msd, ev.unitarity_error


@dataclass
class MSDReport:
    times: np.ndarray
    msd: np.ndarray
    stderr: np.ndarray
    log_slopes: np.ndarray
    envelope_c1: float
    unitarity: float
    n_real: int

    @property
    def slope_decreasing(self) -> bool:
        """Local log-log slope ends lower than it starts."""
        s = self.log_slopes
        return bool(s.size >= 2 and s[-1] < s[0])

    @property
    def under_t4(self) -> bool:
        return bool(np.all(self.log_slopes <= 4 + 1e-9))

    def to_rows(self) -> list[dict]:
        return [{"t": float(t), "msd": float(m), "stderr": float(s)}
                for t, m, s in zip(self.times, self.msd, self.stderr)]


def ensemble_msd(grid: BoxGrid, lam: float, t: float, dt: float, n_real: int = 32, seed: int = 0,
                 width: float = 1.0, p0=None, record_every: int = 5, workers: int = 1) -> MSDReport:
    """Mean-square displacement growth averaged over potential realizations."""
    p0 = p0 if p0 is not None else [1.0] + [0.0] * (grid.d - 1)
    tasks = [(grid, seed, i, lam, t, dt, width, p0, record_every) for i in range(n_real)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_msd_task, tasks))
    else:
        out = [_msd_task(a) for a in tasks]
    times = out[0][0]
    M = np.array([o[1] for o in out])
    mean = M.mean(axis=0)
    se = M.std(axis=0, ddof=1) / math.sqrt(n_real) if n_real > 1 else np.zeros_like(mean)
    growth = mean - mean[0]
    pos = times > 0
    lt, lg = np.log(times[pos]), np.log(np.maximum(growth[pos], 1e-300))
    slopes = np.diff(lg) / np.diff(lt)
    c1 = float(np.max(growth[pos] / times[pos] ** 4))
    return MSDReport(times, mean, se, slopes, c1, max(o[2] for o in out), n_real)
