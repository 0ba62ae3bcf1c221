"""Wigner transform of 1D wave functions on a uniform grid.

W(x, v) = int exp(2 pi i v eta) conj psi(x + eta/2) psi(x - eta/2) d eta.
psi is trigonometrically interpolated to the half-spacing grid so that
x +- eta/2 land on grid points, and the eta integral becomes an FFT.

Two geometries are offered.  ``periodic=False`` (default) treats psi as
zero outside the box, which is the whole-line transform of a localized
state.  ``periodic=True`` integrates eta over one period of the torus; its
identities are exact for any band-limited psi but a localized packet also
produces a ghost image half a box away.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import GridTooCoarse

NYQUIST_BAND = 0.5  # modes above half the Nyquist frequency must be empty
NYQUIST_TOL = 1e-12
EDGE_TOL = 1e-12


@dataclass
class Grid1D:
    """Periodic grid x_n = x0 + n h on a box of length L = N h."""

    n: int
    length: float
    x0: float = 0.0

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.n)

    @property
    def p(self) -> np.ndarray:
        """Momenta k / L in FFT order."""
        return np.fft.fftfreq(self.n, d=self.h)

    @classmethod
    def centered(cls, n: int, length: float) -> "Grid1D":
        return cls(n, length, -length / 2)


def fourier(psi: np.ndarray, grid: Grid1D) -> np.ndarray:
    """psi^(p_k) = int exp(-2 pi i p_k x) psi(x) dx by the rectangle rule."""
    phase = np.exp(-2j * np.pi * grid.p * grid.x0)
    return grid.h * phase * np.fft.fft(psi)


def norm2(psi: np.ndarray, grid: Grid1D) -> float:
    return float(grid.h * np.sum(np.abs(psi) ** 2))


def nyquist_mass(psi: np.ndarray) -> float:
    """Fraction of spectral mass in the outer band of resolvable modes."""
    c = np.abs(np.fft.fft(psi)) ** 2
    k = np.abs(np.fft.fftfreq(psi.size) * psi.size)
    band = k >= (1 - NYQUIST_BAND) * psi.size / 2
    tot = c.sum()
    return float(c[band].sum() / tot) if tot > 0 else 0.0


def _half_grid(psi: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation to 2N points (spacing h/2)."""
    n = psi.size
    c = np.fft.fft(psi)
    big = np.zeros(2 * n, complex)
    half = n // 2
    big[:half] = c[:half]
    big[-(n - half):] = c[half:]
    if n % 2 == 0:  # split the Nyquist mode symmetrically
        big[half] = 0.5 * c[half]
        big[-half] = 0.5 * c[half]
    return 2 * np.fft.ifft(big)


@dataclass
class WignerGrid:
    """W^eps sampled at (X_n, v_m) with X = eps x and v in FFT order."""

    X: np.ndarray
    v: np.ndarray
    W: np.ndarray
    eps: float
    length: float
    imag_max: float = 0.0
    periodic: bool = False

    @property
    def dX(self) -> float:
        return self.eps * self.length / self.X.size

    @property
    def stride(self) -> int:
        """v columns per momentum step 1/L."""
        return 2 if self.periodic else 4

    @property
    def dv(self) -> float:
        return 1 / (self.stride * self.length)

    def total(self) -> float:
        return float(np.sum(self.W) * self.dX * self.dv)

    def x_marginal(self) -> np.ndarray:
        return self.W.sum(axis=1) * self.dv

    def v_marginal(self) -> np.ndarray:
        """int W dX at v = k / L, in FFT order.

        On the torus the ghost image carries the same mass at these v, so
        the periodic sum is halved.
        """
        half = 0.5 if self.periodic else 1.0
        return half * self.W[:, ::self.stride].sum(axis=0) * self.dX

    def pair(self, obs: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        XX, VV = np.meshgrid(self.X, self.v, indexing="ij")
        return float(np.sum(obs(XX, VV) * self.W) * self.dX * self.dv)


def edge_mass(psi: np.ndarray) -> float:
    """Largest |psi|^2 in the outer 2% of the box, relative to the peak."""
    a = np.abs(psi) ** 2
    m = max(1, psi.size // 50)
    peak = a.max()
    return float(max(a[:m].max(), a[-m:].max()) / peak) if peak > 0 else 0.0


def wigner(psi: np.ndarray, grid: Grid1D, eps: float = 1.0, *, periodic: bool = False,
           tol: float = NYQUIST_TOL, edge_tol: float = EDGE_TOL) -> WignerGrid:
    """Rescaled Wigner transform W^eps(X, v) = eps^-1 W(X / eps, v).

    Raises GridTooCoarse if psi has spectral mass above half the Nyquist
    frequency, where the eta oscillation is unresolved, or (whole-line mode)
    if psi is not negligible at the box edge.
    """
    psi = np.asarray(psi, complex)
    if psi.ndim != 1 or psi.size != grid.n:
        raise ValueError("psi must be a 1D array on the grid")
    if eps <= 0:
        raise ValueError("eps must be positive")
    mass = nyquist_mass(psi)
    if mass > tol:
        raise GridTooCoarse(f"spectral mass {mass:.3g} near Nyquist exceeds {tol:.3g}")
    n = grid.n
    f = _half_grid(psi)
    rows = 2 * np.arange(n)[:, None]
    if periodic:
        j = np.arange(2 * n)
        g = np.conj(f[(rows + j) % (2 * n)]) * f[(rows - j) % (2 * n)]
    else:
        if edge_mass(psi) > edge_tol:
            raise GridTooCoarse(f"state not localized: edge mass {edge_mass(psi):.3g}")
        fz = np.concatenate([f, np.zeros(2 * n, complex)])  # zero outside the box
        j = np.fft.fftfreq(4 * n, d=1 / (4 * n)).astype(int)  # -2n .. 2n-1 in FFT order
        a, b = rows + j, rows - j
        g = np.conj(fz[np.where((a >= 0) & (a < 2 * n), a, -1)]) * \
            fz[np.where((b >= 0) & (b < 2 * n), b, -1)]
    W = grid.h * g.shape[1] * np.fft.ifft(g, axis=1)
    # g_{-j} = conj g_j, so the imaginary part is round-off
    v = np.fft.fftfreq(g.shape[1], d=grid.h)
    return WignerGrid(eps * grid.x, v, W.real / eps, eps, grid.length,
                      float(np.max(np.abs(W.imag))) / eps, periodic)


def gaussian_packet(grid: Grid1D, center: float = 0.0, s: float = 1.0,
                    p0: float = 0.0) -> np.ndarray:
    """Normalized packet with |psi|^2 = N(center, s^2) and mean momentum p0."""
    x = grid.x
    return (2 * math.pi * s * s) ** -0.25 * np.exp(-((x - center) ** 2) / (4 * s * s)
                                                   + 2j * math.pi * p0 * x)


def gaussian_wigner(x: np.ndarray, v: np.ndarray, center: float = 0.0, s: float = 1.0,
                    p0: float = 0.0) -> np.ndarray:
    return 2 * np.exp(-((x - center) ** 2) / (2 * s * s) - 8 * math.pi**2 * s * s * (v - p0) ** 2)


def two_bump_wigner(x: np.ndarray, v: np.ndarray, a: float, s: float = 1.0) -> np.ndarray:
    """Closed form for psi = phi(x - a) + phi(x + a), phi a centred packet, normalized."""
    w = (gaussian_wigner(x, v, a, s) + gaussian_wigner(x, v, -a, s)
         + 2 * np.cos(4 * math.pi * a * v) * gaussian_wigner(x, v, 0.0, s))
    norm = 2 + 2 * math.exp(-a * a / (2 * s * s))
    return w / norm


@dataclass
class ContinuityReport:
    lhs: float
    rhs: float
    obs_norm: float
    norms: tuple[float, float]
    constant: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12) + 1e-15

    def to_json(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "obsNorm": self.obs_norm,
                "norm1sq": self.norms[0], "norm2sq": self.norms[1], "C": self.constant,
                "holds": self.holds}


def observable_norm(obs: Callable, grid: Grid1D, v: np.ndarray) -> float:
    """int sup_v |O^(xi, v)| d xi, the Fourier transform taken in x."""
    XX, VV = np.meshgrid(grid.x, v, indexing="ij")
    vals = obs(XX, VV)
    ohat = grid.h * np.fft.fft(vals, axis=0)
    return float(np.sum(np.abs(ohat).max(axis=1)) / grid.length)


def wigner_continuity_check(psi1: np.ndarray, psi2: np.ndarray, obs: Callable, grid: Grid1D,
                            C: float = 2.0, periodic: bool = False) -> ContinuityReport:
    """|<O, W_psi> - <O, W_psi1>| against C ||O|| sqrt((|psi1|^2 + |psi2|^2) |psi2|^2)."""
    w = wigner(psi1 + psi2, grid, periodic=periodic)
    w1 = wigner(psi1, grid, periodic=periodic)
    lhs = abs(w.pair(obs) - w1.pair(obs))
    n1, n2 = norm2(psi1, grid), norm2(psi2, grid)
    onorm = observable_norm(obs, grid, w.v)
    rhs = C * onorm * math.sqrt((n1 + n2) * n2)
    return ContinuityReport(lhs, rhs, onorm, (n1, n2), C)


def identity_errors(psi: np.ndarray, grid: Grid1D, eps: float = 1.0,
                    periodic: bool = False) -> dict:
    """Normalization and marginal errors of W^eps for one state."""
    w = wigner(psi, grid, eps, periodic=periodic)
    nrm = norm2(psi, grid)
    xm = w.x_marginal()
    vm = w.v_marginal()
    psihat = fourier(psi, grid)
    return {
        "normalization": abs(w.total() - nrm),
        "xMarginal": float(np.max(np.abs(xm - np.abs(psi) ** 2 / eps))),
        "vMarginal": float(np.max(np.abs(vm - np.abs(psihat) ** 2))),
        "imagMax": w.imag_max,
        "minW": float(w.W.min()),
    }
