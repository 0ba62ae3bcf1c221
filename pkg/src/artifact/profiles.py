"""Radial profiles for the single-site potential and the initial state."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class RadialProfile:
    """A spherically symmetric function of |p|.

    ``func`` must accept numpy arrays.  ``cutoff`` is a radius beyond which the
    squared profile is negligible (below ~1e-25 relative), used to truncate
    momentum integrals.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    decay: float = math.inf
    cutoff: float = 8.0
    flavor: str = "potential"  # or "state"
    params: tuple = ()

    def __call__(self, r):
        return self.func(np.asarray(r, dtype=float))

    def sq(self, r):
        v = self(r)
        return np.abs(v) ** 2

    def hash(self) -> str:
        key = f"{self.name}|{self.flavor}|{self.params}|{self.cutoff}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]

    def describe(self) -> dict:
        return {"name": self.name, "flavor": self.flavor, "params": list(self.params),
                "cutoff": self.cutoff, "hash": self.hash()}


def sphere_area(d: int) -> float:
    """|S^{d-1}|, the surface area of the unit sphere in R^d."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


# module-level shapes so profiles pickle into worker processes
def _gauss(r, width, scale=1.0, z=1.0):
    return np.exp(-scale * (r / width) ** 2) / z


def _const(r, b, cutoff):
    return np.where(r <= cutoff, b, 0.0) + 0.0 * r


def gaussian_potential(width: float = 1.0) -> RadialProfile:
    """B^(p) = exp(-p^2 / (2 width^2))."""
    return RadialProfile(
        "gaussian", partial(_gauss, width=width, scale=0.5),
        cutoff=8.0 * width, flavor="potential", params=(width,))


def constant_potential(b: float = 1.0, cutoff: float = 50.0) -> RadialProfile:
    """B^ = b on a ball; on any energy shell inside the ball the kernel is isotropic."""
    return RadialProfile(
        "constant", partial(_const, b=b, cutoff=cutoff),
        cutoff=cutoff, flavor="potential", params=(b, cutoff))


def gaussian_state(d: int = 3, width: float = 1.0) -> RadialProfile:
    """psi^_0(p) = Z^-1 exp(-p^2 / width^2), normalized in L^2(R^d)."""
    z = (math.pi * width**2 / 2) ** (d / 4)
    return RadialProfile(
        "gaussian-state", partial(_gauss, width=width, z=z),
        cutoff=6.0 * width, flavor="state", params=(d, width))


PRESETS = {
    "gaussian": gaussian_potential,
    "constant": constant_potential,
}


def preset(name: str) -> RadialProfile:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown profile preset {name!r}; choose from {sorted(PRESETS)}")
