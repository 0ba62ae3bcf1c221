import math

import numpy as np
import pytest

from artifact import schrodinger as sc
from artifact.errors import CFLViolation


@pytest.fixture(scope="module")
def setup():
    grid = sc.BoxGrid(128, 16.0, 2)
    pot = sc.sample_poisson_potential(16.0, seed=0)
    psi0 = sc.gaussian_wavepacket(grid, [8.0, 8.0], 1.0, [1.0, 0.0])
    return grid, pot, psi0


def test_packet_normalized(setup):
    grid, _, psi0 = setup
    assert psi0.norm() == pytest.approx(1.0, abs=1e-14)
    mean, msd = psi0.position_moments([8.0, 8.0])
    assert np.allclose(mean, 0, atol=1e-12) and msd == pytest.approx(2.0, rel=1e-10)


def test_free_evolution_exact(setup):
    _, _, psi0 = setup
    ev = sc.evolve_splitstep(psi0, None, 0.0, 2.0, 0.04)
    assert np.max(np.abs(ev.psi.values - sc.free_exact(psi0, 2.0).values)) < 1e-10


def test_free_msd_growth(setup):
    # X moves at velocity p / (2 pi); |psi^|^2 has per-axis variance 1 / (16 pi^2)
    _, _, psi0 = setup
    t = 1.0
    ev = sc.evolve_splitstep(psi0, None, 0.0, t, 0.04, center=[8.0, 8.0])
    p2 = 1.0 + 2 / (16 * math.pi**2)
    assert ev.msd[-1] == pytest.approx(2.0 + t * t * p2 / (4 * math.pi**2), rel=1e-8)


def test_unitarity_and_order(setup):
    _, pot, psi0 = setup
    ev = sc.evolve_splitstep(psi0, pot, 1.0, 2.0, 0.04)
    assert ev.unitarity_error < 1e-10
    errs, orders = sc.convergence_order(psi0, pot, 1.0, 0.8, [0.04, 0.02, 0.01], 0.04 / 64)
    assert abs(orders[-1] - 2) < 0.2
    assert errs[0] > errs[1] > errs[2]


def test_cfl(setup):
    _, pot, psi0 = setup
    with pytest.raises(CFLViolation):
        sc.evolve_splitstep(psi0, None, 0.0, 1.0, 0.5)
    with pytest.raises(CFLViolation):
        sc.evolve_splitstep(psi0, pot, 100.0, 0.04, 0.04)


def test_potential_structure_factor():
    grid = sc.BoxGrid(128, 8.0, 2)
    pot = sc.PoissonPotential(8.0, 2, np.array([[4.0, 4.0]]), np.array([1.0]),
                              sc.gaussian_potential())
    X, Y = grid.coords()
    r2 = (X - 4.0) ** 2 + (Y - 4.0) ** 2
    # inverse transform of exp(-p^2 / 2) in 2D
    B = 2 * math.pi * np.exp(-2 * math.pi**2 * r2)
    assert np.max(np.abs(pot.on_grid(grid) - B)) < 1e-12


def test_empty_box():
    pot = sc.sample_poisson_potential(0.1, seed=1)
    assert pot.m == 0
    assert np.all(pot.on_grid(sc.BoxGrid(8, 0.1, 2)) == 0)


def test_poisson_mean():
    ms = [sc.sample_poisson_potential(3.0, seed=0, task=i).m for i in range(400)]
    assert abs(np.mean(ms) - 9) < 4 * 3 / math.sqrt(400)


def test_ensemble_msd_sublinear_trend():
    grid = sc.BoxGrid(128, 16.0, 2)
    rep = sc.ensemble_msd(grid, 0.3, 2.0, 0.04, n_real=6, seed=0, record_every=10)
    assert rep.under_t4
    assert rep.unitarity < 1e-10
    assert np.all(np.isfinite(rep.log_slopes))
