import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import wigner as wg
from artifact.cli import wigner_states
from artifact.errors import GridTooCoarse

GRID = wg.Grid1D.centered(512, 40.0)


def _obs(x, v):
    return np.exp(-x**2 / 8.0) * np.cos(2 * v)


@pytest.mark.parametrize("name", ["gaussian", "two-bump", "cat"])
@pytest.mark.parametrize("eps", [1.0, 0.1])
def test_identities(name, eps):
    psi = wigner_states(GRID)[name]
    err = wg.identity_errors(psi, GRID, eps)
    assert max(err["normalization"], err["xMarginal"], err["vMarginal"]) < 1e-10
    assert err["imagMax"] < 1e-10


@pytest.mark.parametrize("name", ["gaussian", "two-bump", "cat"])
def test_identities_periodic(name):
    psi = wigner_states(GRID)[name]
    err = wg.identity_errors(psi, GRID, 1.0, periodic=True)
    assert max(err["normalization"], err["xMarginal"], err["vMarginal"]) < 1e-10


def test_gaussian_closed_form_and_positive():
    psi = wg.gaussian_packet(GRID, 1.5, 1.2, 0.4)
    w = wg.wigner(psi, GRID)
    XX, VV = np.meshgrid(w.X, w.v, indexing="ij")
    assert np.max(np.abs(w.W - wg.gaussian_wigner(XX, VV, 1.5, 1.2, 0.4))) < 1e-10
    assert w.W.min() > -1e-12


def test_two_bump_fringes():
    a, s = 4.0, 1.0
    psi = wg.gaussian_packet(GRID, a, s) + wg.gaussian_packet(GRID, -a, s)
    psi /= math.sqrt(wg.norm2(psi, GRID))
    w = wg.wigner(psi, GRID)
    XX, VV = np.meshgrid(w.X, w.v, indexing="ij")
    assert np.max(np.abs(w.W - wg.two_bump_wigner(XX, VV, a, s))) < 1e-10
    # interference at the midpoint takes negative values
    mid = np.argmin(np.abs(w.X))
    assert w.W[mid].min() < -0.1


def test_too_coarse_grid():
    coarse = wg.Grid1D.centered(64, 40.0)
    with pytest.raises(GridTooCoarse):
        wg.wigner(wg.gaussian_packet(coarse, 0.0, 0.2, 0.0), coarse)
    with pytest.raises(GridTooCoarse):
        wg.wigner(wg.gaussian_packet(GRID, 18.0, 1.0), GRID)


def test_rescaling():
    psi = wigner_states(GRID)["cat"]
    w1 = wg.wigner(psi, GRID)
    w2 = wg.wigner(psi, GRID, 0.25)
    assert np.allclose(w2.X, 0.25 * w1.X)
    assert np.allclose(w2.W, 4 * w1.W)
    assert w2.total() == pytest.approx(w1.total())


def test_continuity_zero_perturbation():
    p1 = wg.gaussian_packet(GRID, 0.0, 1.6, 0.2)
    rep = wg.wigner_continuity_check(p1, 0 * p1, _obs, GRID)
    assert rep.lhs == 0.0 and rep.holds


def test_continuity_random_perturbations():
    rng = np.random.default_rng(0)
    p1 = wg.gaussian_packet(GRID, 0.0, 1.6, 0.2)
    worst = 0.0
    for _ in range(30):
        z = wg.gaussian_packet(GRID, rng.uniform(-4, 4), rng.uniform(0.8, 2.0), rng.uniform(-1, 1))
        z = z - np.vdot(p1, z) * GRID.h * p1
        z *= 0.1 / math.sqrt(wg.norm2(z, GRID))
        rep = wg.wigner_continuity_check(p1, z, _obs, GRID)
        worst = max(worst, rep.ratio)
    assert worst <= 1


def test_continuity_linear_in_perturbation():
    p1 = wg.gaussian_packet(GRID, 0.0, 1.6, 0.2)
    z = wg.gaussian_packet(GRID, 1.0, 1.0, 0.2)
    amps = (1e-2, 1e-3, 1e-4)
    # generic observable: the cross term dominates and LHS is linear in |psi2|
    lhs = [wg.wigner_continuity_check(p1, a * z, lambda x, v: np.exp(-x**2 / 8.0), GRID).lhs
           for a in amps]
    assert lhs[0] / lhs[1] == pytest.approx(10, rel=0.05)
    assert lhs[1] / lhs[2] == pytest.approx(10, rel=0.01)
    # LHS / |psi2| never grows as the perturbation shrinks
    q = [wg.wigner_continuity_check(p1, a * z, _obs, GRID).lhs / a for a in amps]
    assert q[0] >= q[1] >= q[2]


@settings(max_examples=25, deadline=None)
@given(st.floats(-4, 4), st.floats(0.8, 1.5), st.floats(-1.5, 1.5))
def test_marginals_property(center, s, p0):
    psi = wg.gaussian_packet(GRID, center, s, p0)
    err = wg.identity_errors(psi, GRID)
    assert max(err["normalization"], err["xMarginal"], err["vMarginal"]) < 1e-10
