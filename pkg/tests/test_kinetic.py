import math

import numpy as np
import pytest
from scipy import stats

from artifact import kinetic as kn
from artifact.profiles import constant_potential, gaussian_potential, gaussian_state
from artifact.rng import task_rng


def _gauss_sigma0(e):
    return 2 * math.pi * (math.pi / math.sqrt(2)) * (1 - math.exp(-8 * e)) / math.sqrt(e)


def test_coarea_bracket_unit():
    assert kn.coarea_bracket(lambda r: np.ones_like(r), 0.5, 3) == pytest.approx(4 * math.pi)
    assert kn.coarea_bracket(lambda r: np.ones_like(r), 0.0, 3) == 0.0


def test_coarea_total_is_full_integral():
    assert kn.coarea_total(lambda r: np.exp(-r * r), 3) == pytest.approx(math.pi**1.5, rel=1e-10)
    assert kn.coarea_total(lambda r: np.exp(-r * r), 2) == pytest.approx(math.pi, rel=1e-10)


@pytest.mark.parametrize("e", [0.25, 1.0, 4.0])
def test_gaussian_moments_closed_form(e):
    m = kn.sigma_moments(e)
    assert m.sigma0 == pytest.approx(_gauss_sigma0(e), rel=1e-10)
    assert m.mean_cos == pytest.approx(kn.gaussian_mean_cos(e), rel=1e-9)
    assert 0 < m.sigma1 < m.sigma0


def test_constant_profile_is_isotropic():
    prof = constant_potential(1.0)
    for e in (0.5, 2.0):
        m = kn.sigma_moments(e, prof)
        assert abs(m.sigma1) < 1e-10 * m.sigma0
        assert m.sigma0 == pytest.approx(2 * math.pi * math.sqrt(2 * e) * 4 * math.pi)
        D = kn.diffusion_closed_form(e, prof)
        assert D == pytest.approx(2 * e / (3 * (2 * math.pi) ** 2 * m.sigma0), rel=1e-10)


def test_large_energy_scaling():
    es = np.geomspace(10, 100, 6)
    y = [math.log(kn.diffusion_closed_form(e) * kn.sigma_moments(e).sigma0 / e**2) for e in es]
    assert abs(np.polyfit(np.log(es), y, 1)[0]) < 0.05


def test_samplers_agree():
    e = 0.7
    prof = gaussian_potential()
    a = kn.DirectionSampler(e, prof, 3, "inverse").cosines(task_rng(1, 0), 20_000)
    b = kn.DirectionSampler(e, prof, 3, "rejection").cosines(task_rng(1, 1), 20_000)
    assert stats.ks_2samp(a, b).pvalue > 0.01
    for c in (a, b):
        assert abs(c.mean() - kn.gaussian_mean_cos(e)) < 4 * c.std() / math.sqrt(c.size)
        assert np.all(np.abs(c) <= 1)


def test_inverse_sampler_requires_gaussian():
    with pytest.raises(ValueError):
        kn.DirectionSampler(1.0, constant_potential(), 3, "inverse")


def test_constant_kernel_gives_uniform_jumps():
    c = kn.DirectionSampler(1.0, constant_potential(), 3).cosines(task_rng(2, 0), 20_000)
    assert stats.kstest(c, "uniform", args=(-1, 2)).pvalue > 0.01


def test_jump_statistics():
    e = 1.0
    m = kn.sigma_moments(e)
    waits, cos = kn.jump_statistics(e, 50_000, 3)
    assert abs(waits.mean() * m.sigma0 - 1) < 4 / math.sqrt(waits.size)
    assert abs(cos.mean() - m.mean_cos) < 4 * cos.std() / math.sqrt(cos.size)


def test_single_trajectory():
    tr = kn.sample_jump_chain(1.0, 5.0, seed=4)
    assert np.allclose(tr.position(0.0), 0)
    assert np.allclose(np.linalg.norm(tr.directions, axis=1), 1)
    assert np.all(np.diff(tr.jump_times) > 0) and tr.jump_times.max() < 5.0
    # free flight before the first jump at speed sqrt(2e)/(2 pi)
    t1 = 0.5 * tr.jump_times[0]
    assert np.linalg.norm(tr.position(t1)) == pytest.approx(t1 * math.sqrt(2) / (2 * math.pi))
    with pytest.raises(ValueError):
        kn.sample_jump_chain(-1.0, 1.0, 0)


def test_directions_mix_to_uniform():
    e = 1.0
    t = 20 / kn.sigma_moments(e).relaxation_rate
    final = kn.final_directions(e, t, 10_000, 5)
    assert stats.kstest(final[:, -1], "uniform", args=(-1, 2)).pvalue > 0.01


def test_diffusion_monte_carlo_small():
    est = kn.diffusion_constant(1.0, mode="monteCarlo", n_traj=20_000, seed=3)
    assert abs(est.z_score) < 3
    assert est.closed_form == pytest.approx(kn.diffusion_closed_form(1.0))
    cf = kn.diffusion_constant(1.0)
    assert cf.mode == "closedForm" and cf.value == cf.closed_form


def test_diffusion_worker_invariance():
    a = kn.diffusion_constant(1.0, mode="monteCarlo", n_traj=6_000, seed=9, chunk=2_000, workers=1)
    b = kn.diffusion_constant(1.0, mode="monteCarlo", n_traj=6_000, seed=9, chunk=2_000, workers=3)
    assert a.value == b.value and a.stderr == b.stderr


def test_autocorrelation_small():
    ac = kn.autocorrelation(1.0, n_traj=20_000, seed=1)
    assert ac.mean[0] == pytest.approx(2.0, rel=1e-12)
    assert abs(ac.rate - ac.predicted_rate) < 4 * ac.rate_stderr
    assert ac.fit_residual < 0.05


def test_variance_matches_exact_finite_time_law():
    e = 1.0
    tau = 1 / kn.sigma_moments(e).relaxation_rate
    times = np.array([2 * tau, 10 * tau])
    X = kn.simulate_positions(e, times, 20_000, 6)
    for j, T in enumerate(times):
        sq = np.mean(X[:, j, :] ** 2, axis=1)
        assert abs(sq.mean() - kn.exact_variance(e, T)) < 4 * sq.std() / math.sqrt(sq.size)


def test_heat_solution_normalized():
    hs = kn.HeatSolution(D=0.3, weight=2.0)
    g = np.linspace(-8, 8, 81)
    X = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    assert np.sum(hs.density(1.0, X)) * 0.2**3 == pytest.approx(2.0, rel=1e-6)
    w = kn.heat_weight(gaussian_state(3).sq, 0.5)
    assert w > 0
