import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import selfenergy as se
from artifact.errors import HypothesisViolated, OutOfTable
from artifact.profiles import constant_potential, gaussian_potential


@pytest.fixture(scope="module")
def table():
    return se.get_table()


def test_angular_S_constant_profile():
    assert se.angular_S(0.0, constant_potential(1.0)) == pytest.approx(4 * math.pi, rel=1e-12)
    assert se.angular_S(0.7, constant_potential(2.0)) == pytest.approx(16 * math.pi, rel=1e-12)


def test_angular_S_two_methods():
    a = se.angular_S(0.5)
    assert abs(se.angular_S_grid(0.5) - a) < 1e-6
    mc, err = se.angular_S_mc(0.5, n=400_000)
    assert abs(mc - a) < 4 * err


def test_angular_S_gaussian_closed_form():
    # |B^|^2 = exp(-p^2) and the chord satisfies |p|^2 = 4e(1 - cos)
    for e in (0.01, 0.5, 3.0):
        assert se.angular_S(e) == pytest.approx(2 * math.pi * (1 - math.exp(-8 * e)) / (4 * e), rel=1e-10)


def test_angular_S_large_e_slope():
    es = np.geomspace(10, 100, 8)
    slope = np.polyfit(np.log(es), np.log([se.angular_S(e) for e in es]), 1)[0]
    assert abs(slope + 1.0) < 0.1


def test_theta_negative_alpha_real():
    v = se.theta_direct(-0.5, 0.0).value
    assert v.imag == 0 and v.real < 0


def test_theta_imaginary_part_by_construction(table):
    for a in (0.1, 0.5, 1.0, 3.0):
        ref = -math.pi * (2 * a) ** 0.5 * se.angular_S(a)
        assert complex(table(a)).imag == pytest.approx(ref, rel=1e-6)
        assert se.theta_direct(a, 0.0).value.imag == pytest.approx(ref, rel=1e-6)


def test_theta_eps_limit_and_table(table):
    for a in (0.2, 1.0, 2.5):
        zero = se.theta_direct(a, 0.0).value
        small = se.theta_direct(a, 1e-5).value
        assert abs(small - zero) / abs(zero) < 1e-3
        assert abs(complex(table(a)) - zero) / abs(zero) < 1e-4


def test_table_bounds(table):
    with pytest.raises(OutOfTable):
        table(table.e_max + 1)
    with pytest.raises(OutOfTable):
        table(-1.0)


def test_holder_quotient_refinement(table):
    hq = [se.holder_quotient(table(g), g) for g in (np.linspace(0.05, 4, 40), np.linspace(0.05, 4, 80))]
    assert 0.5 <= hq[1] / hq[0] <= 2


def test_table_roundtrip(tmp_path, table):
    path = tmp_path / "theta.csv"
    table.save(path)
    back = se.SelfEnergyTable.load(path, gaussian_potential())
    g = np.linspace(0.1, 5, 17)
    assert np.max(np.abs(back(g) - table(g))) < 1e-12


def test_omega(table):
    p = np.array([0.3, 1.0, 2.0])
    assert np.allclose(se.omega(p, se.PropagatorParams(0.0, eta=0.0)), p**2 / 2)
    par = se.PropagatorParams(0.3)
    w = se.omega(np.array([math.sqrt(2.0)]), par)
    assert w.imag[0] < 0
    assert w.imag[0] == pytest.approx(-0.09 * math.pi * table.f(1.0), rel=1e-8)
    vec = se.omega(np.array([[1.0, 1.0, 0.0]]), par)
    assert vec[0] == pytest.approx(w[0])


def test_triple_norm():
    assert se.triple_norm(np.zeros(3), 0.01) == pytest.approx(0.01)
    assert se.triple_norm(np.array([3.0, 4.0, 0.0]), 0.01) == pytest.approx(1.01)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3,
                                                                    max_size=3),
       st.floats(1e-4, 1))
def test_triple_norm_subadditive(a, b, eta):
    a, b = np.array(a), np.array(b)
    assert se.triple_norm(a + b, eta) <= se.triple_norm(a, eta) + se.triple_norm(b, eta) + 1e-12


def test_hypothesis_guard():
    with pytest.raises(HypothesisViolated):
        se.PropagatorParams(0.1, eta=0.5).require_hypothesis()
    with pytest.raises(HypothesisViolated):
        se.lemma33_check(se.PropagatorParams(0.1, kappa=0.2))


def test_ladderint_bound():
    # resonant q on the energy shell: the integral stays below 1 + O(lambda^(1-12 kappa))
    par = se.PropagatorParams(0.3, kappa=0.05)
    a = float(np.real(se.omega(np.array(1.0), par)))
    assert se.lemma_lhs("ladderint", a, 1.0, par) <= 1.5


def test_ladderint_tends_to_one():
    vals = []
    for lam in (0.3, 0.1, 0.03):
        par = se.PropagatorParams(lam, kappa=0.05)
        a = float(np.real(se.omega(np.array(1.0), par)))
        lhs = se.lemma_lhs("ladderint", a, 1.0, par)
        f = float(se.get_table().f(0.5))
        vals.append(lhs / (lam**2 * math.pi * f / (lam**2 * math.pi * f + par.eta)))
    assert vals[0] < vals[1] < vals[2]
    assert abs(vals[-1] - 1) < 0.05


def test_threeAint_eta_scaling():
    par1 = se.PropagatorParams(0.01, eta=1e-4 * 1.5, kappa=0.05)
    par2 = se.PropagatorParams(0.01, eta=3e-4, kappa=0.05)
    l1 = se.lemma_lhs("threeAint", 0.5, 0.7, par1)
    l2 = se.lemma_lhs("threeAint", 0.5, 0.7, par2)
    assert l1 / l2 == pytest.approx(2.0, rel=0.2)


def test_lemma33_logest_stable():
    rep = se.lemma33_check(se.PropagatorParams(0.1, kappa=0.05), testcase="logest")
    assert not rep.flag and rep.calibration > 0


def test_appendix_degenerate_q():
    rep = se.appendix_integrals(0.0, 0.3, 1e-3, 2.0, 0.5, 0.4)
    assert all(math.isfinite(v) and v > 0 for v in rep.ratios.values())
    assert rep.stable


def test_appendix_I1_shape():
    # the I1 / shape ratio should not drift as eta shrinks
    ratios = []
    for eta in (1e-3, 1e-4):
        rep = se.appendix_integrals(1.0, 0.5, eta, 2.0, 0.5, 0.4)
        assert rep.stable
        ratios.append(rep.ratios["I1"])
    assert 0.5 <= ratios[1] / ratios[0] <= 2


def test_appendix_J_log_eta():
    etas = [1e-3, 1e-4, 1e-5]
    for alpha in (0.3, 0.8, 1.5):  # ~20 s each
        J = [se.appendix_integrals(0.5, 0.4, eta, 2.0, alpha, 0.6).J for eta in etas]
        x = np.abs(np.log(etas))
        fit = np.polyval(np.polyfit(x, J, 1), x)
        assert np.max(np.abs(fit - J) / np.abs(J)) < 0.1
