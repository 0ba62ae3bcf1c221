"""Acceptance criteria 1-11, one PASS/FAIL line each at the stated tolerance.

Every random quantity uses master seed 0 fixed in advance.  The lines are
printed straight to the terminal so they show up in the pytest log.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from artifact import cli
from artifact import graphbounds as gb
from artifact import kinetic as kn
from artifact import partitions as pt
from artifact import permgraph as pg
from artifact import wigner as wg
from artifact.selfenergy import PropagatorParams, get_table

SEED = 0
K8 = pg.Permutation((1, 2, 7, 6, 5, 3, 4, 8))
K8_MATRIX = [
    [1, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, -1, 1, 0, 0],
    [0, 0, 1, 0, 0, -1, 0, 1, 0],
    [0, 0, 1, 0, -1, 0, 0, 1, 0],
    [0, 0, 1, -1, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 1],
]


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, elapsed=None, budget=None):
        within = elapsed is None or elapsed < budget
        status = "PASS" if ok and within else "FAIL"
        t = "" if elapsed is None else f" [{elapsed:.1f}s / {budget:.0f}s]"
        with capsys.disabled():
            print(f"\n{status} criterion {n}: {detail}{t}")
        assert ok, detail
        assert within, f"time budget exceeded: {elapsed:.1f}s > {budget}s"
    return emit


def _cfg(**over):
    cfg = cli.load_config(None)
    cfg.update(seed=SEED, **over)
    return cfg


def test_criterion_01_worked_example(report):
    t0 = time.perf_counter()
    c = pg.classify(K8)
    m = pg.tower_matrix(K8).entries.tolist()
    el = time.perf_counter() - t0
    ok = (c.peaks == {3} and c.valleys == {7} and c.slopes == {5, 8} and c.ladders == {1, 2, 4, 6}
          and c.ladder_tops == {0, 3, 5} and c.ladder_bottoms == {2, 4, 7} and c.degree == 4
          and m == K8_MATRIX)
    report(1, ok, "index sets, degree 4 and the 9x9 matrix match exactly", el, 1)


def test_criterion_02_exhaustive_combinatorics(report):
    t0 = time.perf_counter()
    bad = []
    for k in range(1, 8):
        for s in pg.all_permutations(k):
            c = pg.classify(s)
            if len(c.peaks) != len(c.valleys):
                bad.append((str(s), "peaks != valleys"))
            if s.is_identity() and c.degree != 0:
                bad.append((str(s), "deg(id) != 0"))
            if not s.is_identity():
                if c.degree < 2:
                    bad.append((str(s), "deg < 2"))
                if k - len(pg.internal_ladder_indices(s)) > 2 * c.degree:
                    bad.append((str(s), "k - |I*_l| > 2 deg"))
            if len(c.uncovered) > len(c.valleys):
                bad.append((str(s), "|I_us| > v"))
            tm = pg.tower_matrix(s)
            if not np.array_equal(tm.entries @ pg.tower_matrix(s.inverse()).entries,
                                  np.eye(k + 1, dtype=int)):
                bad.append((str(s), "M(s) M(s^-1) != I"))
            if k <= 5 and not pg.unimodularity_check(tm, sample=False).unimodular:
                bad.append((str(s), "subdeterminant outside {0, +-1}"))
        for ell, (cnt, bound) in pt.count_by_ladder(k).items():
            if cnt > bound:
                bad.append((k, ell, "ladder count bound"))
    el = time.perf_counter() - t0
    report(2, not bad, f"k <= 7 sweep, full unimodularity k <= 5: {len(bad)} violations", el, 600)


def test_criterion_03_ursell(report):
    t0 = time.perf_counter()
    vals = [pt.ursell(n, "lattice") for n in range(1, 7)]
    oracle = [1, -1, 2, -6, 24, -120]
    ok = vals == oracle and all(abs(c) <= n ** (n - 2) for n, c in enumerate(vals, 1) if n >= 2)
    el = time.perf_counter() - t0
    report(3, ok, f"c(1..6) = {vals}", el, 60)


def test_criterion_04_greedy_flip(report):
    t0 = time.perf_counter()
    total = bad = 0
    for k in range(1, 7):
        rows, b = cli.flip_violations(k)
        total += len(rows)
        bad += b
    el = time.perf_counter() - t0
    report(4, bad == 0, f"{total} even partitions with a nontrivial lump, {bad} violations", el, 300)


def test_criterion_05_k_identity(report):
    t0 = time.perf_counter()
    rows, res, checks, _ = cli.cmd_kidentity(_cfg())
    el = time.perf_counter() - t0
    worst = res["worstResidual"]
    ok = len({r["set"] for r in rows}) == 100 and max(r["k"] for r in rows) <= 4 and worst < 1e-6
    report(5, ok, f"{res['evaluations']} evaluations, worst residual {worst:.2e} < 1e-6", el, 120)


def test_criterion_06_self_energy(report):
    t0 = time.perf_counter()
    rows, res, checks, _ = cli.selfenergy_suite(_cfg())
    el = time.perf_counter() - t0
    worst_im = max(r["relImErr"] for r in rows)
    worst_lim = max(r["relLimitErr"] for r in rows)
    hq = res["holderQuotients"]
    ok = len(rows) == 10 and worst_im < 1e-3 and worst_lim < 1e-3 and 0.5 <= hq[1] / hq[0] <= 2
    report(6, ok, f"Im rel err {worst_im:.1e}, eps->0 rel err {worst_lim:.1e}, "
                  f"Holder ratio {hq[1] / hq[0]:.3f}", el, 300)


def test_criterion_07_diffusion(report):
    t0 = time.perf_counter()
    lines, ok = [], True
    for e in (0.25, 1.0, 4.0):
        mc = kn.diffusion_constant(e, mode="monteCarlo", n_traj=100_000, seed=SEED)
        ac = kn.autocorrelation(e, n_traj=100_000, seed=SEED)
        heat = kn.heat_compare(e, seed=SEED)
        good = (abs(mc.z_score) <= 3 and ac.fit_residual < 0.05 and heat.rel_error < 0.05
                and min(heat.ks_pvalues) > 0.01)
        ok &= good
        lines.append(f"e={e:g}: z={mc.z_score:+.2f} fit={ac.fit_residual:.3f} "
                     f"var={heat.rel_error:.3f} KSmin={min(heat.ks_pvalues):.3f}")
    el = time.perf_counter() - t0
    report(7, ok, "; ".join(lines), el, 900)


def test_criterion_08_wigner(report):
    t0 = time.perf_counter()
    grid = wg.Grid1D.centered(256, 40.0)
    worst = 0.0
    for psi in cli.wigner_states(grid).values():
        err = wg.identity_errors(psi, grid)
        worst = max(worst, err["normalization"], err["xMarginal"], err["vMarginal"])
    el = time.perf_counter() - t0
    report(8, worst < 1e-10, f"three states, worst identity error {worst:.1e}", el, 60)


def test_criterion_09_exponent_ledger(report):
    t0 = time.perf_counter()
    bad = count = 0
    for k in range(1, 8):
        for s in pg.all_permutations(k):
            count += 1
            bad += not gb.exponent_report(s, 0.01, 3, 0.001).holds
    per = [gb.exponent_report(K8, 0.01 * 10.0**-j, 3, 0.001 * 10.0**-j).per_degree for j in range(6)]
    gaps = [abs(p - 1 / 3) for p in per]
    limit_ok = all(a > b for a, b in zip(gaps, gaps[1:])) and gaps[-1] < 1e-6
    el = time.perf_counter() - t0
    report(9, bad == 0 and limit_ok,
           f"{count} permutations, {bad} violations; simplified/deg -> {per[-1]:.7f}", el, 120)


def test_criterion_10_scope_statement(report):
    readme = (Path(__file__).resolve().parents[1] / "README.md").read_text()
    ok = "not numerically reproducible" in readme
    report(10, ok, "README states that the lambda -> 0 limit itself is out of reach at desk scale "
                   "and is covered by criteria 1-9")


def test_criterion_11_ladder_sanity(report):
    t0 = time.perf_counter()
    p = PropagatorParams(0.3)
    table = get_table()
    v00 = gb.ladder_value(0.0, 0, p, table=table).value
    t = 0.3**-2
    v1 = gb.ladder_value(t, 1, p, table=table).value.real
    w1 = gb.one_collision_weight(t, p, table=table)
    ratio = v1 / w1
    el = time.perf_counter() - t0
    ok = abs(v00 - 1) <= 1e-8 and abs(ratio - 1) <= 0.10
    report(11, ok, f"|V(0,0) - 1| = {abs(v00 - 1):.1e}; k=1 ladder / jump weight at "
                   f"lambda=0.3, t=lambda^-2: {ratio:.3f}", el, 600)
