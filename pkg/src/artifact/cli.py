"""Command-line harness: one subcommand per operation, each emitting
result.csv, meta.json and summary.json under <out>/<subcommand>/<timestamp>/.

Configuration is a flat ``key = value`` file; command-line flags override it
and ``--show-config`` prints every resolved value.  The exit status is 0 iff
every check of the invoked subcommand passes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from datetime import datetime
from pathlib import Path

import numpy as np
from scipy import stats

from . import graphbounds as gb
from . import kinetic as kn
from . import partitions as pt
from . import permgraph as pg
from . import schrodinger as sc
from . import selfenergy as se
from . import wigner as wg
from .errors import ArtifactError, ConfigInvalid
from .profiles import gaussian_state, preset
from .rng import task_rng

# key: (type, default, help)
DEFAULTS: dict[str, tuple[type, object, str]] = {
    "d": (int, 3, "spatial dimension"),
    "lambda": (float, 0.3, "coupling constant"),
    "kappa": (float, 0.05, "time-scale exponent"),
    "delta": (float, 0.001, "counting exponent"),
    "eta": (float, None, "regularization, defaults to lambda^(2+kappa)"),
    "seed": (int, 0, "master seed"),
    "workers": (int, 1, "worker processes"),
    "out": (str, "runs", "output directory"),
    "potential": (str, "gaussian", "potential profile preset"),
    "state_width": (float, 1.0, "width of the Gaussian initial state"),
    "quad_epsrel": (float, 1e-8, "relative quadrature tolerance"),
    "exhaustive_cap": (int, 7, "largest k for exhaustive permutation sweeps"),
    "unimodular_cap": (int, 5, "largest k for full subdeterminant enumeration"),
    "partition_cap": (int, 10, "largest k for partition enumeration"),
    # subcommand inputs
    "perm": (str, "1 2 7 6 5 3 4 8", "permutation in one-line notation"),
    "k": (int, 4, "order k"),
    "n": (int, 4, "Ursell order"),
    "mode": (str, "lattice", "Ursell branch"),
    "nsets": (int, 100, "random frequency sets"),
    "times": (str, "1,5,20", "comma separated times"),
    "etas": (str, "1e-2,1e-3", "comma separated eta values"),
    "nalpha": (int, 10, "sampled energies"),
    "testcase": (str, "logest", "propagator lemma testcase"),
    "a": (float, 0.0, "lemma exponent a"),
    "q": (float, 1.0, "external momentum length"),
    "r": (float, 0.5, "singularity offset length"),
    "alpha": (float, 0.25, "energy alpha"),
    "beta": (float, 0.3, "energy beta"),
    "kmax": (int, 1, "largest ladder order"),
    "energies": (str, "0.25,1,4", "comma separated shell energies"),
    "e": (float, 1.0, "shell energy"),
    "ntraj": (int, 100_000, "trajectories"),
    "chunk": (int, 10_000, "trajectories per seeded task"),
    "T": (float, None, "final time, defaults to 400 relaxation times"),
    "grid_n": (int, 256, "grid points per side"),
    "box": (float, 40.0, "box length"),
    "evolve_d": (int, 2, "dimension of the Schrodinger sandbox"),
    "evolve_n": (int, 256, "sandbox grid points per side"),
    "evolve_box": (float, 16.0, "sandbox box length"),
    "t_final": (float, 2.0, "evolution time"),
    "dt": (float, 0.04, "time step"),
    "ensemble": (int, 0, "potential realizations for the MSD check"),
    # thresholds
    "tol_kidentity": (float, 1e-6, "K-identity residual"),
    "tol_selfenergy": (float, 1e-3, "relative eps->0 agreement"),
    "holder_factor": (float, 2.0, "allowed change of the Holder quotient"),
    "tol_wigner": (float, 1e-10, "Wigner identity tolerance"),
    "continuity_C": (float, 2.0, "constant in the continuity bound"),
    "zscore_max": (float, 3.0, "standard errors allowed"),
    "fit_residual_max": (float, 0.05, "autocorrelation fit residual"),
    "heat_rel_max": (float, 0.05, "heat variance relative error"),
    "ks_p_min": (float, 0.01, "KS p-value floor"),
    "ladder_k0_tol": (float, 1e-8, "t = 0 ladder normalization"),
    "ladder_ratio_tol": (float, 0.10, "k = 1 ladder vs jump weight"),
    "unitarity_tol": (float, 1e-10, "norm drift"),
}

SUBCOMMANDS = {
    "classify": ["perm"],
    "matrix": ["perm"],
    "schedule": ["perm"],
    "exponent": ["perm", "k"],
    "ursell": ["n", "mode"],
    "partitions": ["k"],
    "flip": ["k"],
    "counts": ["k"],
    "kidentity": ["k", "nsets", "times", "etas"],
    "selfenergy": ["nalpha"],
    "lemma33": ["testcase", "a", "eta"],
    "appendix": ["q", "r", "alpha", "beta", "eta"],
    "ladder": ["times", "kmax", "eta"],
    "kinetic": ["energies", "ntraj"],
    "diffusion": ["e", "ntraj", "chunk"],
    "heatfit": ["e", "ntraj", "T", "chunk"],
    "wigner": ["grid_n", "box"],
    "evolve": ["evolve_n", "evolve_box", "evolve_d", "t_final", "dt", "ensemble"],
}

GLOBAL_FLAGS = ["seed", "d", "lambda", "kappa", "delta", "out", "workers"]


def _convert(key: str, text: str):
    typ = DEFAULTS[key][0]
    if text in ("None", "none", ""):
        return None
    try:
        return typ(text)
    except ValueError:
        raise ConfigInvalid(f"{key} = {text!r} is not a valid {typ.__name__}")


def load_config(path: str | None) -> dict:
    cfg = {k: v[1] for k, v in DEFAULTS.items()}
    if path:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigInvalid(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in DEFAULTS:
                raise ConfigInvalid(f"{path}:{lineno}: unknown key {key!r}")
            cfg[key] = _convert(key, val)
    return cfg


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def params_of(cfg: dict) -> se.PropagatorParams:
    return se.PropagatorParams(cfg["lambda"], cfg["eta"], cfg["kappa"], cfg["delta"])


def validate(sub: str, cfg: dict) -> None:
    """Raise ConfigInvalid naming the violated inequality."""
    lam, kap, d = cfg["lambda"], cfg["kappa"], cfg["d"]
    if not 0 < lam < 1:
        raise ConfigInvalid(f"need 0 < lambda < 1, got {lam}")
    if d < 1:
        raise ConfigInvalid(f"need d >= 1, got {d}")
    if cfg["workers"] < 1:
        raise ConfigInvalid("need workers >= 1")
    if sub == "exponent" and kap >= gb.kappa_limit(d):
        raise ConfigInvalid(f"kappa < 2/(6+9d) = {gb.kappa_limit(d):.6f} violated: kappa = {kap}")
    if sub in ("lemma33", "appendix"):
        eta = params_of(cfg).eta
        lo, hi = lam ** (2 + 4 * kap), lam**2
        if not lo * (1 - 1e-12) <= eta <= hi * (1 + 1e-12):
            raise ConfigInvalid(f"lambda^(2+4kappa) = {lo:.4g} <= eta <= lambda^2 = {hi:.4g} "
                                f"violated: eta = {eta:.4g}")
    if sub in ("lemma33", "appendix", "ladder") and d != 3:
        raise ConfigInvalid(f"{sub} is implemented for d = 3 only, got d = {d}")


def check(name: str, passed: bool, value=None, threshold=None) -> dict:
    def clean(x):
        if isinstance(x, (np.floating, np.integer)):
            return x.item()
        return x
    return {"name": name, "passed": bool(passed), "value": clean(value), "threshold": clean(threshold)}


# subcommand handlers: each returns (rows, result, checks, extra meta)

def cmd_classify(cfg):
    sigma = pg.parse_perm(cfg["perm"])
    cls = pg.classify(sigma)
    res = cls.to_json()
    res["sigma"] = str(sigma)
    rows = [{"index": i, "class": cls.class_of(i), "pivot": cls.pivots.get(i, "")}
            for i in range(1, sigma.k + 2)]
    checks = [check("peaks equal valleys", len(cls.peaks) == len(cls.valleys),
                    [len(cls.peaks), len(cls.valleys)])]
    if sigma.is_identity():
        checks.append(check("identity has degree 0", cls.degree == 0, cls.degree, 0))
    else:
        checks.append(check("degree at least 2", cls.degree >= 2, cls.degree, 2))
    return rows, res, checks, {}


def cmd_matrix(cfg):
    sigma = pg.parse_perm(cfg["perm"])
    tm = pg.tower_matrix(sigma)
    full = sigma.k <= cfg["unimodular_cap"]
    rep = pg.unimodularity_check(tm, sample=True, cap=10**7 if full else 0, seed=cfg["seed"])
    rows = [{"row": i + 1, **{f"c{j + 1}": int(v) for j, v in enumerate(r)}}
            for i, r in enumerate(tm.entries)]
    res = {"sigma": str(sigma), "matrix": tm.entries.astype(int).tolist(), **rep.to_json()}
    checks = [check("tower structure", pg.is_tower_matrix(tm.entries)),
              check("M(sigma) M(sigma^-1) = I", rep.inverse_ok),
              check("subdeterminants in {0, +-1}" + (" (sampled)" if rep.sampled else ""),
                    rep.unimodular, rep.worst, 1)]
    return rows, res, checks, {}


def cmd_schedule(cfg):
    sigma = pg.parse_perm(cfg["perm"])
    sch = gb.schedule(sigma)
    rows = [{"row": s.row, "case": s.case, "rows": " ".join(map(str, s.rows)),
             "variables": " ".join(map(str, s.variables)),
             "b": "" if s.b is None else " ".join(map(str, s.b))} for s in sch.steps]
    v = sch.violations()
    return rows, {**sch.to_json(), "violations": v}, [check("schedule invariants", not v, len(v), 0)], {}


def _sweep(k: int, cap: int):
    if k > cap:
        raise ConfigInvalid(f"k <= exhaustive_cap = {cap} violated: k = {k}")
    return pg.all_permutations(k)


def cmd_exponent(cfg):
    kap, delta, d = cfg["kappa"], cfg["delta"], cfg["d"]
    sigmas = [pg.parse_perm(cfg["perm"])] if cfg.get("_perm_given") else \
        list(_sweep(cfg["k"], cfg["exhaustive_cap"]))
    rows, bad = [], 0
    for s in sigmas:
        r = gb.exponent_report(s, kap, d, delta)
        bad += not r.holds
        rows.append({"sigma": r.sigma, "degree": r.degree, "total": r.total_lambda_power,
                     "simplified": r.simplified_bound, "applicable": r.applicable, "holds": r.holds})
    limit = [gb.exponent_report(pg.Permutation((2, 1)), kap * 10.0**-j, d, delta * 10.0**-j).per_degree
             for j in range(4)]
    res = {"count": len(rows), "violations": bad, "perDegreeLimit": limit}
    checks = [check("total power >= simplified bound", bad == 0, bad, 0),
              check("simplified/deg tends to 1/3", abs(limit[-1] - 1 / 3) < abs(limit[0] - 1 / 3)
                    and abs(limit[-1] - 1 / 3) < 1e-3, limit[-1], 1 / 3)]
    return rows, res, checks, {}


def cmd_ursell(cfg):
    n, mode = cfg["n"], cfg["mode"]
    rows = []
    for m in range(1, n + 1):
        c = pt.ursell(m, mode)
        rows.append({"n": m, "c": c, "bound": m ** (m - 2) if m >= 2 else 1,
                     "closedForm": pt.ursell_closed_form(m) if mode == "lattice" else int(m == 1)})
    last = rows[-1]
    checks = [check("|c(n)| <= n^(n-2)", all(abs(r["c"]) <= r["bound"] for r in rows),
                    last["c"], last["bound"]),
              check("matches closed form", all(r["c"] == r["closedForm"] for r in rows))]
    return rows, {"n": n, "mode": mode, "value": last["c"], "bound": last["bound"]}, checks, {}


def cmd_partitions(cfg):
    k = cfg["k"]
    evens = pt.enumerate_even_partitions(k, cfg["partition_cap"])
    rows, bad = [], 0
    for P in evens:
        P.check()
        cnt = pt.compatible_count(P)
        brute = sum(pt.is_compatible(s, P) for s in pg.all_permutations(k)) if k <= 5 else None
        bad += brute is not None and brute != cnt
        rows.append({"partition": str(P), "lumps": len(P.lumps), "compatible": cnt,
                     "bruteForce": "" if brute is None else brute})
    checks = [check("compatible counts", bad == 0, bad, 0),
              check("partition count is Bell(k)", len({P.projection() for P in evens}) == pt.bell_number(k),
                    len({P.projection() for P in evens}), pt.bell_number(k))]
    return rows, {"k": k, "evenPartitions": len(evens)}, checks, {}


def flip_violations(k: int, cap: int = 10) -> tuple[list[dict], int]:
    rows, bad = [], 0
    for P in pt.enumerate_even_partitions(k, cap):
        A = P.projection()
        if A.is_trivial():
            continue
        res = pt.greedy_flip(P)
        s = res.sigma
        image = {s(x) for x in A.support}
        ok = (pt.is_compatible(s, P) and pt.fast_degree(s) >= A.s / 2
              and not (pt.internal_ladders_fast(s) & image))
        bad += not ok
        rows.append({"partition": str(P), "sigma": str(s), "flips": res.flips,
                     "degree": pt.fast_degree(s), "s": A.s, "ok": ok})
    return rows, bad


def cmd_flip(cfg):
    rows, bad = flip_violations(cfg["k"], cfg["partition_cap"])
    return rows, {"k": cfg["k"], "checked": len(rows), "violations": bad}, \
        [check("greedy flip output valid", bad == 0, bad, 0)], {}


def cmd_counts(cfg):
    k = cfg["k"]
    table = pt.count_by_ladder(k, cfg["exhaustive_cap"])
    rows = [{"l": l, "count": c, "bound": b} for l, (c, b) in sorted(table.items())]
    bad = sum(r["count"] > r["bound"] for r in rows)
    return rows, {"k": k, "total": sum(r["count"] for r in rows)}, \
        [check("ladder counts <= 2(2k)^(k-l)", bad == 0, bad, 0),
         check("counts sum to k!", sum(r["count"] for r in rows) == math.factorial(k))], {}


def cmd_kidentity(cfg):
    rng = task_rng(cfg["seed"], 0)
    kmax = cfg["k"]
    rows = []
    for i in range(cfg["nsets"]):
        k = int(rng.integers(1, kmax + 1))
        w = gb.random_frequencies(rng, k)
        for t in _floats(cfg["times"]):
            for eta in _floats(cfg["etas"]):
                r = gb.k_identity_check(w, t, eta)
                rows.append({"set": i, "k": k, "t": t, "eta": eta, "residual": r.residual,
                             "unphasedResidual": r.unphased_residual, "lhsRe": r.lhs.real,
                             "lhsIm": r.lhs.imag})
    worst = max(r["residual"] for r in rows)
    return rows, {"evaluations": len(rows), "worstResidual": worst}, \
        [check("K-identity residual", worst < cfg["tol_kidentity"], worst, cfg["tol_kidentity"])], {}


def selfenergy_suite(cfg):
    pot = preset(cfg["potential"])
    d = cfg["d"]
    table = se.get_table(pot, d)
    rng = task_rng(cfg["seed"], 0)
    alphas = np.sort(rng.uniform(0.05, 4.0, cfg["nalpha"]))
    rows, worst_c, worst_l = [], 0.0, 0.0
    for a in alphas:
        th = complex(table(a))
        ref = -math.pi * (2 * a) ** (d / 2 - 1) * se.angular_S(a, pot, d)
        lim = se.theta_direct(a, 1e-5, pot, d).value
        zero = se.theta_direct(a, 0.0, pot, d).value
        rel_c = abs(th.imag - ref) / abs(ref)
        rel_l = abs(lim - zero) / abs(zero)
        worst_c, worst_l = max(worst_c, rel_c), max(worst_l, rel_l)
        rows.append({"alpha": a, "re": th.real, "im": th.imag, "imReference": ref,
                     "epsLimitRe": lim.real, "epsLimitIm": lim.imag, "relImErr": rel_c,
                     "relLimitErr": rel_l})
    hq = []
    for m in (40, 80):
        grid = np.linspace(0.05, 4.0, m)
        hq.append(se.holder_quotient(table(grid), grid))
    ratio = hq[1] / hq[0]
    checks = [check("Im theta = -pi (2a)^(d/2-1) S(a)", worst_c < cfg["tol_selfenergy"], worst_c,
                    cfg["tol_selfenergy"]),
              check("eps -> 0 limit", worst_l < cfg["tol_selfenergy"], worst_l, cfg["tol_selfenergy"]),
              check("Holder-1/2 quotient stable", 1 / cfg["holder_factor"] <= ratio <= cfg["holder_factor"],
                    ratio, cfg["holder_factor"])]
    return rows, {"holderQuotients": hq, "table": table.meta()}, checks, {"profile": pot.describe()}


def cmd_lemma33(cfg):
    p = params_of(cfg)
    pot = preset(cfg["potential"])
    rep = se.lemma33_check(p, pot, cfg["testcase"], a=cfg["a"], d=cfg["d"])
    return rep.rows, {k: v for k, v in rep.to_json().items() if k != "rows"}, \
        [check("refined ratio within 2x of calibration", not rep.flag, rep.refined, 2 * rep.calibration)], \
        {"profile": pot.describe()}


def cmd_appendix(cfg):
    p = params_of(cfg)
    rep = se.appendix_integrals(cfg["q"], cfg["r"], p.eta, p.zeta, cfg["alpha"], cfg["beta"], cfg["d"])
    rows = [{"integral": k, "value": getattr(rep, k), "shape": rep.shapes[k], "ratio": rep.ratios[k],
             "refinedRatio": rep.refined_ratios[k]} for k in ("I1", "I2", "J")]
    return rows, rep.to_json(), [check("ratios stable under refinement", rep.stable)], {}


def cmd_ladder(cfg):
    p = params_of(cfg)
    pot = preset(cfg["potential"])
    state = gaussian_state(3, cfg["state_width"])
    table = se.get_table(pot, 3)
    ts = _floats(cfg["times"]) if cfg.get("_times_given") else [0.0, cfg["lambda"] ** -2]
    rows, checks = [], []
    for t in ts:
        for k in range(cfg["kmax"] + 1):
            v = gb.ladder_value(t, k, p, state=state, potential=pot, table=table)
            row = v.to_row()
            if k == 1:
                w = gb.one_collision_weight(t, p, state=state, potential=pot, table=table)
                row["jumpWeight"] = w
                if t > 0:
                    ratio = v.value.real / w
                    checks.append(check(f"k=1 ladder / jump weight at t={t:g}",
                                        abs(ratio - 1) <= cfg["ladder_ratio_tol"], ratio,
                                        cfg["ladder_ratio_tol"]))
            if k == 0 and t == 0:
                checks.append(check("V(0, 0) = 1", abs(v.value - 1) <= cfg["ladder_k0_tol"],
                                    abs(v.value - 1), cfg["ladder_k0_tol"]))
            rows.append(row)
    return rows, {"lambda": p.lam, "eta": p.eta}, checks, {"profile": pot.describe()}


def cmd_kinetic(cfg):
    pot = preset(cfg["potential"])
    d = cfg["d"]
    rows, checks = [], []
    n = min(cfg["ntraj"], 100_000)
    for i, e in enumerate(_floats(cfg["energies"])):
        m = kn.sigma_moments(e, pot, d)
        waits, cos = kn.jump_statistics(e, n, cfg["seed"] + i, pot, d, method="rejection")
        se_w = waits.std(ddof=1) / math.sqrt(n)
        z = (waits.mean() - 1 / m.sigma0) / se_w
        z_cos = (cos.mean() - m.mean_cos) / (cos.std(ddof=1) / math.sqrt(n))
        tmix = 20 / m.relaxation_rate
        final = kn.final_directions(e, tmix, min(n, 20_000), cfg["seed"] + i, pot, d)
        c_final = final[:, -1]
        p_unif = float(stats.kstest(c_final, "uniform", args=(-1, 2)).pvalue) if d == 3 else \
            float(stats.kstest(np.arctan2(final[:, 1], final[:, 0]), "uniform",
                               args=(-math.pi, 2 * math.pi)).pvalue) if d == 2 else math.nan
        rows.append({"e": e, "sigma0": m.sigma0, "sigma1": m.sigma1, "meanCos": m.mean_cos,
                     "meanWait": waits.mean(), "zWait": z, "zCos": z_cos, "ksUniform": p_unif})
        checks += [check(f"mean wait 1/sigma0 at e={e:g}", abs(z) <= cfg["zscore_max"], z, cfg["zscore_max"]),
                   check(f"mean jump cosine at e={e:g}", abs(z_cos) <= cfg["zscore_max"], z_cos,
                         cfg["zscore_max"]),
                   check(f"|sigma1| < sigma0 at e={e:g}", abs(m.sigma1) < m.sigma0)]
        if not math.isnan(p_unif):
            checks.append(check(f"directions mix to uniform at e={e:g}", p_unif > cfg["ks_p_min"], p_unif,
                                cfg["ks_p_min"]))
    return rows, {"energies": _floats(cfg["energies"])}, checks, \
        {"profile": pot.describe(), "nTraj": n}


def cmd_diffusion(cfg):
    pot = preset(cfg["potential"])
    e, d = cfg["e"], cfg["d"]
    mc = kn.diffusion_constant(e, pot, d, "monteCarlo", n_traj=cfg["ntraj"], seed=cfg["seed"],
                               chunk=cfg["chunk"], workers=cfg["workers"])
    ac = kn.autocorrelation(e, n_traj=cfg["ntraj"], seed=cfg["seed"], profile=pot, d=d,
                            chunk=cfg["chunk"], workers=cfg["workers"])
    rows = [{"lag": r["lag"], "mean": r["mean"], "stderr": r["stderr"], "fit": r["fit"]}
            for r in ac.to_rows()]
    zr = (ac.rate - ac.predicted_rate) / ac.rate_stderr
    res = {**mc.to_json(), "autocorrRate": ac.rate, "autocorrRateStderr": ac.rate_stderr,
           "predictedRate": ac.predicted_rate, "fitResidual": ac.fit_residual,
           "curveAtZero": float(ac.mean[0])}
    checks = [check("Monte Carlo D_e within 3 s.e. of closed form", abs(mc.z_score) <= cfg["zscore_max"],
                    mc.z_score, cfg["zscore_max"]),
              check("autocorrelation(0) = 2e", abs(ac.mean[0] - 2 * e) < 1e-12 * e, float(ac.mean[0]), 2 * e),
              check("exponential fit residual", ac.fit_residual < cfg["fit_residual_max"], ac.fit_residual,
                    cfg["fit_residual_max"]),
              check("decay rate = sigma0 - sigma1", abs(zr) <= cfg["zscore_max"], zr, cfg["zscore_max"])]
    return rows, res, checks, {"profile": pot.describe(), "nTraj": cfg["ntraj"]}


def cmd_heatfit(cfg):
    pot = preset(cfg["potential"])
    rep = kn.heat_compare(cfg["e"], cfg["T"], cfg["ntraj"], cfg["seed"], pot, cfg["d"],
                          chunk=cfg["chunk"], workers=cfg["workers"])
    rows = [{"T": t, "variance": v, "stderr": s, "predicted": p}
            for t, v, s, p in zip(rep.times, rep.variances, rep.var_stderr, rep.predicted)]
    slope_rel = rep.slope / (2 * rep.D) - 1
    checks = [check("variance = 2 D_e T", rep.rel_error < cfg["heat_rel_max"], rep.rel_error,
                    cfg["heat_rel_max"]),
              check("variance slope = 2 D_e", abs(slope_rel) < cfg["heat_rel_max"], slope_rel,
                    cfg["heat_rel_max"])]
    checks += [check(f"KS coordinate {j + 1}", p > cfg["ks_p_min"], p, cfg["ks_p_min"])
               for j, p in enumerate(rep.ks_pvalues)]
    return rows, rep.to_json(), checks, {"profile": pot.describe(), "nTraj": cfg["ntraj"]}


def wigner_states(grid: wg.Grid1D) -> dict[str, np.ndarray]:
    L = grid.length
    out = {"gaussian": wg.gaussian_packet(grid, 0.05 * L, 0.03 * L, 0.4),
           "two-bump": wg.gaussian_packet(grid, 0.1 * L, 0.025 * L) + wg.gaussian_packet(grid, -0.1 * L, 0.025 * L),
           "cat": wg.gaussian_packet(grid, -0.08 * L, 0.02 * L, 0.5)
           + 0.5j * wg.gaussian_packet(grid, 0.05 * L, 0.035 * L, -0.4)}
    return {k: v / math.sqrt(wg.norm2(v, grid)) for k, v in out.items()}


def cmd_wigner(cfg):
    grid = wg.Grid1D.centered(cfg["grid_n"], cfg["box"])
    tol = cfg["tol_wigner"]
    rows, checks = [], []
    for name, psi in wigner_states(grid).items():
        for eps in (1.0, 0.1):
            errs = wg.identity_errors(psi, grid, eps)
            rows.append({"state": name, "eps": eps, **errs})
            worst = max(errs["normalization"], errs["xMarginal"], errs["vMarginal"])
            checks.append(check(f"identities {name} eps={eps:g}", worst < tol, worst, tol))
    L = grid.length
    psi = wg.gaussian_packet(grid, 0.1 * L, 0.025 * L) + wg.gaussian_packet(grid, -0.1 * L, 0.025 * L)
    psi /= math.sqrt(wg.norm2(psi, grid))
    w = wg.wigner(psi, grid)
    XX, VV = np.meshgrid(w.X, w.v, indexing="ij")
    oracle = float(np.max(np.abs(w.W - wg.two_bump_wigner(XX, VV, 0.1 * L, 0.025 * L))))
    checks.append(check("two-bump closed form", oracle < 1e-8, oracle, 1e-8))
    rng = task_rng(cfg["seed"], 0)
    p1 = wg.gaussian_packet(grid, 0.0, 0.04 * L, 0.2)

    def obs(x, v):
        return np.exp(-x**2 / (0.02 * L * L)) * np.cos(2 * v)

    ratios = []
    for _ in range(100):
        z = wg.gaussian_packet(grid, rng.uniform(-0.1, 0.1) * L, rng.uniform(0.02, 0.05) * L,
                               rng.uniform(-1, 1))
        z = z - np.vdot(p1, z) * grid.h * p1 / wg.norm2(p1, grid)
        z *= 0.1 / math.sqrt(wg.norm2(z, grid))
        ratios.append(wg.wigner_continuity_check(p1, z, obs, grid, cfg["continuity_C"]).ratio)
    checks.append(check("continuity bound over 100 perturbations", max(ratios) <= 1, max(ratios), 1))
    zero = wg.wigner_continuity_check(p1, 0 * p1, obs, grid).lhs
    checks.append(check("zero perturbation gives zero", zero == 0.0, zero, 0))
    return rows, {"twoBumpError": oracle, "continuityMaxRatio": max(ratios)}, checks, {}


def cmd_evolve(cfg):
    d = cfg["evolve_d"]
    L = cfg["evolve_box"]
    grid = sc.BoxGrid(cfg["evolve_n"], L, d)
    lam, dt, t = cfg["lambda"], cfg["dt"], cfg["t_final"]
    pot = sc.sample_poisson_potential(L, preset(cfg["potential"]), cfg["seed"], d)
    c = [L / 2] * d
    psi0 = sc.gaussian_wavepacket(grid, c, 1.0, [1.0] + [0.0] * (d - 1))
    ev = sc.evolve_splitstep(psi0, pot, lam, t, dt)
    free = sc.evolve_splitstep(psi0, None, 0.0, t, dt)
    free_err = float(np.max(np.abs(free.psi.values - sc.free_exact(psi0, t).values)))
    errs, orders = sc.convergence_order(psi0, pot, lam, t, [dt, dt / 2, dt / 4], dt / 64)
    rows = [{"t": float(a), "norm": float(b), "msd": float(m)} for a, b, m in zip(ev.times, ev.norms, ev.msd)]
    checks = [check("unitarity", ev.unitarity_error < cfg["unitarity_tol"], ev.unitarity_error,
                    cfg["unitarity_tol"]),
              check("free evolution exact", free_err < cfg["unitarity_tol"], free_err, cfg["unitarity_tol"]),
              check("second-order convergence", abs(orders[-1] - 2) < 0.2, orders[-1], 2)]
    res = {"M": pot.m, "errors": errs, "orders": orders, "freeError": free_err}
    if cfg["ensemble"] > 0:
        rep = sc.ensemble_msd(grid, lam, t, dt, cfg["ensemble"], cfg["seed"], workers=cfg["workers"])
        res.update({"ensembleLogSlopes": rep.log_slopes.tolist(), "envelopeC1": rep.envelope_c1})
        checks += [check("MSD log-slope decreasing", rep.slope_decreasing, rep.log_slopes[-1], rep.log_slopes[0]),
                   check("MSD growth within t^4 envelope", rep.under_t4, float(rep.log_slopes.max()), 4)]
    return rows, res, checks, {"profile": pot.profile.describe(), "M": pot.m}


HANDLERS = {
    "classify": cmd_classify, "matrix": cmd_matrix, "schedule": cmd_schedule,
    "exponent": cmd_exponent, "ursell": cmd_ursell, "partitions": cmd_partitions,
    "flip": cmd_flip, "counts": cmd_counts, "kidentity": cmd_kidentity,
    "selfenergy": selfenergy_suite, "lemma33": cmd_lemma33, "appendix": cmd_appendix,
    "ladder": cmd_ladder, "kinetic": cmd_kinetic, "diffusion": cmd_diffusion,
    "heatfit": cmd_heatfit, "wigner": cmd_wigner, "evolve": cmd_evolve,
}


# artifact emission

def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return x


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        keys = list(dict.fromkeys(k for r in rows for k in r))
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r.get(k, "")) for k in keys})
    return buf.getvalue()


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return str(x)


def run_dir(out: str, sub: str) -> Path:
    base = Path(out) / sub
    stamp = datetime.now().strftime("%Y%m%dT%H%M%S")
    path = base / stamp
    i = 1
    while path.exists():
        path = base / f"{stamp}-{i}"
        i += 1
    path.mkdir(parents=True)
    return path


def public_config(cfg: dict) -> dict:
    return {k: cfg[k] for k in DEFAULTS}


def run(sub: str, cfg: dict) -> tuple[int, Path, dict]:
    """Execute one subcommand and write its artifacts; returns (exit status, dir, summary)."""
    validate(sub, cfg)
    t0 = time.perf_counter()
    rows, result, checks, extra = HANDLERS[sub](cfg)
    elapsed = time.perf_counter() - t0
    passed = all(c["passed"] for c in checks)
    path = run_dir(cfg["out"], sub)
    (path / "result.csv").write_text(rows_to_csv(rows))
    meta = {"subcommand": sub, "config": public_config(cfg), "masterSeed": cfg["seed"],
            "created": datetime.now().isoformat(timespec="seconds"), "elapsedSeconds": elapsed,
            "result": result, **extra}
    (path / "meta.json").write_text(json.dumps(meta, indent=2, default=_json_default))
    summary = {"subcommand": sub, "passed": passed, "checks": checks}
    (path / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default))
    return (0 if passed else 1), path, summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key = value configuration file")
    parser.add_argument("--show-config", action="store_true", help="print the resolved configuration")
    subs = parser.add_subparsers(dest="subcommand")
    for name, keys in SUBCOMMANDS.items():
        sp = subs.add_parser(name)
        sp.add_argument("--config", default=argparse.SUPPRESS)
        sp.add_argument("--show-config", action="store_true", default=argparse.SUPPRESS)
        for key in dict.fromkeys(GLOBAL_FLAGS + keys):
            typ, default, help_ = DEFAULTS[key]
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, type=str, default=argparse.SUPPRESS,
                            help=f"{help_} (default {default})")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    sub = args.pop("subcommand")
    try:
        cfg = load_config(args.pop("config", None))
        show = args.pop("show_config", False)
        for key, val in args.items():
            cfg[key] = _convert(key, val)
            cfg[f"_{key}_given"] = True
        if show:
            for key in DEFAULTS:
                print(f"{key} = {cfg[key]}")
            if sub is None:
                return 0
        if sub is None:
            parser.print_help()
            return 2
        status, path, summary = run(sub, cfg)
    except ConfigInvalid as exc:
        print(f"ConfigInvalid: {exc}", file=sys.stderr)
        return 2
    except ArtifactError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for c in summary["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']}")
    print(f"artifacts: {path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
