"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Tolerances are pinned below and never relaxed. The lines are also echoed in the
pytest terminal summary (see conftest.py). Run with ``pytest tests/test_acceptance.py -v``.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from conftest import CRITERIA
from heavysgd import analysis as an
from heavysgd import experiments as ex
from heavysgd import lemma_oracles as lo
from heavysgd import limits as lim
from heavysgd import schedules as sch
from heavysgd.config import load_config, parse_config
from heavysgd.noise import TailModel, make_stream, sample_scalar

SEED = 20261015
CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"

# pinned tolerances
SLOPE_TOL = 0.08
BOUND_RATIO = 1.5
KS_LEVEL = 0.01
MEAN_MEASURE_REL = 0.05
DRIFT_TOL = 1e-6
CF_SE = 3.0
TOEPLITZ_GROWTH = 0.02
SANDWICH_EPS = 0.05
SPOT_TOL = 1e-12


def record(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA.append(line)
    print(line)
    return ok


def cfg(name):
    c = load_config(CONFIGS / name)
    assert c.master_seed == SEED or c.kind in ("mean_measure", "drift_check", "complexity_table")
    return c


@pytest.mark.slow
def test_criterion_1_moment_rate():
    c = cfg("moment_rate.cfg")
    assert c.N_grid == [250, 500, 1000, 2000, 4000] and c.M == 2000
    s = ex.run_experiment(c).summary
    exact = 1.2 * (1 - 1 / 1.5)
    ok_bound = s["bound_last3_max_over_min"] < BOUND_RATIO
    ok_slope = abs(s["slope"] - exact) <= SLOPE_TOL and s["slope"] >= 0.2
    record(1, ok_bound and ok_slope,
           f"slope={s['slope']:.4f} (target {exact:.2f}+-{SLOPE_TOL}, >=0.2), "
           f"last-3 bound max/min={s['bound_last3_max_over_min']:.4f} (<{BOUND_RATIO})")
    assert ok_bound and ok_slope


@pytest.mark.slow
def test_criterion_2_iterate_limit():
    stable = ex.run_experiment(cfg("limit_law_stable.cfg")).summary
    pareto = ex.run_experiment(cfg("limit_law_pareto.cfg")).summary
    assert stable["n_oracle"] == 4000 and pareto["n_oracle"] == 4000
    scale = (1.5 * 1.0) ** (-1 / 1.5)
    assert abs(lim.z_infinity_stable_exact(1.5, 1.0, 1.0).scale - scale) < 1e-12
    assert lim.nu_tilde(lim.pareto_measure(1.5), 1.0).c_plus == pytest.approx(1 / (2 * 1.5), abs=1e-15)
    ok = stable["ks_p"] > KS_LEVEL and pareto["ks_p"] > KS_LEVEL
    record(2, ok, f"stable KS p={stable['ks_p']:.4f}, Pareto KS p={pareto['ks_p']:.4f} (each >{KS_LEVEL})")
    assert ok


@pytest.mark.slow
def test_criterion_3_averaging_limit():
    c = cfg("averaging_law.cfg")
    rep = ex.validate_config(c)
    s = ex.run_experiment(c).summary
    ok = rep.ok and s["ks_p"] > KS_LEVEL
    record(3, ok, f"validator ok={rep.ok}, KS p={s['ks_p']:.4f} (>{KS_LEVEL})")
    assert ok


def test_criterion_4_mean_measures():
    tail = TailModel("pareto", 1.5)
    it = lim.mean_measure_sum_iterates(sch.ScheduleSpec(0.7, 1.0, 0.3), tail, 1.0, 4000)
    avg_spec = sch.ScheduleSpec(0.8, 1.0, 0.4)
    av = lim.mean_measure_sum_averages(avg_spec, tail, 1.0, 4000)
    bt = lim.batch_tail_sum(avg_spec, tail, 4000)
    rel = {"iterates": abs(it - 2 / 3) / (2 / 3), "averages": abs(av - 1.0), "batch_tail": abs(bt - 1.0)}
    ok = all(v <= MEAN_MEASURE_REL for v in rel.values())
    record(4, ok, f"iterates={it:.5f} (2/3, rel {rel['iterates']:.4f}), averages={av:.5f} "
                  f"(1, rel {rel['averages']:.4f}), batch tail sum={bt:.6f} (rel {rel['batch_tail']:.2e}); "
                  f"tolerance {MEAN_MEASURE_REL}")
    assert ok


def test_criterion_5_drift_identity():
    r = lim.drift_decomposition(lim.ExponentMeasure1D(1.5, 1.0, 0.0), 1.0, DRIFT_TOL)
    checks = {
        "first": abs(r.first_term - (-3.0)),
        "double": abs(r.double_integral - 1.0),
        "nu_tilde": abs(r.integral_nu_tilde - 2.0),
        "chain": abs(r.double_integral - (r.integral_nu / 1.0 - r.integral_nu_tilde)),
        "abs": abs(abs(r.gamma_tilde_direct) - abs(r.integral_nu_tilde)),
    }
    ok = all(v <= DRIFT_TOL for v in checks.values())
    record(5, ok, f"first={r.first_term:.9f}, double={r.double_integral:.9f}, "
                  f"direct={r.gamma_tilde_direct:.9f}, nu_tilde={r.integral_nu_tilde:.9f}; "
                  f"max err {max(checks.values()):.1e} (<= {DRIFT_TOL}); sign orientation unresolved")
    assert ok


@pytest.mark.slow
def test_criterion_6_cf_closure():
    meas = lim.nu_tilde(lim.pareto_measure(1.5), 1.0)
    x = lim.lepage_sample(meas, 1000, make_stream(SEED, 0, "lepage"), 10 ** 6)
    us = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    vals, se = an.empirical_cf(x, us)
    target = lim.cf_from_measure(meas, us)
    z = np.abs(vals - target) / se
    at0 = lim.cf_from_measure(meas, 0.0)
    ok = bool(np.all(z < CF_SE)) and at0 == 1.0
    record(6, ok, f"max |ecf-cf|/se={z.max():.3f} (<{CF_SE}), cf(0)={complex(at0)}")
    assert ok


@pytest.mark.slow
def test_criterion_7_lemma_suites():
    tri = ex.triangle_sweep(10 ** 6, make_stream(SEED, 0, "check", 1))
    con = ex.contraction_sweep(10 ** 5, make_stream(SEED, 0, "check", 2))
    eq = lo.check_contraction(np.diag([1.0, 2.0]), 0.5, 1.0)
    witness = eq.lhs == eq.rhs
    u, v, z = lo.theorem_moment_instance(sch.ScheduleSpec(0.5, 1.0, 1.0), 1.5, 0.5)
    r1 = lo.toeplitz_bound_ratio(u, v, z, 10 ** 5)
    r2 = lo.toeplitz_bound_ratio(u, v, z, 2 * 10 ** 5)
    growth = r2.ratio_max / r1.ratio_max - 1
    sand = []
    for rho in (0.5, 0.7):
        spec = sch.ScheduleSpec(rho)
        i0 = lo.sandwich_i0(spec, 1.0, SANDWICH_EPS)
        sand.append(lo.g_sandwich_check(spec, 1.0, [2 * i0, 4 * i0, 8 * i0], SANDWICH_EPS).holds)
    ok = tri[0] == 0 and con[0] == 0 and witness and growth < TOEPLITZ_GROWTH and all(sand)
    record(7, ok, f"p-triangle violations={tri[0]}/1e6, contraction violations={con[0]}/1e5, equality witness={witness}, "
                  f"recursion ratio doubling growth={growth:.2e} (<{TOEPLITZ_GROWTH}), G sandwich={sand}")
    assert ok


def test_criterion_8_complexity():
    r = np.linspace(0, 5, 2001)
    e_dec = all(np.all(np.diff([an.complexity_E(p, rho, x) for x in r]) < 0)
                for p in (1.1, 1.5, 1.9) for rho in (0.1, 0.5, 0.9))
    b_dec = all(np.all(np.diff([an.complexity_B(al, x) for x in np.linspace(0, 1 / (al - 1), 2001)]) < 0)
                for al in (1.1, 1.5, 1.9))
    e = an.complexity_E(1.5, 0.5, 1.0)
    b = an.complexity_B(1.5, 1.0)
    ok = e_dec and b_dec and abs(e - 4) <= SPOT_TOL and abs(b - 1 / 6) <= SPOT_TOL
    record(8, ok, f"E decreasing={e_dec}, B decreasing={b_dec}, E(1.5,1,0.5)={e!r}, B(1.5,1)={b!r}")
    assert ok


def test_criterion_9_determinism(tmp_path):
    text = (CONFIGS / "moment_rate.cfg").read_text().replace("M = 2000", "M = 200")
    outs = []
    for k in range(2):
        c = parse_config(text, CONFIGS)
        d = tmp_path / f"run{k}"
        ex.write_outputs(c, ex.run_experiment(c), d)
        outs.append(((d / "results.csv").read_bytes(), (d / "summary.json").read_bytes()))
    identical = outs[0] == outs[1]
    # replication streams: pairwise correlation of signs and of uniforms
    n = 10 ** 5
    tail = TailModel("pareto", 1.5)
    signs = np.array([np.sign(sample_scalar(tail, make_stream(SEED, r, "data"), n)) for r in range(8)])
    corr = np.corrcoef(signs)[np.triu_indices(8, 1)]
    u0 = make_stream(SEED, 0, "data").random(n)
    u1 = make_stream(SEED, 0, "oracle").random(n)
    bound = 4 / math.sqrt(n)
    indep = bool(np.all(np.abs(corr) < bound)) and abs(np.corrcoef(u0, u1)[0, 1]) < bound
    ok = identical and indep
    record(9, ok, f"byte-identical reruns={identical}, max |stream corr|={np.abs(corr).max():.4f} (<{bound:.4f})")
    assert ok
