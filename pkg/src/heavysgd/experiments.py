"""Experiment kinds driven by configuration files.

Each ``run_<kind>`` takes an :class:`~heavysgd.config.ExperimentConfig` and
returns an :class:`Outcome`: result rows (deterministic given the config),
a summary with pass/fail flags against the tolerances in ``[analysis]``,
and timing diagnostics kept out of the deterministic files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from . import lemma_oracles as lo
from . import limits as lim
from . import schedules as sch
from .config import PURPOSE, ConfigError, ExperimentConfig, from_sections
from .engine import RunConfig, monte_carlo
from .noise import make_stream

SCHEMA_VERSION = "1"
SUPPORTED_SCHEMAS = ("1",)


@dataclass
class Outcome:
    kind: str
    columns: list
    rows: list
    summary: dict
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


def _f(x):
    """Plain float for JSON/CSV (NaN and inf kept as such)."""
    return float(x)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def purpose_of(cfg: ExperimentConfig):
    if cfg.kind == "mean_measure":
        target = cfg.get("analysis", "target", "all")
        return "limit" if target == "iterates" else "averaging"
    return PURPOSE.get(cfg.kind)


def validate_config(cfg: ExperimentConfig):
    """Schedule report for the experiment's purpose, or ``None`` for kinds without a schedule.

    Raises :class:`~heavysgd.schedules.AssumptionError` when a condition fails
    or the schedule is outside the supported range (e.g. ``rho >= 1``).
    """
    purpose = purpose_of(cfg)
    if purpose is None:
        return None
    problem = cfg.problem()
    tail = cfg.tail()
    spec = cfg.schedule()
    try:
        rep = sch.validate(spec, tail.alpha, problem.a_min, problem.a_max, purpose)
    except ValueError as e:
        raise sch.AssumptionError(str(e)) from None
    if not rep.ok:
        names = ", ".join(c.name for c in rep.failed())
        raise sch.AssumptionError(f"schedule fails {purpose} conditions: {names}", rep)
    return rep


def _ensemble(cfg, record):
    problem = cfg.problem()
    rc = RunConfig(problem, cfg.schedule(), cfg.N, cfg.theta0(problem), record=record,
                   master_seed=cfg.master_seed)
    chunk = cfg.int("experiment", "chunk", 256)
    return problem, monte_carlo(rc, cfg.M, chunk=chunk)


def _divergence_warning(cfg, ens, out):
    frac = ens.n_diverged / ens.M
    limit = cfg.num("experiment", "max_diverged_fraction", 0.01)
    if frac > limit:
        out.warnings.append(f"{ens.n_diverged} of {ens.M} replications diverged "
                            f"({frac:.3%} > {limit:.3%})")


# ---------------------------------------------------------------------------
# kinds
# ---------------------------------------------------------------------------

def run_moment_rate(cfg: ExperimentConfig) -> Outcome:
    p = cfg.num("analysis", "p", 1.2)
    tol = cfg.num("analysis", "slope_tol", 0.08)
    ratio_max = cfg.num("analysis", "bound_ratio", 1.5)
    alpha = cfg.tail().alpha
    if not 1 < p < alpha:
        raise ConfigError("moment_rate needs 1 < p < alpha")
    spec = cfg.schedule()
    t0 = time.perf_counter()
    _, ens = _ensemble(cfg, cfg.N_grid)
    rows = []
    for N in cfg.N_grid:
        gb = sch.gamma(spec, N) / sch.batch(spec, N)
        mean, mom, se = ens.error_p_moment(p, N)
        rows.append({"N": N, "gamma_over_b": _f(gb), "mean_err_p": mean,
                     "mom_err_p": mom, "stderr": se, "n_diverged": ens.n_diverged})
    xs = [r["gamma_over_b"] for r in rows]
    ys = [r["mom_err_p"] for r in rows]
    fit = an.fit_rate(list(zip(xs, ys))) if len(rows) >= 3 else None
    bound = [y / x ** (p - 1) for x, y in zip(xs, ys)]
    last = bound[-3:]
    exact = p * (1 - 1 / alpha)
    summary = {
        "p": p, "alpha": alpha,
        "exponent_bound": p - 1, "exponent_exact": exact, "slope_tol": tol,
        "slope": None if fit is None else fit.slope,
        "slope_residual_rms": None if fit is None else fit.residual_rms,
        "bound_ratios": bound,
        "bound_last3_max_over_min": max(last) / min(last),
        "bound_ratio_limit": ratio_max,
    }
    summary["pass_bound"] = summary["bound_last3_max_over_min"] < ratio_max
    summary["pass_slope"] = (fit is not None and abs(fit.slope - exact) <= tol and fit.slope >= p - 1)
    summary["pass"] = summary["pass_bound"] and summary["pass_slope"]
    out = Outcome(cfg.kind, ["N", "gamma_over_b", "mean_err_p", "mom_err_p", "stderr", "n_diverged"],
                  rows, summary, {"wall_time": time.perf_counter() - t0})
    _divergence_warning(cfg, ens, out)
    return out


def _oracle(cfg, problem, averaged):
    tail = cfg.tail()
    a = float(problem.A[0, 0])
    n = cfg.int("analysis", "oracle_size", cfg.M)
    rng = make_stream(cfg.master_seed, 0, "oracle")
    if tail.kind == "stable":
        if averaged:
            from .noise import sample_stable
            return sample_stable(tail.alpha, tail.scale / a, rng, n), f"stable(scale={tail.scale / a!r})"
        z = lim.z_infinity_stable_exact(tail.alpha, tail.scale, a)
        return z.sample(rng, n), f"stable(scale={z.scale!r})"
    base = lim.pareto_measure(tail.alpha)
    meas = lim.nu_bar(base, a) if averaged else lim.nu_tilde(base, a)
    terms = cfg.int("analysis", "lepage_terms", 1000)
    return (lim.lepage_sample(meas, terms, rng, n),
            f"lepage(c_plus={meas.c_plus!r}, c_minus={meas.c_minus!r}, terms={terms})")


def _law(cfg: ExperimentConfig, averaged: bool) -> Outcome:
    level = cfg.num("analysis", "ks_level", 0.01)
    t0 = time.perf_counter()
    problem, ens = _ensemble(cfg, "endpoint")
    if problem.dim != 1 or cfg.get("problem", "name", "quadratic") != "quadratic":
        raise ConfigError("limit-law experiments need a 1-d quadratic problem")
    x = (ens.normalized_averages() if averaged else ens.normalized_iterates())[:, 0]
    oracle, desc = _oracle(cfg, problem, averaged)
    D, pval = an.ks_two_sample(x, oracle)
    rows = ([{"source": "sgd", "index": i, "value": _f(v)} for i, v in enumerate(x)]
            + [{"source": "oracle", "index": i, "value": _f(v)} for i, v in enumerate(oracle)])
    summary = {"ks_D": D, "ks_p": pval, "ks_level": level, "n_sgd": int(x.size),
               "n_oracle": int(oracle.size), "oracle": desc, "n_diverged": ens.n_diverged,
               "normalizer": ens.normalizer_kind, "pass": bool(pval > level)}
    out = Outcome(cfg.kind, ["source", "index", "value"], rows, summary,
                  {"wall_time": time.perf_counter() - t0})
    _divergence_warning(cfg, ens, out)
    return out


def run_limit_law(cfg):
    return _law(cfg, averaged=False)


def run_averaging_law(cfg):
    return _law(cfg, averaged=True)


def run_mean_measure(cfg: ExperimentConfig) -> Outcome:
    tail = cfg.tail()
    if tail.kind != "pareto":
        raise ConfigError("mean_measure needs Pareto noise")
    problem = cfg.problem()
    if problem.dim != 1:
        raise ConfigError("mean_measure is 1-d")
    a = float(problem.A[0, 0])
    spec = cfg.schedule()
    s = cfg.num("analysis", "s", 1.0)
    tol = cfg.num("analysis", "rel_tol", 0.05)
    target = cfg.get("analysis", "target", "all")
    if target not in ("all", "iterates", "averages", "batch_tail"):
        raise ConfigError(f"unknown mean_measure target {target!r}")
    want = ("iterates", "averages", "batch_tail") if target == "all" else (target,)
    goals = {"iterates": 2 * 0.5 / (tail.alpha * a) * s ** -tail.alpha,
             "averages": (a * s) ** -tail.alpha, "batch_tail": 1.0}
    rows = []
    for N in cfg.N_grid:
        row = {"N": N}
        for w in ("iterates", "averages", "batch_tail"):
            if w not in want:
                row[w] = float("nan")
            elif w == "iterates":
                row[w] = lim.mean_measure_sum_iterates(spec, tail, a, N, s)
            elif w == "averages":
                row[w] = lim.mean_measure_sum_averages(spec, tail, a, N, s)
            else:
                row[w] = lim.batch_tail_sum(spec, tail, N)
        rows.append(row)
    summary = {"s": s, "rel_tol": tol, "targets": {w: goals[w] for w in want}, "checks": {}}
    ok = True
    for w in want:
        v = rows[-1][w]
        rel = abs(v - goals[w]) / goals[w]
        diffs = [abs(rows[k + 1][w] - rows[k][w]) for k in range(len(rows) - 1)]
        summary["checks"][w] = {"value": v, "target": goals[w], "rel_err": rel,
                                "pass": bool(rel <= tol), "cauchy_diffs": diffs}
        ok = ok and rel <= tol
    summary["pass"] = bool(ok)
    return Outcome(cfg.kind, ["N", "iterates", "averages", "batch_tail"], rows, summary)


def _pairs(raw):
    out = []
    for tok in raw.split(","):
        if not tok.strip():
            continue
        cp, _, cm = tok.partition(":")
        out.append((float(cp), float(cm)))
    return out


def run_drift_check(cfg: ExperimentConfig) -> Outcome:
    alpha = cfg.num("noise", "alpha", 1.5)
    tol = cfg.num("analysis", "tol", 1e-6)
    try:
        measures = _pairs(cfg.get("analysis", "measures", "1:0, 0.5:0.5, 0.2:0.8"))
    except ValueError:
        raise ConfigError("[analysis] measures: expected c_plus:c_minus pairs") from None
    a_grid = cfg.floats("analysis", "a_grid", [1.0])
    rows = []
    ok = True
    for cp, cm in measures:
        m = lim.ExponentMeasure1D(alpha, cp, cm)
        for a in a_grid:
            r = lim.drift_decomposition(m, a, tol)
            identity = r.double_integral - (r.integral_nu / a - r.integral_nu_tilde)
            first_cf = -alpha * (cp - cm) / (a * (alpha - 1))
            double_cf = (cp - cm) / a
            row = {"alpha": alpha, "c_plus": cp, "c_minus": cm, "a": a,
                   "first_term": r.first_term, "double_integral": r.double_integral,
                   "gamma_tilde_direct": r.gamma_tilde_direct,
                   "integral_nu_tilde": r.integral_nu_tilde,
                   "identity_residual": identity,
                   "first_term_err": r.first_term - first_cf,
                   "double_integral_err": r.double_integral - double_cf}
            good = (abs(identity) <= tol and abs(row["first_term_err"]) <= tol
                    and abs(row["double_integral_err"]) <= tol
                    and abs(abs(r.gamma_tilde_direct) - abs(r.integral_nu_tilde)) <= tol)
            row["pass"] = int(good)
            ok = ok and good
            rows.append(row)
    summary = {"tol": tol, "pass": bool(ok),
               "orientation": "direct total = -(integral against nu_tilde); sign convention unresolved"}
    return Outcome(cfg.kind, list(rows[0]), rows, summary)


def run_lemma_sweep(cfg: ExperimentConfig) -> Outcome:
    seed = cfg.master_seed
    n_tri = cfg.int("analysis", "triangle_draws", 10 ** 6)
    n_con = cfg.int("analysis", "contraction_draws", 10 ** 5)
    n_toe = cfg.int("analysis", "toeplitz_n", 10 ** 5)
    eps = cfg.num("analysis", "sandwich_eps", 0.05)
    rows = []

    tri = triangle_sweep(n_tri, make_stream(seed, 0, "check", 1))
    rows.append({"lemma": "p_triangle", "draws": n_tri, "violations": tri[0], "max_excess": tri[1]})
    con = contraction_sweep(n_con, make_stream(seed, 0, "check", 2))
    rows.append({"lemma": "contraction", "draws": n_con, "violations": con[0], "max_excess": con[1]})

    spec = sch.ScheduleSpec(0.5, 1.0, 1.0)
    u, v, z = lo.theorem_moment_instance(spec, 1.5, 0.5)
    r1 = lo.toeplitz_bound_ratio(u, v, z, n_toe)
    r2 = lo.toeplitz_bound_ratio(u, v, z, 2 * n_toe)
    growth = r2.ratio_max / r1.ratio_max - 1
    rows.append({"lemma": "toeplitz", "draws": n_toe, "violations": int(growth >= 0.02),
                 "max_excess": growth})

    rho = cfg.num("analysis", "sandwich_rho", 0.7)
    sspec = sch.ScheduleSpec(rho, 1.0)
    i0 = lo.sandwich_i0(sspec, 1.0, eps)
    grid = [int(g) for g in cfg.floats("analysis", "sandwich_grid", [i0, 2 * i0, 4 * i0])]
    sw = lo.g_sandwich_check(sspec, 1.0, grid, eps)
    rows.append({"lemma": "g_sandwich", "draws": len(grid), "violations": int(not sw.holds),
                 "max_excess": max(sw.upper_max - (1 + eps), (1 - eps) - sw.lower_min)})
    summary = {"pass": all(r["violations"] == 0 for r in rows),
               "toeplitz_ratio": [r1.ratio_max, r2.ratio_max],
               "sandwich": {"i0": sw.i0, "T": sw.T, "upper_max": sw.upper_max,
                            "lower_min": sw.lower_min, "eps": eps, "rho": rho}}
    return Outcome(cfg.kind, ["lemma", "draws", "violations", "max_excess"], rows, summary)


def triangle_sweep(n, rng, d_max=5, block=200_000):
    """Random ``(x, y, p, d)`` with log-uniform magnitudes; returns (violations, max relative excess)."""
    viol, worst = 0, -np.inf
    for s in range(0, n, block):
        m = min(block, n - s)
        d = rng.integers(1, d_max + 1, m)
        mask = np.arange(d_max)[None, :] < d[:, None]
        x = rng.standard_normal((m, d_max)) * np.exp(rng.uniform(-4, 4, (m, 1))) * mask
        y = rng.standard_normal((m, d_max)) * np.exp(rng.uniform(-4, 4, (m, 1))) * mask
        p = rng.uniform(1, 2, m)
        res = lo.check_p_triangle(x, y, p)
        excess = (res.lhs - res.rhs) / np.maximum(res.rhs, 1e-300)
        viol += int(np.sum(excess > 1e-12))
        worst = max(worst, float(excess.max()))
    return viol, worst


def contraction_sweep(n, rng, lo_ev=0.5, hi_ev=4.0):
    viol, worst = 0, -np.inf
    for _ in range(n):
        d = int(rng.integers(1, 6))
        ev = rng.uniform(lo_ev, hi_ev, d)
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        A = (q * ev) @ q.T
        A = 0.5 * (A + A.T)
        t = rng.uniform(0, 1 / np.linalg.eigvalsh(A)[-1])
        p = float(rng.choice([1.0, 1.3, 2.0]))
        r = lo.check_contraction(A, t, p)
        e = r.lhs - r.rhs
        viol += int(e > 1e-12)
        worst = max(worst, e)
    return viol, worst


def run_complexity_table(cfg: ExperimentConfig) -> Outcome:
    p_grid = cfg.floats("analysis", "p_grid", [1.2, 1.5])
    rho_grid = cfg.floats("analysis", "rho_grid", [0.25, 0.5, 0.75])
    r_grid = cfg.floats("analysis", "r_grid", [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0])
    alpha_grid = cfg.floats("analysis", "alpha_grid", [1.2, 1.5, 1.8])
    rows = []
    for p in p_grid:
        for rho in rho_grid:
            for r in r_grid:
                if rho + r > 0:
                    rows.append({"quantity": "E", "p": p, "rho": rho, "r": r, "alpha": float("nan"),
                                 "value": an.complexity_E(p, rho, r)})
    for alpha in alpha_grid:
        for r in r_grid:
            if r * (alpha - 1) < 1:
                rows.append({"quantity": "B", "p": float("nan"), "rho": float("nan"), "r": r,
                             "alpha": alpha, "value": an.complexity_B(alpha, r)})

    def decreasing(q, key):
        groups = {}
        for row in rows:
            if row["quantity"] == q:
                groups.setdefault(tuple(row[k] for k in key), []).append((row["r"], row["value"]))
        return all(all(v2 < v1 for (_, v1), (_, v2) in zip(g, g[1:]))
                   for g in (sorted(v) for v in groups.values()) if len(g) > 1)

    e_dec = decreasing("E", ("p", "rho"))
    b_dec = decreasing("B", ("alpha",))
    summary = {"E_decreasing_in_r": e_dec, "B_decreasing_in_r": b_dec,
               "E_1.5_1_0.5": an.complexity_E(1.5, 0.5, 1.0), "B_1.5_1": an.complexity_B(1.5, 1.0),
               "pass": bool(e_dec and b_dec)}
    return Outcome(cfg.kind, ["quantity", "p", "rho", "r", "alpha", "value"], rows, summary)


RUNNERS = {
    "moment_rate": run_moment_rate,
    "limit_law": run_limit_law,
    "averaging_law": run_averaging_law,
    "mean_measure": run_mean_measure,
    "drift_check": run_drift_check,
    "lemma_sweep": run_lemma_sweep,
    "complexity_table": run_complexity_table,
}


def run_experiment(cfg: ExperimentConfig) -> Outcome:
    validate_config(cfg)
    return RUNNERS[cfg.kind](cfg)


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_rows(columns, rows, fmt="csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])
        return buf.getvalue()
    lines = []
    for row in rows:
        rec = {}
        for c in columns:
            v = row[c]
            if isinstance(v, (float, np.floating)):
                v = float(v)
                v = v if math.isfinite(v) else repr(v)
            elif isinstance(v, (np.integer, np.bool_)):
                v = v.item()
            rec[c] = v
        lines.append(json.dumps(rec))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


def write_outputs(cfg: ExperimentConfig, out: Outcome, outdir: Path | None = None,
                  wall_time: float | None = None) -> Path:
    outdir = Path(outdir) if outdir is not None else cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    fmt = cfg.output_format
    name = f"results.{fmt}"
    body = format_rows(out.columns, out.rows, fmt)
    (outdir / name).write_text(body, encoding="utf-8", newline="\n")
    summary = json.dumps(_jsonable({"kind": out.kind, **out.summary}), indent=2, sort_keys=True) + "\n"
    (outdir / "summary.json").write_text(summary, encoding="utf-8", newline="\n")
    sections = cfg.to_dict()
    sections.setdefault("experiment", {})["output"] = str(outdir.resolve())
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package": "heavysgd",
        "version": __version__,
        "kind": cfg.kind,
        "master_seed": cfg.master_seed,
        "config": sections,
        "results_file": name,
        "columns": out.columns,
        "results_sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
        "wall_time": wall_time if wall_time is not None else out.diagnostics.get("wall_time"),
        "warnings": out.warnings,
    }
    (outdir / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8", newline="\n")
    return outdir


class ManifestError(ValueError):
    pass


def read_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        man = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"missing or corrupt manifest: {e}") from None
    if not isinstance(man, dict) or "schema_version" not in man:
        raise ManifestError("manifest has no schema_version")
    if str(man["schema_version"]) not in SUPPORTED_SCHEMAS:
        raise ManifestError(f"unsupported schema version {man['schema_version']!r}")
    for key in ("kind", "config", "results_file"):
        if key not in man:
            raise ManifestError(f"manifest lacks {key!r}")
    return man


def config_from_manifest(man: dict) -> ExperimentConfig:
    return from_sections(man["config"])


def read_results(outdir) -> tuple[dict, list]:
    outdir = Path(outdir)
    man = read_manifest(outdir)
    path = outdir / man["results_file"]
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"cannot read results: {e}") from None
    if path.suffix == ".csv":
        rows = list(csv.DictReader(io.StringIO(text)))
    else:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    return man, rows
