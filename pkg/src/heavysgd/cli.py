"""Command line entry point: ``heavysgd {run,report,validate,seeds}``.

Exit codes: 0 success (possibly with warnings), 1 corrupt or missing
results, 2 invalid configuration, 3 a schedule/assumption check failed.
The replication-level thread count is read from ``HEAVYSGD_THREADS``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis as an
from . import experiments as ex
from .config import ConfigError, ExperimentConfig, load_config
from .noise import stream_fingerprint
from .schedules import AssumptionError

EXIT_OK, EXIT_RESULTS, EXIT_CONFIG, EXIT_ASSUMPTION = 0, 1, 2, 3


def _load(path) -> ExperimentConfig:
    path = Path(path)
    if path.suffix == ".json" or path.is_dir():
        try:
            return ex.config_from_manifest(ex.read_manifest(path))
        except ex.ManifestError as e:
            raise ConfigError(str(e)) from None
    return load_config(path)


def cmd_run(args) -> int:
    cfg = _load(args.config)
    t0 = time.perf_counter()
    out = ex.run_experiment(cfg)
    outdir = ex.write_outputs(cfg, out, args.output, wall_time=time.perf_counter() - t0)
    for w in out.warnings:
        print(f"warning: {w}", file=sys.stderr)
    verdict = out.summary.get("pass")
    print(f"{cfg.kind}: wrote {outdir}" + ("" if verdict is None else f" (pass={verdict})"))
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    try:
        rep = ex.validate_config(cfg)
    except AssumptionError as e:
        if e.report is not None:
            print(e.report.summary())
        print(f"invalid: {e}", file=sys.stderr)
        return EXIT_ASSUMPTION
    if rep is None:
        print(f"{cfg.kind}: no schedule conditions to check")
    else:
        print(rep.summary())
    return EXIT_OK


def cmd_seeds(args) -> int:
    cfg = _load(args.config)
    M = cfg.M if cfg.get("experiment", "m") is not None else 1
    n = M if args.limit is None else min(M, args.limit)
    print(f"master_seed={cfg.master_seed} generator=Philox key=(replication, domain, segment)")
    print("replication,domain,segment,state")
    for m in range(n):
        print(f"{m},data,0,{stream_fingerprint(cfg.master_seed, m, 'data', 0)}")
    for dom in ("oracle", "check"):
        print(f"0,{dom},-,{stream_fingerprint(cfg.master_seed, 0, dom)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def _write_plot(path: Path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def _ecdf_rows(a, b, points=200):
    a, b = np.sort(a), np.sort(b)
    both = np.concatenate([a, b])
    xs = np.quantile(both, np.linspace(0.005, 0.995, points))
    return [(x, np.searchsorted(a, x, "right") / a.size, np.searchsorted(b, x, "right") / b.size) for x in xs]


def cmd_report(args) -> int:
    outdir = Path(args.results)
    try:
        man, rows = ex.read_results(outdir)
        summary = json.loads((outdir / "summary.json").read_text(encoding="utf-8"))
    except (ex.ManifestError, OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RESULTS
    kind = man["kind"]
    plots = outdir / "plots"
    plots.mkdir(exist_ok=True)
    print(f"kind: {kind}   seed: {man.get('master_seed')}   version: {man.get('version')}")
    if kind == "moment_rate":
        print(f"{'N':>8} {'gamma/b':>12} {'MoM E|e|^p':>12} {'mean':>12} {'stderr':>10}")
        pts = []
        for r in rows:
            print(f"{int(r['N']):>8} {float(r['gamma_over_b']):>12.4e} {float(r['mom_err_p']):>12.4e} "
                  f"{float(r['mean_err_p']):>12.4e} {float(r['stderr']):>10.2e}")
            pts.append((float(r["gamma_over_b"]), float(r["mom_err_p"])))
        print(f"fitted slope {summary['slope']:.4f}; bound exponent p-1 = {summary['exponent_bound']:.4f}; "
              f"exact exponent p(1-1/alpha) = {summary['exponent_exact']:.4f}")
        print(f"bound ratio (last 3 max/min) {summary['bound_last3_max_over_min']:.4f}")
        _write_plot(plots / "moment_rate.csv", ["log_gamma_over_b", "log_mom_err_p"],
                    [(np.log(x), np.log(y)) for x, y in pts])
    elif kind in ("limit_law", "averaging_law"):
        a = np.array([float(r["value"]) for r in rows if r["source"] == "sgd"])
        b = np.array([float(r["value"]) for r in rows if r["source"] == "oracle"])
        print(f"KS D = {summary['ks_D']:.5f}, p = {summary['ks_p']:.4g} (level {summary['ks_level']}), "
              f"n_sgd = {summary['n_sgd']}, oracle = {summary['oracle']} with n = {summary['n_oracle']}")
        _write_plot(plots / "ecdf.csv", ["x", "F_sgd", "F_oracle"], _ecdf_rows(a, b))
        us = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
        ca, sa = an.empirical_cf(a, us)
        cb, sb = an.empirical_cf(b, us)
        _write_plot(plots / "ecf.csv", ["u", "re_sgd", "se_sgd", "re_oracle", "se_oracle"],
                    [(u, x.real, s1, y.real, s2) for u, x, s1, y, s2 in zip(us, ca, sa, cb, sb)])
    elif kind == "mean_measure":
        print(f"{'N':>8} {'iterates':>12} {'averages':>12} {'batch_tail':>12}")
        for r in rows:
            print(f"{int(r['N']):>8} {float(r['iterates']):>12.6f} {float(r['averages']):>12.6f} "
                  f"{float(r['batch_tail']):>12.6f}")
        for name, c in summary["checks"].items():
            print(f"{name}: {c['value']:.6f} vs target {c['target']:.6f} (rel err {c['rel_err']:.3%})")
        _write_plot(plots / "mean_measure.csv", ["N", "iterates", "averages", "batch_tail"],
                    [(int(r["N"]), float(r["iterates"]), float(r["averages"]), float(r["batch_tail"]))
                     for r in rows])
    elif kind == "drift_check":
        for r in rows:
            print(f"c+={r['c_plus']} c-={r['c_minus']} a={r['a']}: direct {float(r['gamma_tilde_direct']):+.8f} "
                  f"nu_tilde integral {float(r['integral_nu_tilde']):+.8f} "
                  f"identity residual {float(r['identity_residual']):.2e}")
    elif kind == "lemma_sweep":
        for r in rows:
            print(f"{r['lemma']:>12}: draws {r['draws']}, violations {r['violations']}, "
                  f"max excess {float(r['max_excess']):.3e}")
    elif kind == "complexity_table":
        E = [r for r in rows if r["quantity"] == "E"]
        B = [r for r in rows if r["quantity"] == "B"]
        print("E(r, rho) = p(r+1)/((p-1)(rho+r))")
        for r in E:
            print(f"  p={r['p']} rho={r['rho']} r={r['r']}: {float(r['value']):.6f}")
        print("B(alpha, r) = (1 - r(alpha-1))/(alpha(1+r))")
        for r in B:
            print(f"  alpha={r['alpha']} r={r['r']}: {float(r['value']):.6f}")
        _write_plot(plots / "complexity.csv", ["quantity", "p", "rho", "r", "alpha", "value"],
                    [(r["quantity"], r["p"], r["rho"], r["r"], r["alpha"], r["value"]) for r in rows])
    print(f"pass: {summary.get('pass')}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heavysgd", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment from a config file or a manifest")
    p.add_argument("config")
    p.add_argument("--output", default=None, help="override the output directory")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("report", help="summarize a results directory and emit plot data")
    p.add_argument("results")
    p.set_defaults(func=cmd_report)
    p = sub.add_parser("validate", help="check a config's schedule conditions")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("seeds", help="print the derived stream states")
    p.add_argument("config")
    p.add_argument("--limit", type=int, default=None)
    p.set_defaults(func=cmd_seeds)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionError as e:
        print(f"assumption check failed: {e}", file=sys.stderr)
        return EXIT_ASSUMPTION


if __name__ == "__main__":
    sys.exit(main())
