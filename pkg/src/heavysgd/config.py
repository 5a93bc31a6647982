"""Experiment configuration files.

Grammar: INI-style sections of ``key = value`` lines (``configparser``),
``#`` comments (``;`` only at the start of a line). Lists are comma separated; matrix rows are separated
by ``;``. Recognized sections and keys::

    [experiment]
    kind          = moment_rate | limit_law | averaging_law | mean_measure
                    | drift_check | lemma_sweep | complexity_table
    N             = 3000            (or a grid: 250, 500, 1000)
    M             = 4000
    master_seed   = 20261015
    output        = out/limit       (relative to the config file)
    format        = csv | jsonl
    max_diverged_fraction = 0.01

    [problem]
    name          = quadratic | linear_regression
    a             = 1.0             (1-d shortcut, or A = 1, 0; 0, 2)
    theta_star    = 0
    theta0        = 1
    x_law, x_scale                  (linear_regression only)

    [noise]
    kind = pareto | stable, alpha = 1.5, scale = 1.0, log_kappa (optional)

    [schedule]
    rho = 0.7, c_gamma = 1, r = 0.3, c_batch = 1

    [analysis]
    kind-specific keys (p, slope_tol, ks_level, oracle_size, ...)

Unknown sections or keys are rejected so typos do not silently fall back to
defaults.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .noise import TailModel
from .problems import LinearRegressionProblem, QuadraticProblem
from .schedules import ScheduleSpec

KINDS = ("moment_rate", "limit_law", "averaging_law", "mean_measure",
         "drift_check", "lemma_sweep", "complexity_table")

PURPOSE = {
    "moment_rate": "moment",
    "limit_law": "limit",
    "averaging_law": "averaging",
    "mean_measure": "averaging",
}

ALLOWED = {
    "experiment": {"kind", "n", "m", "master_seed", "output", "format", "max_diverged_fraction", "chunk"},
    "problem": {"name", "a", "theta_star", "theta0", "x_law", "x_scale"},
    "noise": {"kind", "alpha", "scale", "log_kappa"},
    "schedule": {"rho", "c_gamma", "r", "c_batch"},
    "analysis": {
        "p", "slope_tol", "bound_ratio", "ks_level", "oracle_size", "lepage_terms",
        "s", "rel_tol", "target", "measures", "a_grid", "tol",
        "triangle_draws", "contraction_draws", "toeplitz_n", "sandwich_eps", "sandwich_rho",
        "sandwich_grid", "p_grid", "rho_grid", "r_grid", "alpha_grid", "eps",
    },
}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    kind: str
    sections: dict
    base_dir: Path = field(default_factory=Path.cwd)

    # -- raw access --------------------------------------------------------
    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def _num(self, section, key, default, cast=float):
        raw = self.get(section, key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing [{section}] {key}")
            return default
        try:
            return cast(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None

    def num(self, section, key, default=None):
        return self._num(section, key, default, float)

    def int(self, section, key, default=None):
        def to_int(s):
            v = float(s)
            if v != int(v):
                raise ValueError(s)
            return int(v)
        return self._num(section, key, default, to_int)

    def floats(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing [{section}] {key}")
            return list(default)
        try:
            return [float(t) for t in raw.replace(";", ",").split(",") if t.strip()]
        except ValueError:
            raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None

    # -- resolved objects --------------------------------------------------
    @property
    def N_grid(self):
        vals = self.floats("experiment", "n")
        if not vals or any(v < 1 or v != int(v) for v in vals):
            raise ConfigError("[experiment] N must be positive integers")
        return sorted({int(v) for v in vals})

    @property
    def N(self):
        return self.N_grid[-1]

    @property
    def M(self):
        m = self.int("experiment", "m", 1)
        if m < 1:
            raise ConfigError("[experiment] M must be >= 1")
        return m

    @property
    def master_seed(self):
        s = self.int("experiment", "master_seed", 0)
        if s < 0:
            raise ConfigError("master_seed must be >= 0")
        return s

    @property
    def output_format(self):
        fmt = self.get("experiment", "format", "csv")
        if fmt not in ("csv", "jsonl"):
            raise ConfigError(f"unknown output format {fmt!r}")
        return fmt

    @property
    def output_dir(self) -> Path:
        out = self.get("experiment", "output")
        if out is None:
            raise ConfigError("missing [experiment] output")
        p = Path(out)
        return p if p.is_absolute() else self.base_dir / p

    def tail(self) -> TailModel | None:
        if "noise" not in self.sections:
            return None
        try:
            lk = self.get("noise", "log_kappa")
            return TailModel(kind=self.get("noise", "kind", "pareto"),
                             alpha=self.num("noise", "alpha", 1.5),
                             scale=self.num("noise", "scale", 1.0),
                             log_kappa=None if lk is None else float(lk))
        except ValueError as e:
            raise ConfigError(f"[noise] {e}") from None

    def schedule(self) -> ScheduleSpec:
        if "schedule" not in self.sections:
            raise ConfigError("missing [schedule] section")
        try:
            return ScheduleSpec(rho=self.num("schedule", "rho"),
                                c_gamma=self.num("schedule", "c_gamma", 1.0),
                                r=self.num("schedule", "r", 0.0),
                                c_batch=self.num("schedule", "c_batch", 1.0))
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"[schedule] {e}") from None

    def matrix_A(self):
        raw_A = self.get("problem", "a")
        if raw_A is None:
            return np.array([[1.0]])
        try:
            rows = [[float(t) for t in row.split(",") if t.strip()] for row in raw_A.split(";")]
            A = np.array(rows, dtype=float)
        except ValueError:
            raise ConfigError(f"[problem] A: cannot parse {raw_A!r}") from None
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConfigError("[problem] A must be square")
        return A

    def problem(self):
        name = self.get("problem", "name", "quadratic")
        tail = self.tail()
        try:
            if name == "quadratic":
                A = self.matrix_A()
                ts = self.floats("problem", "theta_star", [0.0] * A.shape[0])
                return QuadraticProblem(A, np.array(ts), tail)
            if name == "linear_regression":
                return LinearRegressionProblem(self.num("problem", "theta_star", 0.0), tail,
                                               self.get("problem", "x_law", "normal"),
                                               self.num("problem", "x_scale", 1.0))
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"[problem] {e}") from None
        raise ConfigError(f"unknown problem {name!r}")

    def theta0(self, problem):
        raw = self.get("problem", "theta0")
        if raw is None:
            return None
        vals = self.floats("problem", "theta0")
        if len(vals) == 1:
            vals = vals * problem.dim
        return np.array(vals)

    def to_dict(self):
        return {s: dict(sorted(kv.items())) for s, kv in sorted(self.sections.items())}


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax: {e}") from None
    sections = {}
    for sec in cp.sections():
        name = sec.strip().lower()
        if name not in ALLOWED:
            raise ConfigError(f"unknown section [{sec}]")
        keys = {k.lower(): v.strip() for k, v in cp.items(sec)}
        bad = set(keys) - ALLOWED[name]
        if bad:
            raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(bad))}")
        sections[name] = keys
    return from_sections(sections, base_dir)


def from_sections(sections: dict, base_dir: Path | None = None) -> ExperimentConfig:
    sections = {s.lower(): {k.lower(): str(v) for k, v in kv.items()} for s, kv in sections.items()}
    kind = sections.get("experiment", {}).get("kind")
    if kind not in KINDS:
        raise ConfigError(f"[experiment] kind must be one of {', '.join(KINDS)}; got {kind!r}")
    cfg = ExperimentConfig(kind, sections, Path(base_dir) if base_dir else Path.cwd())
    # touch the fields every kind needs so errors surface early
    cfg.output_format
    cfg.master_seed
    if kind in PURPOSE:
        cfg.N_grid
        cfg.M
        cfg.schedule()
        if cfg.tail() is None:
            raise ConfigError("missing [noise] section")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    return parse_config(text, path.parent)


def dump_config(cfg: ExperimentConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    for s, kv in cfg.to_dict().items():
        cp[s] = kv
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
