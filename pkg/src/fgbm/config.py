"""Experiment configuration: an INI file read with :mod:`configparser`.

List-valued fields (``theta``) are JSON.  Policies are whitespace-separated
tokens::

    vertex:I                     constant vertex I
    mix:W0:W1[:W2...]            constant convex mix
    switch-random:SEED:EVERY     random vertex per block of EVERY cells
    switch-sign:A:B:COMP         vertex A while component COMP < 0, else B
    anti-<token>                 antithetic pairs of <token>

Every problem is collected before raising, so one run reports all bad
fields at once.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .priors import AntitheticPair, ConstantMix, ConstantVertex, PiecewiseSwitch, ScenarioPolicy, UncertaintySet

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_policy", "default_config_path", "TOLERANCE_DEFAULTS"]

TOLERANCE_DEFAULTS = {
    "n_se": 3.0,  # Monte Carlo band in standard errors
    "rel": 0.02,  # relative discretization allowance
    "autocov_rel": 0.05,  # relative allowance on unit-lag autocovariances
    "slope": 0.1,  # absolute tolerance on fitted log-log slopes
    "memory_slope": 0.15,  # absolute tolerance on the autocovariance decay exponent
    "p_min": 0.01,  # minimum p-value of distribution tests
    "residual": 1e-2,  # Itô residual per unit path scale
    "sde_rtol": 0.05,  # relative error of the SDE solver
    "bound_slack": 0.05,  # slack on the pathwise integral bound
}


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists ``(field, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{k}: {m}" for k, m in self.problems))

    def report(self) -> str:
        return "\n".join(f"  {k}: {m}" for k, m in self.problems)


@dataclass
class ExperimentConfig:
    name: str
    h: float
    theta: UncertaintySet
    n: int
    horizon: float
    paths: int
    policies: list
    seed: int
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCE_DEFAULTS))
    out: str = "fgbm-out"
    jobs: int = 1
    extras: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.theta.dim

    def tol(self, key: str) -> float:
        return self.tolerances[key]

    def echo(self) -> dict:
        """Config as parsed from the file, for report headers (``out`` excluded)."""
        doc = {sec: dict(vals) for sec, vals in self.source.items()}
        doc.setdefault("experiment", {}).pop("out", None)
        doc["experiment"]["seed"] = str(self.seed)
        doc["experiment"].pop("jobs", None)
        return doc


def default_config_path() -> Path:
    return Path(str(resources.files("fgbm") / "data" / "default.ini"))


def parse_policy(token: str) -> ScenarioPolicy:
    """Policy object from one token (see module docstring)."""
    if token.startswith("anti-"):
        return AntitheticPair(parse_policy(token[5:]))
    kind, *args = token.split(":")
    try:
        if kind == "vertex" and len(args) == 1:
            return ConstantVertex(int(args[0]))
        if kind == "mix" and args:
            return ConstantMix(tuple(float(a) for a in args))
        if kind == "switch-random" and len(args) == 2:
            return PiecewiseSwitch(seed=int(args[0]), rule="random", every=int(args[1]))
        if kind == "switch-sign" and len(args) == 3:
            return PiecewiseSwitch(rule="sign", vertices=(int(args[0]), int(args[1])), component=int(args[2]))
    except ValueError as exc:
        raise ValueError(f"bad policy token {token!r}: {exc}") from None
    raise ValueError(f"unknown policy token {token!r}")


def _theta(raw: str) -> UncertaintySet:
    try:
        v = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"not valid JSON ({exc.msg})") from None
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ValueError("vertices must be a list of variances or of square matrices") from None
    return UncertaintySet(arr)


def _number(problems, section, key, cast, check, what, default=None):
    raw = section.get(key)
    where = f"[{section.name}] {key}"
    if raw is None:
        if default is None:
            problems.append((where, "missing"))
        return default
    try:
        val = cast(raw)
    except ValueError:
        problems.append((where, f"{raw!r} is not {what}"))
        return default
    if not check(val):
        problems.append((where, f"{raw!r} is not {what}"))
        return default
    return val


def load_config(path=None, seed: int | None = None, out: str | None = None, jobs: int | None = None) -> ExperimentConfig:
    """Read and validate a config file; flags override the file's seed, out and jobs."""
    path = default_config_path() if path is None else Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError([("file", f"cannot read {path}: {exc.strerror}")]) from None
    except configparser.Error as exc:
        raise ConfigError([("file", str(exc).splitlines()[0])]) from None

    problems = []
    for sec in ("experiment", "model"):
        if not parser.has_section(sec):
            problems.append((f"[{sec}]", "section missing"))
    if problems:
        raise ConfigError(problems)
    exp, model = parser["experiment"], parser["model"]
    positive_int = lambda v: v > 0

    name = exp.get("name", path.stem)
    file_seed = _number(problems, exp, "seed", int, lambda v: 0 <= v < 2**64, "an unsigned 64-bit integer", 0)
    file_jobs = _number(problems, exp, "jobs", int, positive_int, "a positive integer", 1)
    h = _number(problems, model, "h", float, lambda v: 0 < v < 1, "a Hurst index in (0, 1)")
    n = _number(problems, model, "n", int, positive_int, "a positive integer")
    horizon = _number(problems, model, "horizon", float, lambda v: math.isfinite(v) and v > 0, "a positive number", 1.0)
    m = _number(problems, model, "paths", int, lambda v: v >= 2, "an integer >= 2")

    theta = None
    if "theta" not in model:
        problems.append(("[model] theta", "missing"))
    else:
        try:
            theta = _theta(model["theta"])
        except ValueError as exc:
            problems.append(("[model] theta", str(exc)))

    policies = []
    tokens = model.get("policies", "").split()
    if not tokens:
        problems.append(("[model] policies", "at least one policy is required"))
    for tok in tokens:
        try:
            pol = parse_policy(tok)
            if theta is not None:
                pol.validate(theta)
            policies.append(pol)
        except (ValueError, IndexError) as exc:
            problems.append(("[model] policies", str(exc)))
    ids = [p.policy_id for p in policies]
    if len(set(ids)) != len(ids):
        problems.append(("[model] policies", "duplicate policy"))

    tolerances = dict(TOLERANCE_DEFAULTS)
    if parser.has_section("tolerances"):
        tsec = parser["tolerances"]
        for key in tsec:
            if key not in TOLERANCE_DEFAULTS:
                problems.append((f"[tolerances] {key}", f"unknown tolerance (known: {', '.join(TOLERANCE_DEFAULTS)})"))
                continue
            val = _number(problems, tsec, key, float, lambda v: math.isfinite(v) and v > 0, "a positive number")
            if val is not None:
                tolerances[key] = val

    if problems:
        raise ConfigError(problems)
    known = {"experiment", "model", "tolerances"}
    extras = {s: dict(parser[s]) for s in parser.sections() if s not in known}
    return ExperimentConfig(
        name=name,
        h=h,
        theta=theta,
        n=n,
        horizon=horizon,
        paths=m,
        policies=policies,
        seed=file_seed if seed is None else seed,
        tolerances=tolerances,
        out=out or exp.get("out", "fgbm-out"),
        jobs=file_jobs if jobs is None else jobs,
        extras=extras,
        source={s: dict(parser[s]) for s in parser.sections()},
    )
