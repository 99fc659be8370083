"""TOML experiment files.

Sections mirror :class:`~fonspn.harness.ExperimentConfig`::

    [algo]    algorithm, mu, p, beta, taps, eps, strict, guard_alpha
    [input]   kind ("gaussian" | "sas"), variance | alpha, zeta, pole
    [noise]   same keys as [input]
    [bank]    bands, length
    [system]  seed, unit_norm, coefficients, initial ("zero" | "true")
    [run]     trials, total_samples, flip_at, steady_window, master_seed, workers
    [theory]  moment_frames, moment_seed

Any key can be overridden with ``section.key=value`` strings, the value
being parsed as a TOML literal (bare words fall back to strings).
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from typing import Iterable, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .adaptive import AlgoConfig
from .filterbank import DesignError
from .harness import ExperimentConfig
from .signalgen import AlphaStableParams, Ar1Params, GaussianParams, ParameterError
from .theory import DEFAULT_MOMENT_FRAMES

SECTIONS = {
    "algo": {"algorithm", "mu", "p", "beta", "taps", "eps", "strict", "guard_alpha"},
    "input": {"kind", "variance", "alpha", "zeta", "pole"},
    "noise": {"kind", "variance", "alpha", "zeta", "pole"},
    "bank": {"bands", "length"},
    "system": {"seed", "unit_norm", "coefficients", "initial"},
    "run": {"trials", "total_samples", "flip_at", "steady_window", "master_seed", "workers"},
    "theory": {"moment_frames", "moment_seed"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunSettings:
    experiment: ExperimentConfig
    workers: int = 1
    moment_frames: int = DEFAULT_MOMENT_FRAMES
    moment_seed: Optional[int] = None


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw: dict, overrides: Iterable[str]) -> dict:
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        raw.setdefault(section, {})[name] = _parse_value(value.strip())
    return raw


def _source(sec: dict, default_var: float, default_pole: float) -> Ar1Params:
    kind = str(sec.get("kind", "gaussian")).lower()
    if kind == "gaussian":
        driving = GaussianParams(float(sec.get("variance", default_var)))
    elif kind in ("sas", "alpha-stable", "stable"):
        driving = AlphaStableParams(float(sec["alpha"]), float(sec["zeta"]))
    else:
        raise ConfigError(f"unknown source kind {kind!r}")
    return Ar1Params(float(sec.get("pole", default_pole)), driving)


def build(raw: dict) -> RunSettings:
    for section, body in raw.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(body) - SECTIONS[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    try:
        algo = AlgoConfig(**raw.get("algo", {}))
        system = raw.get("system", {})
        run = dict(raw.get("run", {}))
        bank = raw.get("bank", {})
        theory = raw.get("theory", {})
        coeffs = system.get("coefficients")
        cfg = ExperimentConfig(
            algo,
            input_source=_source(raw.get("input", {}), 1.0, 0.999),
            noise_source=_source(raw.get("noise", {}), 1e-3, 0.0),
            bands=int(bank.get("bands", 4)),
            bank_length=int(bank.get("length", 32)),
            trials=int(run.get("trials", 50)),
            total_samples=int(run.get("total_samples", 100_000)),
            flip_at=None if run.get("flip_at") is None else int(run["flip_at"]),
            steady_window=int(run.get("steady_window", 10_000)),
            master_seed=int(run.get("master_seed", 0)),
            true_system=None if coeffs is None else np.asarray(coeffs, dtype=float),
            system_seed=int(system.get("seed", 1)),
            unit_norm=bool(system.get("unit_norm", False)),
        )
        initial = str(system.get("initial", "zero")).lower()
        if initial == "true":
            cfg.initial_weights = cfg.system()
        elif initial != "zero":
            raise ConfigError(f"system.initial must be 'zero' or 'true', got {initial!r}")
        cfg.bank()
        return RunSettings(
            cfg,
            workers=int(run.get("workers", 1)),
            moment_frames=int(theory.get("moment_frames", DEFAULT_MOMENT_FRAMES)),
            moment_seed=None if theory.get("moment_seed") is None else int(theory["moment_seed"]),
        )
    except (ParameterError, DesignError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load(path, overrides: Iterable[str] = ()) -> RunSettings:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return build(apply_overrides(raw, overrides))
