"""Flat ``key = value`` experiment configuration.

Keys are dotted (``measure.alpha_ps2``, ``timing.tau_ps``); ``#`` starts a
comment. Every key has a declared type, so parsing is strict and
``parse(serialize(c)) == c`` holds. Sweep values are either a comma list
(``2, 6, 10``) or ``start:stop:count`` (inclusive, evenly spaced).

Units are ps and rad/ps throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .error import BoundParams
from .optimize import OptimizerConfig
from .quadrature import QuadratureConfig
from .spectra import (ClassicalMeasure, FlatHardCutoff, FlatMeasure, QuantumMeasure,
                      SupraOhmicGaussian, Tabulated, beta_from_temperature)

__all__ = ["ConfigError", "ExperimentConfig", "SCHEMA", "load_preset", "preset_names"]

MEASURE_KINDS = ("quantum", "classical", "flat")
DENSITY_KINDS = ("supra_ohmic", "flat_hard", "table")
METHODS = ("free", "udd", "badd", "lodd", "ofdd")
SEQUENCE_KINDS = ("udd", "uniform", "free", "file")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _sweep(text):
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range must be start:stop:count, got {text!r}")
        start, stop, count = _float(parts[0]), _float(parts[1]), _int(parts[2])
        if count < 1:
            raise ConfigError("range count must be >= 1")
        values = np.linspace(start, stop, count) if count > 1 else np.array([start])
        # snap values that are decimal to 12 digits, so 0.3:2:18 gives 0.3, 0.4, ...
        values = [float(f"{v:.12g}") for v in values]
    else:
        values = [_float(p) for p in text.split(",") if p.strip()]
    if not values:
        raise ConfigError("empty sweep")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"sweep must be increasing: {text!r}")
    return tuple(values)


def _words(choices):
    def parse(text):
        items = tuple(p.strip() for p in text.split(",") if p.strip())
        bad = [w for w in items if w not in choices]
        if bad or not items:
            raise ConfigError(f"expected a subset of {choices}, got {text!r}")
        return items
    return parse


def _choice(choices):
    def parse(text):
        text = text.strip()
        if text not in choices:
            raise ConfigError(f"expected one of {choices}, got {text!r}")
        return text
    return parse


def _str(text):
    return text.strip()


def _optional(parse):
    def wrapped(text):
        return None if text.strip().lower() in ("", "none") else parse(text)
    return wrapped


# key -> (parser, default)
SCHEMA = {
    "measure.kind": (_choice(MEASURE_KINDS), "quantum"),
    "measure.density": (_choice(DENSITY_KINDS), "supra_ohmic"),
    "measure.alpha_ps2": (_float, 0.0114),
    "measure.s": (_float, 3.0),
    "measure.omega_c": (_float, 3.0),
    "measure.amplitude": (_float, 1.0),
    "measure.level": (_float, 1.0),
    "measure.temperature_K": (_float, 77.0),
    "measure.beta_ps": (_optional(_float), None),
    "measure.table": (_optional(_str), None),
    "timing.tau_ps": (_float, 0.1),
    "timing.T_ps": (_float, 5.0),
    "sequence.kind": (_choice(SEQUENCE_KINDS), "udd"),
    "sequence.n": (_int, 1),
    "sequence.file": (_optional(_str), None),
    "sweep.T_ps": (_sweep, (2.0, 4.0, 6.0, 8.0, 10.0)),
    "sweep.omega_c_tau": (_sweep, tuple(round(0.3 + 0.1 * k, 10) for k in range(18))),
    "sweep.ratio": (_sweep, (0.6, 0.8, 1.0, 1.2, 1.4)),
    "sweep.omega": (_sweep, tuple(np.linspace(0.0, 15.0, 301).tolist())),
    "methods": (_words(METHODS), ("udd", "badd", "lodd")),
    "optimizer.n_limit": (_int, 30),
    "optimizer.udd_n_limit": (_int, 20),
    "optimizer.multistart": (_int, 4),
    "optimizer.max_iterations": (_int, 500),
    "optimizer.value_tol": (_float, 1e-6),
    "optimizer.constraint_tol": (_float, 1e-6),
    "optimizer.lodd_floor": (_float, 1e-6),
    "quadrature.rel_tol": (_float, 1e-8),
    "quadrature.abs_tol": (_float, 1e-12),
    "quadrature.max_depth": (_int, 30),
    "quadrature.omega_inf_factor": (_float, 5.0),
    "quadrature.omega_inf": (_optional(_float), None),
    "bounds.a": (_float, 3.0),
    "bounds.c": (_float, 0.5),
    "bounds.C": (_float, 1.0),
    "seed": (_int, 0),
    "output.path": (_optional(_str), None),
}

_POSITIVE = ("measure.alpha_ps2", "measure.omega_c", "measure.amplitude", "measure.temperature_K",
             "timing.tau_ps", "timing.T_ps", "optimizer.n_limit", "optimizer.udd_n_limit",
             "optimizer.multistart", "optimizer.max_iterations", "quadrature.max_depth")


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentConfig:
    """Typed view of a flat configuration; unknown keys are rejected."""

    values: dict = field(default_factory=lambda: {k: d for k, (_, d) in SCHEMA.items()})

    def __getitem__(self, key):
        return self.values[key]

    def set(self, key: str, text: str) -> None:
        """Set ``key`` from its textual form."""
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        self.values[key] = SCHEMA[key][0](text)

    def validate(self) -> "ExperimentConfig":
        for key in _POSITIVE:
            if not self.values[key] > 0:
                raise ConfigError(f"{key} must be positive, got {self.values[key]}")
        beta = self.values["measure.beta_ps"]
        if beta is not None and not beta > 0:
            raise ConfigError("measure.beta_ps must be positive")
        if self.values["measure.s"] < 1:
            raise ConfigError("measure.s must be >= 1")
        if self.values["sequence.n"] < 0:
            raise ConfigError("sequence.n must be non-negative")
        if self.values["measure.density"] == "table" and not self.values["measure.table"]:
            raise ConfigError("measure.density = table needs measure.table")
        try:
            self.quadrature()
            self.optimizer()
            self.bound_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    # -- text form ---------------------------------------------------------

    @classmethod
    def parse(cls, text: str, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        cfg = cls(dict(base.values)) if base else cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = line.split("=", 1)
            try:
                cfg.set(key, value)
            except ConfigError as exc:
                raise ConfigError(f"line {lineno}: {exc}") from None
        return cfg

    @classmethod
    def load(cls, path, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.parse(text, base)

    def serialize(self) -> str:
        return "".join(f"{k} = {_format(self.values[k])}\n" for k in SCHEMA)

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.serialize() == other.serialize()

    # -- builders ----------------------------------------------------------

    def beta(self) -> float:
        beta = self.values["measure.beta_ps"]
        return beta if beta is not None else beta_from_temperature(self.values["measure.temperature_K"])

    def density(self):
        v = self.values
        kind = v["measure.density"]
        if kind == "supra_ohmic":
            return SupraOhmicGaussian(v["measure.alpha_ps2"], v["measure.s"], v["measure.omega_c"])
        if kind == "flat_hard":
            return FlatHardCutoff(v["measure.amplitude"], v["measure.omega_c"])
        try:
            table = np.loadtxt(v["measure.table"], ndmin=2)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read table {v['measure.table']}: {exc}") from None
        if table.shape[1] != 2:
            raise ConfigError("spectral table needs two columns: omega, value")
        return Tabulated(table[:, 0], table[:, 1], v["measure.omega_c"])

    def measure(self):
        v = self.values
        try:
            if v["measure.kind"] == "flat":
                return FlatMeasure(v["measure.omega_c"], v["measure.level"])
            if v["measure.kind"] == "classical":
                return ClassicalMeasure(self.density())
            return QuantumMeasure(self.density(), self.beta())
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def quadrature(self) -> QuadratureConfig:
        v = self.values
        return QuadratureConfig(v["quadrature.omega_inf"], v["quadrature.rel_tol"],
                                v["quadrature.abs_tol"], v["quadrature.max_depth"],
                                v["quadrature.omega_inf_factor"])

    def optimizer(self, seed: int | None = None) -> OptimizerConfig:
        v = self.values
        return OptimizerConfig(v["optimizer.value_tol"], v["optimizer.constraint_tol"],
                               v["optimizer.max_iterations"], v["optimizer.multistart"],
                               v["seed"] if seed is None else seed, v["optimizer.lodd_floor"])

    def bound_params(self) -> BoundParams:
        return BoundParams(self.values["bounds.c"], self.values["bounds.a"], self.values["bounds.C"])


def preset_names() -> list:
    root = resources.files("ddbound") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def load_preset(name: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    res = resources.files("ddbound") / "presets" / f"{name}.cfg"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return ExperimentConfig.parse(res.read_text(), base)
