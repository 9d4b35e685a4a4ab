"""Spectral densities, spectral measures and their integral moments.

Units: time in ps, angular frequency in rad/ps. A spectral density ``I(w)``
(or a classical power spectrum ``S(w)``) is turned into the spectral
measure ``lam(w)`` that weights the squared filter function in the
decoupling error:

* quantum bath at inverse temperature ``beta``:
  ``lam(w) = 2 coth(beta w / 2) I(w) / w**2``
* classical Gaussian noise: ``lam(w) = S(w) / (2 pi w**2)``
* flat: ``lam(w) = level`` on ``[0, w_c)`` and zero above.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import QuadratureConfig, quad_adaptive

__all__ = [
    "HBAR_J_S",
    "K_B_J_PER_K",
    "beta_from_temperature",
    "SupraOhmicGaussian",
    "FlatHardCutoff",
    "Tabulated",
    "QuantumMeasure",
    "ClassicalMeasure",
    "FlatMeasure",
    "MeasureDivergenceError",
    "eval_spectral_density",
    "eval_spectral_measure",
    "measure_M",
    "measure_m",
    "exciton_measure",
]

HBAR_J_S = 1.05457e-34
K_B_J_PER_K = 1.38065e-23

# below SWITCH_FRACTION * cutoff the quantum measure uses the Laurent form of coth
SWITCH_FRACTION = 1e-4


def beta_from_temperature(kelvin: float) -> float:
    """Inverse temperature hbar / (k_B T) in ps."""
    if not kelvin > 0:
        raise ValueError(f"temperature must be positive, got {kelvin}")
    return HBAR_J_S / (K_B_J_PER_K * kelvin) * 1e12


def _check_freq(w):
    w = np.asarray(w, dtype=float)
    if np.any(w < 0) or np.any(np.isnan(w)):
        raise ValueError("frequencies must be non-negative")
    return w


def _limit_of_power_law(coef, s, p):
    # lim_{w->0} coef * w**s / w**p
    if coef == 0 or s > p:
        return 0.0
    if s == p:
        return float(coef)
    return math.inf


# -- spectral densities ------------------------------------------------------


@dataclass(frozen=True)
class SupraOhmicGaussian:
    """``I(w) = alpha * w**s * exp(-w**2 / omega_c**2)``; alpha in ps**(s-1)."""

    alpha: float
    s: float
    omega_c: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.s >= 1:
            raise ValueError(f"power s must be >= 1, got {self.s}")
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be positive, got {self.omega_c}")

    @property
    def cutoff(self) -> float:
        return self.omega_c

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        return self.alpha * w ** self.s * np.exp(-(w / self.omega_c) ** 2)

    def small_freq_limit(self, p: float) -> float:
        """``lim_{w->0} I(w) / w**p``."""
        return _limit_of_power_law(self.alpha, self.s, p)

    def with_cutoff(self, omega_c: float) -> "SupraOhmicGaussian":
        return SupraOhmicGaussian(self.alpha, self.s, omega_c)


@dataclass(frozen=True)
class FlatHardCutoff:
    """``I(w) = amplitude`` for ``w < omega_c``, zero beyond."""

    amplitude: float
    omega_c: float

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError(f"amplitude must be non-negative, got {self.amplitude}")
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be positive, got {self.omega_c}")

    @property
    def cutoff(self) -> float:
        return self.omega_c

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        return np.where(w < self.omega_c, self.amplitude, 0.0)

    def small_freq_limit(self, p: float) -> float:
        return _limit_of_power_law(self.amplitude, 0.0, p)

    def with_cutoff(self, omega_c: float) -> "FlatHardCutoff":
        return FlatHardCutoff(self.amplitude, omega_c)


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Linearly interpolated samples, zero outside the sampled range."""

    omega: np.ndarray
    values: np.ndarray
    omega_c: float | None = None

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if omega.ndim != 1 or omega.shape != values.shape or omega.size < 2:
            raise ValueError("table needs matching 1-D arrays with at least two samples")
        if np.any(np.diff(omega) <= 0) or omega[0] < 0:
            raise ValueError("table frequencies must be non-negative and strictly increasing")
        if np.any(values < 0):
            raise ValueError("table values must be non-negative")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "values", values)

    @property
    def cutoff(self) -> float:
        return float(self.omega[-1]) if self.omega_c is None else float(self.omega_c)

    def __call__(self, w):
        return np.interp(np.asarray(w, dtype=float), self.omega, self.values, left=0.0, right=0.0)

    def small_freq_limit(self, p: float) -> float:
        if self.omega[0] > 0:
            return 0.0
        v0 = self.values[0]
        slope = (self.values[1] - v0) / (self.omega[1] - self.omega[0])
        if v0 > 0:
            return _limit_of_power_law(v0, 0.0, p)
        return _limit_of_power_law(slope, 1.0, p)

    def with_cutoff(self, omega_c: float) -> "Tabulated":
        # rescale the frequency axis so the cutoff lands on omega_c
        factor = omega_c / self.cutoff
        return Tabulated(self.omega * factor, self.values, omega_c)


def eval_spectral_density(d, w):
    """Evaluate a spectral density at ``w >= 0`` (scalar or array)."""
    w = _check_freq(w)
    out = d(w)
    return float(out) if np.ndim(out) == 0 else out


# -- spectral measures -------------------------------------------------------


class _Measure:
    """Shared evaluation and integration plumbing for measures."""

    omega_c: float

    @property
    def cutoff(self) -> float:
        return float(self.omega_c)

    def __call__(self, w):
        return self._eval(np.asarray(w, dtype=float))

    def on_support(self, w):
        """lam on the closed support; differs from ``__call__`` only for flat."""
        return self._eval(np.asarray(w, dtype=float))

    def integration_limit(self, quad: QuadratureConfig) -> float:
        return quad.upper_limit(self.cutoff)

    def breakpoints(self):
        return ()


@dataclass(frozen=True, eq=False)
class QuantumMeasure(_Measure):
    """Bosonic bath in equilibrium at inverse temperature ``beta`` (ps)."""

    density: object
    beta: float
    omega_c: float | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.omega_c is None:
            object.__setattr__(self, "omega_c", float(self.density.cutoff))

    @property
    def switch_freq(self) -> float:
        return SWITCH_FRACTION * float(self.density.cutoff)

    def _eval(self, w):
        beta = self.beta
        out = np.empty_like(w)
        zero = w == 0
        small = (w < self.switch_freq) & ~zero
        big = ~(small | zero)
        if np.any(big):
            wb = w[big]
            out[big] = 2.0 / np.tanh(0.5 * beta * wb) * self.density(wb) / wb ** 2
        if np.any(small):
            ws = w[small]
            d = self.density
            if isinstance(d, SupraOhmicGaussian):
                s = d.s
                out[small] = 2.0 * d.alpha * np.exp(-(ws / d.omega_c) ** 2) * (
                    2.0 / beta * ws ** (s - 3) + beta / 6.0 * ws ** (s - 1))
            else:
                with np.errstate(over="ignore"):
                    out[small] = 2.0 * (2.0 / (beta * ws) + beta * ws / 6.0) * (d(ws) / ws / ws)
        if np.any(zero):
            out[zero] = 4.0 / beta * self.density.small_freq_limit(3.0)
        return out

    def breakpoints(self):
        if isinstance(self.density, Tabulated):
            return tuple(self.density.omega)
        if isinstance(self.density, FlatHardCutoff):
            return (self.density.omega_c,)
        return ()

    def with_cutoff(self, omega_c: float) -> "QuantumMeasure":
        return QuantumMeasure(self.density.with_cutoff(omega_c), self.beta)


@dataclass(frozen=True, eq=False)
class ClassicalMeasure(_Measure):
    """Classical Gaussian frequency noise with power spectrum ``S(w)``."""

    power_spectrum: object
    omega_c: float | None = None

    def __post_init__(self):
        if self.omega_c is None:
            object.__setattr__(self, "omega_c", float(self.power_spectrum.cutoff))

    @property
    def switch_freq(self) -> float:
        return SWITCH_FRACTION * float(self.power_spectrum.cutoff)

    def _eval(self, w):
        out = np.empty_like(w)
        zero = w == 0
        small = (w < self.switch_freq) & ~zero
        big = ~(small | zero)
        if np.any(big):
            wb = w[big]
            out[big] = self.power_spectrum(wb) / (2.0 * math.pi * wb ** 2)
        if np.any(small):
            ws = w[small]
            d = self.power_spectrum
            if isinstance(d, SupraOhmicGaussian):
                out[small] = d.alpha * ws ** (d.s - 2) * np.exp(-(ws / d.omega_c) ** 2) / (2.0 * math.pi)
            else:
                with np.errstate(over="ignore"):
                    out[small] = d(ws) / ws / ws / (2.0 * math.pi)
        if np.any(zero):
            out[zero] = self.power_spectrum.small_freq_limit(2.0) / (2.0 * math.pi)
        return out

    def breakpoints(self):
        if isinstance(self.power_spectrum, Tabulated):
            return tuple(self.power_spectrum.omega)
        if isinstance(self.power_spectrum, FlatHardCutoff):
            return (self.power_spectrum.omega_c,)
        return ()

    def with_cutoff(self, omega_c: float) -> "ClassicalMeasure":
        return ClassicalMeasure(self.power_spectrum.with_cutoff(omega_c))


@dataclass(frozen=True)
class FlatMeasure(_Measure):
    """``lam = level`` on ``[0, omega_c)``; ``level=1`` is the usual flat measure."""

    omega_c: float
    level: float = 1.0

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be positive, got {self.omega_c}")
        if not self.level >= 0:
            raise ValueError(f"level must be non-negative, got {self.level}")

    def _eval(self, w):
        return np.where(w < self.omega_c, float(self.level), 0.0)

    def on_support(self, w):
        return np.full(np.shape(w), float(self.level))

    def integration_limit(self, quad: QuadratureConfig) -> float:
        # support ends at the cutoff, so truncating there is exact
        return float(self.omega_c)

    def with_cutoff(self, omega_c: float) -> "FlatMeasure":
        return FlatMeasure(omega_c, self.level)


def eval_spectral_measure(m, w):
    """Evaluate ``lam(w)`` for ``w >= 0`` (scalar or array)."""
    w = _check_freq(w)
    out = m(w)
    return float(out) if np.ndim(out) == 0 else out


class MeasureDivergenceError(ArithmeticError):
    """``1/lam`` is not integrable on ``[0, omega_c]``."""


def measure_M(m, quad: QuadratureConfig | None = None) -> float:
    """Integral of ``1/lam`` over ``[0, omega_c]``."""
    quad = quad or QuadratureConfig()

    def inv(w):
        lam = m.on_support(w)
        if np.any(lam <= 0) or not np.all(np.isfinite(1.0 / lam)):
            raise MeasureDivergenceError(
                "spectral measure vanishes inside [0, omega_c]; M is infinite")
        return 1.0 / lam

    return quad_adaptive(inv, 0.0, m.cutoff, quad, panels=8,
                         breakpoints=m.breakpoints()).value


def measure_m(m, quad: QuadratureConfig | None = None) -> float:
    """Integral of ``lam`` over ``[0, omega_inf]`` (the support end for flat)."""
    quad = quad or QuadratureConfig()
    hi = m.integration_limit(quad)
    res = quad_adaptive(m.on_support, 0.0, hi, quad, panels=16, breakpoints=m.breakpoints())
    return res.value


def exciton_measure(alpha=0.0114, s=3.0, omega_c=3.0, beta=None, temperature=77.0):
    """Supra-Ohmic Gaussian-cutoff quantum measure with exciton-qubit defaults."""
    if beta is None:
        beta = beta_from_temperature(temperature)
    return QuantumMeasure(SupraOhmicGaussian(alpha, s, omega_c), beta)
