"""Decoupling error, its gradient, purity loss and analytic error bounds.

The decoupling error of a sequence under spectral measure ``lam`` is::

    chi = int_0^inf lam(w) |f(w)|^2 dw

truncated at ``QuadratureConfig.upper_limit`` (5 ``omega_c`` by default;
exactly ``omega_c`` for the flat measure). Purity decays as ``exp(-2 chi)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .filterfn import filter_l1_norm, filter_value
from .quadrature import QuadratureConfig, gauss_legendre_panels, quad_adaptive
from .sequences import PulseSequence
from .spectra import MeasureDivergenceError, measure_M

__all__ = [
    "BoundParams",
    "ChiResult",
    "CauchyBound",
    "UddUpperBounds",
    "ChiKernel",
    "chi",
    "chi_gradient",
    "purity_loss",
    "bound_cauchy",
    "bound_slow",
    "bound_fast",
    "udd_upper_bounds",
    "TWO_PI",
]

TWO_PI = 2.0 * math.pi
E2 = math.e ** 2


@dataclass(frozen=True)
class BoundParams:
    """Constants of the lower bounds.

    ``c`` and ``a`` enter the fast-control bound ``c exp(-a/(w_c tau)) / (M tau^2)``;
    the defaults are fit values, not proven constants. ``C`` scales the
    slow-control bound and is only known to be of order one.
    """

    c: float = 0.5
    a: float = 3.0
    C: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and self.a > 0 and self.C > 0):
            raise ValueError("bound constants must be positive")

    # constants of the tailored-UDD upper bound
    c_prime = 2.0 / (math.pi * E2)
    a_prime = 2.0 / E2


class ChiResult(NamedTuple):
    chi: float
    est_abs_error: float
    evaluations: int


def _panels(seq: PulseSequence, hi: float) -> int:
    # resolve the oscillation of |f|^2 (highest frequency T) before adapting
    return max(32, 8 * (seq.n + 1), int(math.ceil(seq.T * hi / math.pi)))


def _weighted(lam, x):
    # |f|^2 vanishes at w = 0 faster than an integrable measure can blow up,
    # so a zero factor wins over an infinite weight
    with np.errstate(invalid="ignore"):
        return np.where(x == 0, 0.0, lam * x)


def chi(seq: PulseSequence, m, quad: QuadratureConfig | None = None) -> ChiResult:
    """Decoupling error of ``seq`` under measure ``m`` (adaptive Simpson)."""
    quad = quad or QuadratureConfig()
    hi = m.integration_limit(quad)

    def g(w):
        f = filter_value(seq, w)
        return _weighted(m.on_support(w), f.real ** 2 + f.imag ** 2)

    res = quad_adaptive(g, 0.0, hi, quad, panels=_panels(seq, hi), breakpoints=m.breakpoints())
    return ChiResult(max(res.value, 0.0), res.abserr, res.neval)


def chi_gradient(seq: PulseSequence, m, quad: QuadratureConfig | None = None) -> np.ndarray:
    """``d chi / d t_j`` for the interior pulse times, ``T`` held fixed."""
    if seq.n < 1:
        raise ValueError("gradient needs at least one pulse")
    quad = quad or QuadratureConfig()
    hi = m.integration_limit(quad)
    signs = np.where(np.arange(1, seq.n + 1) % 2 == 0, 1.0, -1.0)

    def g(w):
        f = filter_value(seq, w)
        dfdt = 2j * signs * w[:, None] * np.exp(1j * np.multiply.outer(w, seq.times))
        return _weighted(m.on_support(w)[:, None], 2.0 * (np.conj(f)[:, None] * dfdt).real)

    return quad_adaptive(g, 0.0, hi, quad, panels=_panels(seq, hi),
                         breakpoints=m.breakpoints()).value


def purity_loss(chi_value: float) -> float:
    """``1 - exp(-2 chi)``."""
    if chi_value < 0:
        raise ValueError(f"decoupling error must be non-negative, got {chi_value}")
    return -math.expm1(-2.0 * chi_value)


class CauchyBound(NamedTuple):
    value: float
    l1_norm: float
    M: float
    divergent: bool


def bound_cauchy(seq: PulseSequence, m, quad: QuadratureConfig | None = None) -> CauchyBound:
    """Lower bound ``(int_0^w_c |f|)^2 / M`` valid for any measure.

    When ``1/lam`` is not integrable the bound degenerates to the trivial
    ``chi >= 0`` and ``divergent`` is set.
    """
    quad = quad or QuadratureConfig()
    l1 = filter_l1_norm(seq, m.cutoff, quad)
    try:
        M = measure_M(m, quad)
    except MeasureDivergenceError:
        return CauchyBound(0.0, l1, math.inf, True)
    return CauchyBound(l1 ** 2 / M, l1, M, False)


def bound_slow(n: int, omega_c: float, tau: float, M: float,
               params: BoundParams | None = None) -> float | None:
    """Slow-control lower bound ``(w_c^2 / M) C (log n)^2``.

    Returns ``None`` outside its regime ``w_c tau > 2 pi``.
    """
    if n < 1:
        raise ValueError(f"pulse count must be >= 1, got {n}")
    params = params or BoundParams()
    if not omega_c * tau > TWO_PI:
        return None
    return omega_c ** 2 / M * params.C * math.log(n) ** 2


def bound_fast(tau: float, omega_c: float, M: float,
               params: BoundParams | None = None) -> float | None:
    """Fast-control lower bound ``c exp(-a / (w_c tau)) / (M tau^2)``.

    Returns ``None`` outside its regime ``w_c tau < 2 pi``.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    params = params or BoundParams()
    x = omega_c * tau
    if not x < TWO_PI:
        return None
    return params.c * math.exp(-params.a / x) / (M * tau ** 2)


class UddUpperBounds(NamedTuple):
    trivial: float
    tailored: float
    triangle: float


def udd_upper_bounds(n: int, m_lambda: float, omega_c: float, tau: float) -> UddUpperBounds:
    """Upper bounds on the UDD error.

    ``trivial`` is ``m n^2``; ``triangle`` is the bound ``4 (n+1)^2 m`` that
    follows from ``|f| <= 2(n+1)``; ``tailored`` is
    ``(m / (w_c tau)) c' exp(-a' / (w_c tau))``, meant for ``n`` matched to
    the bandwidth by :func:`~ddbound.sequences.tailored_udd_n` and a hard
    cutoff at ``w_c``.
    """
    x = omega_c * tau
    tailored = m_lambda / x * BoundParams.c_prime * math.exp(-BoundParams.a_prime / x)
    return UddUpperBounds(m_lambda * n ** 2, tailored, 4.0 * (n + 1) ** 2 * m_lambda)


class ChiKernel:
    """Decoupling error on a fixed composite Gauss-Legendre grid.

    The grid depends only on the measure and the duration ``T``, so
    ``chi(times)`` is a smooth function of the pulse times; this is what the
    optimizers minimise. ``|f|^2`` oscillates at frequencies up to ``T``, so
    a panel spans at most one period ``2 pi / T``; a 16-point rule on such a
    panel is accurate to roughly machine precision for smooth measures.
    """

    def __init__(self, m, T: float, quad: QuadratureConfig | None = None, order: int = 16):
        quad = quad or QuadratureConfig()
        self.T = float(T)
        hi = m.integration_limit(quad)
        panels = max(32, int(math.ceil(self.T * hi / TWO_PI)))
        nodes, weights = gauss_legendre_panels(0.0, hi, panels, order, m.breakpoints())
        self.nodes = nodes
        self.weights = weights * m.on_support(nodes)
        self._tail = 1.0 + 0.0j
        self._end = np.exp(1j * self.T * nodes)

    def _parts(self, times):
        times = np.asarray(times, dtype=float)
        n = times.size
        signs = np.where(np.arange(1, n + 1) % 2 == 0, 1.0, -1.0)
        phase = np.exp(1j * np.multiply.outer(self.nodes, times))
        f = 1.0 + (-1.0) ** (n + 1) * self._end + 2.0 * (phase * signs).sum(axis=1)
        return f, phase, signs

    def chi(self, times) -> float:
        f, _, _ = self._parts(times)
        return float((self.weights * (f.real ** 2 + f.imag ** 2)).sum())

    def chi_and_grad(self, times):
        """``chi`` and ``d chi / d t_j``."""
        f, phase, signs = self._parts(times)
        val = float((self.weights * (f.real ** 2 + f.imag ** 2)).sum())
        # d|f|^2/dt_j = 2 Re[conj(f) * 2 i s_j w e^{i w t_j}] = -4 s_j w Im[conj(f) e^{i w t_j}]
        im = (np.conj(f)[:, None] * phase).imag
        grad = -4.0 * signs * ((self.weights * self.nodes)[:, None] * im).sum(axis=0)
        return val, grad

    def chi_grad_hess(self, times):
        """``chi``, gradient and Hessian with respect to the pulse times."""
        f, phase, signs = self._parts(times)
        wts = self.weights
        val = float((wts * (f.real ** 2 + f.imag ** 2)).sum())
        cf_e = np.conj(f)[:, None] * phase
        grad = -4.0 * signs * ((wts * self.nodes)[:, None] * cf_e.imag).sum(axis=0)
        w2 = wts * self.nodes ** 2
        # 2 Re[conj(df/dt_j) df/dt_l] with df/dt_j = 2 i s_j w e^{i w t_j}
        gram = (np.conj(phase).T * w2) @ phase
        hess = 8.0 * np.outer(signs, signs) * gram.real
        # 2 Re[conj(f) d2f/dt_j^2] with d2f/dt_j^2 = -2 s_j w^2 e^{i w t_j}
        hess[np.diag_indices_from(hess)] += -4.0 * signs * (w2[:, None] * cf_e.real).sum(axis=0)
        return val, grad, hess

    def chi_sequence(self, seq: PulseSequence) -> float:
        if not math.isclose(seq.T, self.T, rel_tol=1e-12):
            raise ValueError("sequence duration differs from the kernel's")
        return self.chi(seq.times)
