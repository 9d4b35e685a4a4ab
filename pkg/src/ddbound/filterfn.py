"""Filter function of a pi-pulse sequence and its norms.

For pulse times ``0 = t_0 < t_1 < ... < t_n < t_{n+1} = T``::

    f(w) = sum_{j=0}^{n} (-1)^j (exp(i t_j w) - exp(i t_{j+1} w))
         = 1 + (-1)^(n+1) exp(i T w) + 2 sum_{j=1}^{n} (-1)^j exp(i t_j w)

Substituting ``z = exp(i w tau)`` turns ``f`` into a Muntz polynomial in
``z``; nothing here relies on that view.
"""
from __future__ import annotations

import math
import warnings

import mpmath
import numpy as np

from .quadrature import (QuadratureConfig, QuadratureError, gauss_legendre_panels,
                         quad_adaptive)
from .sequences import PulseSequence

__all__ = [
    "filter_value",
    "filter_value_direct",
    "filter_magnitude_sq",
    "filter_l1_norm",
    "known_zeros",
    "filter_value_mp",
    "udd_times_mp",
]


def _freq(w):
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("frequencies must be non-negative")
    return w


def _signs(n):
    return np.where(np.arange(1, n + 1) % 2 == 0, 1.0, -1.0)


def filter_value(seq: PulseSequence, w):
    """Filter function ``f(w)`` via the regrouped single-sum form."""
    w = _freq(w)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    n = seq.n
    out = 1.0 + (-1.0) ** (n + 1) * np.exp(1j * seq.T * w)
    if n:
        phase = np.exp(1j * np.multiply.outer(w, seq.times))
        out = out + 2.0 * (phase * _signs(n)).sum(axis=-1)
    return complex(out[0]) if scalar else out


def filter_value_direct(seq: PulseSequence, w):
    """Filter function summed term by term over the ``n + 1`` intervals."""
    w = _freq(w)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    t = np.concatenate(([0.0], seq.times, [seq.T]))
    e = np.exp(1j * np.multiply.outer(w, t))
    sign = np.where(np.arange(seq.n + 1) % 2 == 0, 1.0, -1.0)
    out = ((e[:, :-1] - e[:, 1:]) * sign).sum(axis=-1)
    return complex(out[0]) if scalar else out


def filter_magnitude_sq(seq: PulseSequence, w):
    """``|f(w)|^2``."""
    f = filter_value(seq, w)
    return (f * np.conj(f)).real if isinstance(f, np.ndarray) else abs(f) ** 2


def known_zeros(seq: PulseSequence, hi: float):
    """Zeros of ``|f|`` in ``(0, hi)`` for free evolution and the centred echo."""
    if seq.n == 0:
        period = 2.0 * math.pi / seq.T
    elif seq.n == 1 and math.isclose(seq.times[0], 0.5 * seq.T, rel_tol=1e-14):
        period = 4.0 * math.pi / seq.T
    else:
        return ()
    k = np.arange(1, int(hi / period) + 1)
    return tuple((k * period)[k * period < hi])


def filter_l1_norm(seq: PulseSequence, omega_c: float,
                   quad: QuadratureConfig | None = None, *, fallback: bool = False) -> float:
    """``int_0^omega_c |f(w)| dw``.

    ``|f|`` has kinks at its zeros. Known zeros are used as panel edges; if
    adaptive refinement still fails, a :class:`QuadratureError` carrying the
    best estimate is raised, unless ``fallback`` is set, in which case a
    dense composite Gauss-Legendre rule is used instead (with a warning).
    """
    if not omega_c > 0:
        raise ValueError(f"omega_c must be positive, got {omega_c}")
    quad = quad or QuadratureConfig()
    panels = max(32, 8 * (seq.n + 1), int(math.ceil(seq.T * omega_c / math.pi)))

    def g(w):
        return np.abs(filter_value(seq, w))

    try:
        return quad_adaptive(g, 0.0, omega_c, quad, panels=panels,
                             breakpoints=known_zeros(seq, omega_c)).value
    except QuadratureError as exc:
        if not fallback:
            raise
        warnings.warn(f"{exc}; falling back to composite Gauss-Legendre panels")
        x, wts = gauss_legendre_panels(0.0, omega_c, 64 * panels, order=8)
        return float(np.dot(wts, g(x)))


def udd_times_mp(n: int, T, dps: int = 50):
    """UDD pulse times as ``mpmath.mpf`` at ``dps`` decimal digits."""
    with mpmath.workdps(dps):
        T = mpmath.mpf(T)
        return [T * mpmath.sin(mpmath.pi * j / (2 * n + 2)) ** 2 for j in range(1, n + 1)]


def filter_value_mp(times, T, w, dps: int = 50):
    """Filter function at ``dps`` digits.

    For small ``w T`` a sequence that cancels the low orders of ``f`` (UDD
    cancels the first ``n``) leaves ``|f| ~ (w T)^(n+1)``, far below double
    rounding; this evaluates the same sum in extended precision. Pass
    ``times`` from :func:`udd_times_mp` (or strings) to keep them exact.
    """
    with mpmath.workdps(dps):
        w = mpmath.mpf(w)
        t = [mpmath.mpf(0)] + [mpmath.mpf(x) for x in times] + [mpmath.mpf(T)]
        e = [mpmath.expj(w * x) for x in t]
        total = mpmath.mpc(0)
        for j in range(len(t) - 1):
            total += (-1) ** j * (e[j] - e[j + 1])
        return total
