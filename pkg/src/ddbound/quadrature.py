"""Numerical integration used throughout the package.

Two engines live here:

* :func:`quad_adaptive` -- vectorised recursive adaptive Simpson rule with
  Richardson extrapolation. Every active interval of a recursion level is
  refined in a single integrand call, so integrands must accept 1-D arrays
  of abscissae and may return either ``(K,)`` or ``(K, m)`` arrays.
* :func:`gauss_legendre_panels` -- fixed composite Gauss-Legendre nodes and
  weights. The node set does not depend on the integrand, which makes the
  resulting discretised objective smooth in its parameters (needed by the
  optimizer's line searches).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "QuadratureConfig",
    "QuadratureError",
    "QuadResult",
    "quad_adaptive",
    "gauss_legendre_panels",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and truncation for frequency integrals.

    Parameters
    ----------
    omega_inf : float or None
        Upper truncation of the ``[0, inf)`` integrals, in rad/ps. ``None``
        means ``omega_inf_factor`` times the cutoff of whatever measure is
        being integrated.
    rel_tol, abs_tol : float
        Global relative and absolute tolerances.
    max_depth : int
        Maximum number of bisections of any initial panel.
    omega_inf_factor : float
        Multiple of the cutoff used when ``omega_inf`` is ``None``.
    """

    omega_inf: float | None = None
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_depth: int = 30
    omega_inf_factor: float = 5.0

    def __post_init__(self):
        if self.omega_inf is not None and not self.omega_inf > 0:
            raise ValueError(f"omega_inf must be positive, got {self.omega_inf}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if int(self.max_depth) < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if not self.omega_inf_factor > 0:
            raise ValueError("omega_inf_factor must be positive")

    def upper_limit(self, cutoff: float) -> float:
        """Truncation frequency for a measure with the given cutoff."""
        if self.omega_inf is not None:
            return float(self.omega_inf)
        return float(self.omega_inf_factor * cutoff)


class QuadResult(NamedTuple):
    value: float | np.ndarray
    abserr: float
    neval: int


class QuadratureError(ArithmeticError):
    """Adaptive refinement hit ``max_depth`` without meeting the tolerance.

    The best available estimate is kept on the exception so callers can
    decide whether it is good enough.
    """

    def __init__(self, message, estimate, abserr, flagged):
        super().__init__(message)
        self.estimate = estimate
        self.abserr = abserr
        self.flagged = flagged


def _as_2d(values, k):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        return arr.reshape(k, 1)
    return arr.reshape(k, -1)


def quad_adaptive(
    g: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    quad: QuadratureConfig | None = None,
    *,
    panels: int = 1,
    breakpoints: Sequence[float] = (),
) -> QuadResult:
    """Integrate ``g`` over ``[lo, hi]`` with adaptive Simpson refinement.

    The interval is first cut into ``panels`` equal pieces (plus any
    ``breakpoints`` strictly inside). Each piece is bisected until
    ``|S_fine - S_coarse| <= 15 * tol_local``, where ``tol_local`` is the
    global tolerance ``max(abs_tol, rel_tol * |I0|)`` scaled by the piece's
    share of ``[lo, hi]`` (so it halves with every bisection). Accepted
    pieces contribute the Richardson value ``S_fine + (S_fine - S_coarse)/15``.

    For vector-valued integrands the acceptance test uses the largest
    component and the relative tolerance refers to the largest component
    of the estimate.

    Returns
    -------
    QuadResult
        ``(value, abserr, neval)``; ``value`` is a float for scalar
        integrands and an array otherwise.

    Raises
    ------
    QuadratureError
        If some piece is still unresolved after ``max_depth`` bisections.
    """
    quad = quad or QuadratureConfig()
    lo, hi = float(lo), float(hi)
    if not hi > lo:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    edges = np.linspace(lo, hi, max(int(panels), 1) + 1)
    inner = [b for b in breakpoints if lo < b < hi]
    if inner:
        edges = np.unique(np.concatenate([edges, inner]))
    a, b = edges[:-1], edges[1:]
    m = 0.5 * (a + b)
    k = a.size

    x0 = np.concatenate([a, m, b])
    y0 = np.asarray(g(x0))
    scalar = y0.ndim == 1
    y0 = _as_2d(y0, 3 * k)
    fa, fm, fb = y0[:k], y0[k:2 * k], y0[2 * k:]
    neval = 3 * k

    h = (b - a)[:, None]
    whole = h / 6.0 * (fa + 4.0 * fm + fb)
    scale = np.max(np.abs(whole.sum(axis=0)))
    tol = max(quad.abs_tol, quad.rel_tol * scale)
    width = hi - lo

    total = np.zeros(whole.shape[1])
    abserr = 0.0
    flagged = []
    depth = 0
    while a.size:
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        k = a.size
        y = _as_2d(g(np.concatenate([lm, rm])), 2 * k)
        flm, frm = y[:k], y[k:]
        neval += 2 * k
        h = (b - a)[:, None]
        left = h / 12.0 * (fa + 4.0 * flm + fm)
        right = h / 12.0 * (fm + 4.0 * frm + fb)
        diff = left + right - whole
        err = np.max(np.abs(diff), axis=1)
        local_tol = tol * (b - a) / width
        done = err <= 15.0 * local_tol
        depth += 1
        if depth >= quad.max_depth:
            stuck = ~done
            if np.any(stuck):
                flagged.extend(zip(a[stuck].tolist(), b[stuck].tolist()))
            done = np.ones_like(done)
        total += (left + right + diff / 15.0)[done].sum(axis=0)
        abserr += float(err[done].sum()) / 15.0
        keep = ~done
        if not np.any(keep):
            break
        a, m, b = a[keep], m[keep], b[keep]
        fa, fm, fb = fa[keep], fm[keep], fb[keep]
        flm, frm = flm[keep], frm[keep]
        lm, rm = lm[keep], rm[keep]
        left, right = left[keep], right[keep]
        # children: [a, m] with midpoint lm and [m, b] with midpoint rm
        a, m, b = np.concatenate([a, m]), np.concatenate([lm, rm]), np.concatenate([m, b])
        fa, fm, fb = np.concatenate([fa, fm]), np.concatenate([flm, frm]), np.concatenate([fm, fb])
        whole = np.concatenate([left, right])

    value = float(total[0]) if scalar else total
    if flagged:
        raise QuadratureError(
            f"adaptive Simpson did not converge on {len(flagged)} interval(s) "
            f"after {quad.max_depth} bisections",
            estimate=value,
            abserr=abserr,
            flagged=flagged,
        )
    return QuadResult(value, abserr, neval)


def gauss_legendre_panels(lo, hi, panels, order=16, breakpoints=()):
    """Composite Gauss-Legendre nodes and weights on ``[lo, hi]``.

    ``panels`` equal-width panels are laid down, extra ``breakpoints`` inside
    the interval are added as panel edges, and each panel carries an
    ``order``-point rule.
    """
    edges = np.linspace(lo, hi, max(int(panels), 1) + 1)
    inner = [b for b in breakpoints if lo < b < hi]
    if inner:
        edges = np.unique(np.concatenate([edges, inner]))
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    nodes = (mid + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights
