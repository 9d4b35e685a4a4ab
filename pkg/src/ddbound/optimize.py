"""Timing-constrained pulse-sequence optimisation (BADD, LODD, OFDD).

All three minimise the decoupling error over the ``n + 1`` inter-pulse
intervals ``x`` with ``sum(x) = T`` and ``x_j >= lower``:

* BADD: ``lower = tau`` (minimum switching time), scanned over
  ``n = 1 .. T/tau - 1``; the best ``n`` wins.
* LODD: fixed ``n``; ``lower`` is only a tiny positivity floor.
* OFDD: LODD under the flat measure on ``[0, omega_c)``.

The feasible set is a shifted, scaled simplex with an exact sort-based
projection. Objectives that supply a Hessian are minimised by projected
Newton steps on the face of binding bounds; otherwise a spectral projected
gradient method (Barzilai-Borwein steps, non-monotone Armijo backtracking)
is used. Each solve runs from several starting points.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .error import ChiKernel
from .quadrature import QuadratureConfig
from .sequences import PulseSequence, intervals_to_sequence, make_udd
from .spectra import FlatMeasure

__all__ = [
    "OptimizerConfig",
    "FeasibilityError",
    "MinimizeResult",
    "BaddEntry",
    "BaddResult",
    "project_simplex",
    "project_intervals",
    "IntervalObjective",
    "interval_objective",
    "constrained_minimize",
    "badd",
    "lodd",
    "ofdd",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    value_tol: float = 1e-6
    constraint_tol: float = 1e-6
    max_iterations: int = 500
    multistart: int = 4
    rng_seed: int = 0
    lodd_floor: float = 1e-6

    def __post_init__(self):
        if not (self.value_tol > 0 and self.constraint_tol > 0 and self.lodd_floor > 0):
            raise ValueError("optimizer tolerances must be positive")
        if self.max_iterations < 1 or self.multistart < 1:
            raise ValueError("max_iterations and multistart must be >= 1")


class FeasibilityError(ValueError):
    """No interval vector satisfies the timing constraints."""


def project_simplex(y, total: float) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``{x >= 0, sum(x) = total}``."""
    y = np.asarray(y, dtype=float)
    if total <= 0:
        return np.zeros_like(y)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, y.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(y - theta, 0.0)


def project_intervals(y, lower: float, T: float) -> np.ndarray:
    """Projection onto ``{x_j >= lower, sum(x) = T}``."""
    y = np.asarray(y, dtype=float)
    return lower + project_simplex(y - lower, T - lower * y.size)


class IntervalObjective:
    """A :class:`ChiKernel` seen as a function of the ``n + 1`` intervals.

    ``obj(x)`` gives ``(chi, gradient)``; ``obj.with_hessian(x)`` adds the
    Hessian. Pulse times are ``t = L x`` with ``L`` the cumulative-sum
    matrix (the last interval only moves ``T``, which is fixed), so
    derivatives pull back as ``L^T g`` and ``L^T H L``.
    """

    def __init__(self, kernel: ChiKernel):
        self.kernel = kernel

    def __call__(self, x):
        val, gt = self.kernel.chi_and_grad(np.cumsum(x)[:-1])
        gx = np.zeros(len(x))
        gx[:-1] = np.cumsum(gt[::-1])[::-1]
        return val, gx

    def value(self, x) -> float:
        return self.kernel.chi(np.cumsum(x)[:-1])

    def with_hessian(self, x):
        val, gt, ht = self.kernel.chi_grad_hess(np.cumsum(x)[:-1])
        n1 = len(x)
        gx = np.zeros(n1)
        gx[:-1] = np.cumsum(gt[::-1])[::-1]
        hx = np.zeros((n1, n1))
        hx[:-1, :-1] = np.cumsum(np.cumsum(ht[::-1, ::-1], axis=0), axis=1)[::-1, ::-1]
        return val, gx, hx


def interval_objective(kernel: ChiKernel) -> IntervalObjective:
    return IntervalObjective(kernel)


@dataclass
class MinimizeResult:
    intervals: np.ndarray
    chi: float
    converged: bool
    iterations: int
    kkt_residual: float
    start_chis: list = field(default_factory=list)
    start_labels: list = field(default_factory=list)

    @property
    def sequence(self) -> PulseSequence:
        return intervals_to_sequence(self.intervals)


def _spg(fun, x0, lower, T, cfg):
    """One projected-gradient descent from ``x0`` (already feasible).

    Works in ``u = x / T`` with the objective divided by its starting value,
    so the step and residual tests are scale free.
    """
    lo = lower / T
    proj = lambda v: project_intervals(v, lo, 1.0)
    u = proj(np.asarray(x0, dtype=float) / T)
    f0, g = fun(u * T)
    scale = f0 if f0 > 0 else 1.0

    def phi(v):
        val, grad = fun(v * T)
        return val / scale, grad * T / scale

    f, g = f0 / scale, g * T / scale
    best_u, best_f = u, f
    history = [f]
    alpha = 1.0 / max(np.max(np.abs(proj(u - g) - u)), 1e-12)
    alpha = min(max(alpha, 1e-10), 1e10)
    converged = False
    resid = math.inf
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        # first-order residual, relative to the current objective
        rel = f if f > 0 else 1.0
        resid = float(np.max(np.abs(proj(u - g / rel) - u)))
        if resid <= cfg.value_tol:
            converged = True
            break
        d = proj(u - alpha * g) - u
        gd = float(g @ d)
        if gd >= 0:
            converged = True
            break
        fmax = max(history[-10:])
        lam = 1.0
        while True:
            u_new = u + lam * d
            f_new, g_new = phi(u_new)
            if f_new <= fmax + 1e-4 * lam * gd or lam < 1e-12:
                break
            lam *= 0.5
        s = u_new - u
        yv = g_new - g
        sy = float(s @ yv)
        alpha = min(max(float(s @ s) / sy, 1e-10), 1e10) if sy > 0 else 1e10
        u, f, g = u_new, f_new, g_new
        history.append(f)
        if f < best_f:
            best_u, best_f = u, f
        # stalled objective: change over the last 10 steps below value_tol
        if len(history) > 10 and abs(history[-11] - min(history[-10:])) <= cfg.value_tol * abs(f):
            converged = True
            break
    return best_u * T, best_f * scale, converged, it, resid


def _sum_zero_basis(m):
    """Orthonormal basis (m x m-1) of ``{d : sum(d) = 0}`` from a Householder reflector."""
    v = np.full(m, 1.0 / math.sqrt(m))
    v[0] -= 1.0
    q = np.eye(m) - 2.0 * np.outer(v, v) / (v @ v)
    return q[:, 1:]


def _stationarity(u, f, g, proj):
    """Residual ``max |P(u - g/f) - u|`` and the relative decrease that step
    predicts to first order; both vanish exactly at KKT points."""
    rel = f if f > 0 else 1.0
    move = proj(u - g / rel) - u
    return float(np.max(np.abs(move))), max(-float(g @ move) / rel, 0.0)


# objective values below this fraction of the start value count as zero
NEGLIGIBLE = 1e-10


def _newton(obj, x0, lower, T, cfg):
    """Projected Newton iteration on the face of currently binding bounds.

    Each step solves the equality-constrained quadratic model on the free
    intervals (Hessian eigenvalues replaced by their floored magnitudes),
    then backtracks along the projection arc ``P(u + lam d)``. Intervals
    within a residual-sized distance of the bound that are pushed toward it
    are moved onto it. When the arc gives no Armijo decrease, a projected
    gradient step is taken.

    Converged means a full projected gradient step would lower the objective
    by at most ``value_tol`` (relative, to first order), the objective fell
    by less than that over the last 10 steps, or it dropped below
    ``NEGLIGIBLE`` times its starting value.
    """
    lo = lower / T
    proj = lambda v: project_intervals(v, lo, 1.0)
    u = proj(np.asarray(x0, dtype=float) / T)
    f0 = obj(u * T)[0]
    scale = f0 if f0 > 0 else 1.0

    def phi(v, hess=False):
        if hess:
            val, g, h = obj.with_hessian(v * T)
            return val / scale, g * T / scale, h * (T * T / scale)
        return obj.value(v * T) / scale, None

    f, g, h = phi(u, True)
    history = [f]
    converged = False
    resid = math.inf
    stalls = 0
    pg_step = None
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        resid, gain = _stationarity(u, f, g, proj)
        if resid <= cfg.value_tol or gain <= cfg.value_tol or f <= NEGLIGIBLE:
            converged = True
            break
        # epsilon-active set: intervals close to the bound whose gradient
        # pushes them down are moved onto it; the rest take a Newton step
        eps = min(resid, 0.1 / u.size)
        near = u - lo <= eps
        mu = g[~near].mean() if np.any(~near) else g.mean()
        held = near & (g > mu)
        base = np.zeros_like(u)
        base[held] = lo - u[held]
        idx = np.flatnonzero(~held)
        hid = np.flatnonzero(held)
        shift = -base[hid].sum()
        if idx.size:
            base[idx] = shift / idx.size
        z = gr = evecs = None
        if idx.size >= 2:
            g_eff = g[idx] + h[np.ix_(idx, hid)] @ base[hid] + h[np.ix_(idx, idx)] @ base[idx]
            z = _sum_zero_basis(idx.size)
            evals, evecs = np.linalg.eigh(z.T @ h[np.ix_(idx, idx)] @ z)
            evals = np.abs(evals)
            top = max(float(evals.max()), 1e-300)
            gr = evecs.T @ (z.T @ g_eff)

        d = base.copy()
        if z is not None:
            d[idx] -= z @ (evecs @ (gr / np.maximum(evals, 1e-10 * top)))

        step = None
        lam = 1.0
        for _ in range(12):
            u_new = proj(u + lam * d)
            gm = float(g @ (u_new - u))
            if gm < 0:
                f_new = phi(u_new)[0]
                if f_new <= f + 1e-4 * gm:
                    step = u_new
                    break
            lam *= 0.5
        if step is None:
            # projected gradient fallback along P(u - a g), starting from a
            # multiple of the last accepted length
            a = pg_step if pg_step else 1.0 / max(float(np.max(np.abs(g))), 1e-300)
            for _ in range(60):
                u_new = proj(u - a * g)
                gm = float(g @ (u_new - u))
                if gm < 0:
                    f_new = phi(u_new)[0]
                    if f_new <= f + 1e-4 * gm:
                        step = u_new
                        pg_step = 4.0 * a
                        break
                a *= 0.5
        if step is None:
            break
        f_old = f
        u = step
        f, g, h = phi(u, True)
        history.append(f)
        # objective settled: relative decrease over 10 steps within value_tol
        if len(history) > 10 and history[-11] - f <= cfg.value_tol * abs(f):
            converged = True
            break
        stalls = stalls + 1 if f_old - f <= 1e-15 * abs(f) else 0
        if stalls >= 5:
            break
    else:
        resid, gain = _stationarity(u, f, g, proj)
        converged = resid <= cfg.value_tol or gain <= cfg.value_tol
    if not converged and step is None:
        resid, gain = _stationarity(u, f, g, proj)
        converged = gain <= cfg.value_tol
    return u * T, f * scale, converged, it, resid


def _check_feasible(n, lower, T, cfg):
    if n < 0:
        raise FeasibilityError(f"pulse count must be non-negative, got {n}")
    if (n + 1) * lower > T * (1 + cfg.constraint_tol):
        raise FeasibilityError(
            f"{n} pulses need at least {(n + 1) * lower:g} > T = {T:g}")


def _starts(n, lower, T, cfg, rng, extra=()):
    starts = [("udd", make_udd(n, T).intervals), ("uniform", np.full(n + 1, T / (n + 1)))]
    for i, x in enumerate(extra):
        starts.append((f"given{i}", np.asarray(x, dtype=float)))
    for i in range(max(cfg.multistart - 2, 0)):
        w = rng.dirichlet(np.ones(n + 1))
        starts.append((f"random{i}", lower + w * (T - (n + 1) * lower)))
    return [(label, project_intervals(x, lower, T)) for label, x in starts]


def constrained_minimize(objective, n: int, tau: float, T: float,
                         cfg: OptimizerConfig | None = None, *, rng=None,
                         starts=()) -> MinimizeResult:
    """Minimise ``objective`` over ``{x_j >= tau, sum(x) = T}``, ``x`` of length ``n + 1``.

    ``objective(x)`` returns ``(value, gradient)``. The search is run from
    a UDD-shaped start, the uniform start, any ``starts`` given, and
    ``multistart - 2`` random starts drawn from ``rng``; all are projected
    onto the feasible set. The best local minimum is returned.
    """
    cfg = cfg or OptimizerConfig()
    _check_feasible(n, tau, T, cfg)
    if rng is None:
        rng = np.random.default_rng([cfg.rng_seed, n])
    budget = T - (n + 1) * tau
    if budget <= cfg.constraint_tol * T:
        x = np.full(n + 1, T / (n + 1))
        val, _ = objective(x)
        return MinimizeResult(x, val, True, 0, 0.0, [val], ["degenerate"])

    best = None
    start_chis, labels = [], []
    for label, x0 in _starts(n, tau, T, cfg, rng, starts):
        val0, _ = objective(x0)
        start_chis.append(float(val0))
        labels.append(label)
        if hasattr(objective, "with_hessian"):
            x, val, conv, its, resid = _newton(objective, x0, tau, T, cfg)
        else:
            x, val, conv, its, resid = _spg(objective, x0, tau, T, cfg)
        if best is None or val < best[1]:
            best = (x, val, conv, its, resid)
    x, val, conv, its, resid = best
    return MinimizeResult(x, float(val), conv, its, resid, start_chis, labels)


# -- BADD --------------------------------------------------------------------


@dataclass
class BaddEntry:
    n: int
    intervals: np.ndarray
    chi: float
    converged: bool
    iterations: int
    kkt_residual: float
    start_chis: list

    @property
    def sequence(self) -> PulseSequence:
        return intervals_to_sequence(self.intervals)


@dataclass
class BaddResult:
    tau: float
    T: float
    n_max: int
    per_n: list
    winner: int
    baseline_chi: float

    @property
    def best(self) -> BaddEntry:
        return self.per_n[self.winner]

    def to_dict(self) -> dict:
        d = asdict(self)
        for e in d["per_n"]:
            e["intervals"] = [float(v) for v in e["intervals"]]
            e["start_chis"] = [float(v) for v in e["start_chis"]]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def n_max_for(tau: float, T: float) -> int:
    """Largest pulse count compatible with minimum interval ``tau``: ``T/tau - 1``."""
    return int(math.floor(T / tau - 1.0 + 1e-9))


def _badd_one(kernel, n, tau, T, cfg):
    res = constrained_minimize(interval_objective(kernel), n, tau, T, cfg)
    return BaddEntry(n, res.intervals, res.chi, res.converged, res.iterations,
                     res.kkt_residual, res.start_chis)


def _run(tasks, workers):
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(fn, *args) for fn, *args in tasks]
            return [f.result() for f in futs]
    return [fn(*args) for fn, *args in tasks]


def badd(m, tau: float, T: float, n_limit: int | None = None,
         cfg: OptimizerConfig | None = None, quad: QuadratureConfig | None = None,
         *, workers: int = 1) -> BaddResult:
    """Bandwidth-adapted optimisation: scan ``n`` and keep the smallest error.

    Per-``n`` problems are independent; with ``workers > 1`` they run in a
    process pool. Results are assembled in ``n`` order and each ``n`` draws
    random starts from its own seed, so the output does not depend on
    ``workers``.
    """
    cfg = cfg or OptimizerConfig()
    if not (tau > 0 and T > 2 * tau):
        raise FeasibilityError(f"need T > 2 tau, got T={T}, tau={tau}")
    n_max = n_max_for(tau, T)
    top = n_max if n_limit is None else min(n_max, int(n_limit))
    if top < 1:
        raise FeasibilityError("no pulse count satisfies the timing constraint")
    kernel = ChiKernel(m, T, quad)
    per_n = _run([(_badd_one, kernel, n, tau, T, cfg) for n in range(1, top + 1)], workers)
    pool = [i for i, e in enumerate(per_n) if e.converged]
    if not pool:
        log.warning("no BADD sub-problem converged; picking the best unconverged one")
        pool = range(len(per_n))
    winner = min(pool, key=lambda i: (per_n[i].chi, i))
    return BaddResult(float(tau), float(T), n_max, per_n, winner, kernel.chi(np.zeros(0)))


# -- LODD / OFDD -------------------------------------------------------------


def lodd(m, n: int, T: float, cfg: OptimizerConfig | None = None,
         quad: QuadratureConfig | None = None, *, starts=()) -> MinimizeResult:
    """Optimise ``n`` pulse times for fixed ``T`` with only a positivity floor.

    The floor is ``cfg.lodd_floor * T / (n + 1)``. Extra starting interval
    vectors (for instance a BADD or OFDD solution) may be passed in ``starts``.
    """
    cfg = cfg or OptimizerConfig()
    if n < 1:
        raise ValueError(f"need at least one pulse, got {n}")
    floor = cfg.lodd_floor * T / (n + 1)
    kernel = ChiKernel(m, T, quad)
    return constrained_minimize(interval_objective(kernel), n, floor, T, cfg, starts=starts)


def ofdd(n: int, T: float, omega_c: float, cfg: OptimizerConfig | None = None,
         quad: QuadratureConfig | None = None, *, starts=()) -> MinimizeResult:
    """LODD under the flat measure on ``[0, omega_c)``; ``chi`` is the flat-measure error."""
    return lodd(FlatMeasure(omega_c), n, T, cfg, quad, starts=starts)
