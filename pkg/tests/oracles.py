"""Independent reference computations for the test-suite.

Nothing here calls the package's quadrature or filter code: the dense
trapezoid rules evaluate the filter function straight from its defining
sum over intervals.
"""
import math

import numpy as np


def trapezoid(fn, lo, hi, nodes=1_000_000, chunk=50_000):
    """Composite trapezoid rule with ``nodes`` points, evaluated in chunks."""
    x = np.linspace(lo, hi, nodes)
    h = (hi - lo) / (nodes - 1)
    total = 0.0
    for start in range(0, nodes, chunk):
        xs = x[start:start + chunk]
        total += np.sum(fn(xs))
    total -= 0.5 * (fn(x[:1])[0] + fn(x[-1:])[0])
    return total * h


def filter_direct(times, T, w):
    """``sum_j (-1)^j (e^{i t_j w} - e^{i t_{j+1} w})`` term by term."""
    t = np.concatenate(([0.0], np.asarray(times, dtype=float), [T]))
    out = np.zeros(np.shape(w), dtype=complex)
    for j in range(t.size - 1):
        out += (-1) ** j * (np.exp(1j * t[j] * w) - np.exp(1j * t[j + 1] * w))
    return out


def chi_trapezoid(times, T, lam, hi, nodes=1_000_000):
    return trapezoid(lambda w: lam(w) * np.abs(filter_direct(times, T, w)) ** 2, 0.0, hi, nodes)


def chi_flat_free(omega_c, T):
    """Free evolution under the unit flat measure: int_0^wc 4 sin^2(wT/2)."""
    return 2.0 * omega_c - 2.0 / T * math.sin(omega_c * T)


def chi_flat_echo(omega_c, T):
    """Centred echo under the unit flat measure: 16 int_0^wc sin^4(wT/4)."""
    return 16.0 * (3.0 * omega_c / 8.0 - math.sin(omega_c * T / 2.0) / T
                   + math.sin(omega_c * T) / (8.0 * T))


def chi_flat_single(t1, omega_c, T):
    """One pulse at ``t1``, unit flat measure, by expanding |1 + e^{iTw} - 2 e^{i t1 w}|^2."""
    t1 = np.asarray(t1, dtype=float)
    return (6.0 * omega_c + 2.0 * np.sin(T * omega_c) / T
            - 4.0 * np.sin(t1 * omega_c) / t1 - 4.0 * np.sin((T - t1) * omega_c) / (T - t1))


def central_difference(fn, x, step):
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size)
    for j in range(x.size):
        e = np.zeros(x.size)
        e[j] = step
        out[j] = (fn(x + e) - fn(x - e)) / (2.0 * step)
    return out


def random_sequence(rng, n, T, min_frac=0.02):
    """Random sequence whose intervals are at least ``min_frac * T / (n+1)``."""
    w = rng.dirichlet(np.ones(n + 1))
    w = min_frac / (n + 1) + (1 - min_frac) * w
    t = np.cumsum(w * T)
    return t[:-1]
