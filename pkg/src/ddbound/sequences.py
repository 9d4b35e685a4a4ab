"""Pulse sequences of instantaneous pi pulses and UDD generators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "PulseSequence",
    "SequenceStructureError",
    "TimingViolation",
    "make_udd",
    "udd_with_min_interval",
    "tailored_udd_n",
    "validate",
    "intervals_to_sequence",
    "uniform_sequence",
    "read_sequence",
    "write_sequence",
    "format_sequence",
    "parse_sequence",
]


class SequenceStructureError(ValueError):
    """Pulse times are not strictly increasing inside ``(0, T)``."""


@dataclass(frozen=True, eq=False)
class PulseSequence:
    """Total duration ``T`` and interior pulse times ``0 < t_1 < ... < t_n < T``.

    ``n = 0`` is free evolution.
    """

    T: float
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "T", float(self.T))
        if not self.T > 0:
            raise SequenceStructureError(f"duration must be positive, got {self.T}")
        if times.size and (times[0] <= 0 or times[-1] >= self.T or np.any(np.diff(times) <= 0)):
            raise SequenceStructureError("pulse times must be strictly increasing inside (0, T)")

    @property
    def n(self) -> int:
        return int(self.times.size)

    @property
    def intervals(self) -> np.ndarray:
        """``tau_j = t_j - t_{j-1}`` for ``j = 1..n+1`` with ``t_0 = 0, t_{n+1} = T``."""
        return np.diff(np.concatenate(([0.0], self.times, [self.T])))

    @property
    def min_interval(self) -> float:
        return float(self.intervals.min())

    def rescaled_times(self) -> np.ndarray:
        """Pulse times in units of the sequence's own minimum interval."""
        return self.times / self.min_interval

    def __eq__(self, other):
        if not isinstance(other, PulseSequence):
            return NotImplemented
        return self.T == other.T and np.array_equal(self.times, other.times)

    def __repr__(self):
        return f"PulseSequence(T={self.T!r}, times={self.times.tolist()!r})"


def make_udd(n: int, T: float) -> PulseSequence:
    """Uhrig sequence ``t_j = T sin^2(pi j / (2n + 2))``; ``n = 0`` is free evolution."""
    if n < 0:
        raise ValueError(f"pulse count must be non-negative, got {n}")
    if not T > 0:
        raise ValueError(f"duration must be positive, got {T}")
    # build the first half and mirror it, so the set is exactly symmetric
    half = np.arange(1, (n + 1) // 2 + 1)
    head = T * np.sin(np.pi * half / (2 * n + 2)) ** 2
    if n % 2:
        head[-1] = 0.5 * T
        times = np.concatenate((head, T - head[-2::-1]))
    else:
        times = np.concatenate((head, T - head[::-1]))
    return PulseSequence(T, times)


def udd_with_min_interval(n: int, tau: float) -> PulseSequence:
    """UDD_n stretched so that its first (and smallest) interval equals ``tau``."""
    if n < 1:
        raise ValueError("need at least one pulse")
    return make_udd(n, tau / math.sin(math.pi / (2 * n + 2)) ** 2)


def tailored_udd_n(omega_c: float, tau: float) -> int:
    """Pulse count ``max(1, round(1 / (e^2 omega_c tau)))`` matched to the bandwidth."""
    x = omega_c * tau
    if not x > 0:
        raise ValueError(f"omega_c * tau must be positive, got {x}")
    return max(1, int(round(1.0 / (math.e ** 2 * x))))


def uniform_sequence(n: int, T: float) -> PulseSequence:
    """Equally spaced pulses, ``n + 1`` equal intervals."""
    return PulseSequence(T, T * np.arange(1, n + 1) / (n + 1))


@dataclass(frozen=True)
class TimingViolation:
    """Intervals shorter than the allowed minimum switching time."""

    tau_min: float
    min_interval: float
    indices: tuple

    def __bool__(self):
        return False


def validate(seq: PulseSequence, tau_min: float):
    """Check the minimum-switching-time constraint.

    Returns ``True`` when every interval is at least ``tau_min - 1e-9 T``,
    otherwise a falsy :class:`TimingViolation` listing the 0-based indices
    of the offending intervals. Structural problems raise
    :class:`SequenceStructureError`.
    """
    if not isinstance(seq, PulseSequence):
        seq = PulseSequence(*seq)
    iv = seq.intervals
    if np.any(iv <= 0):
        raise SequenceStructureError("pulse times must be strictly increasing inside (0, T)")
    bad = np.flatnonzero(iv < tau_min - 1e-9 * seq.T)
    if bad.size:
        return TimingViolation(float(tau_min), float(iv.min()), tuple(bad.tolist()))
    return True


def intervals_to_sequence(intervals, n: int | None = None) -> PulseSequence:
    """Build a sequence from its ``n + 1`` intervals (cumulative sums)."""
    iv = np.asarray(intervals, dtype=float).ravel()
    if n is not None and iv.size != n + 1:
        raise ValueError(f"expected {n + 1} intervals, got {iv.size}")
    if iv.size == 0 or np.any(iv <= 0):
        raise ValueError("intervals must be positive")
    t = np.cumsum(iv)
    return PulseSequence(t[-1], t[:-1])


# -- text format -------------------------------------------------------------


def format_sequence(seq: PulseSequence) -> str:
    times = " ".join(f"{t:.17g}" for t in seq.times)
    return f"T {seq.T:.17g}\n{times}\n"


def parse_sequence(text: str) -> PulseSequence:
    """Parse ``T <value>`` followed by a line of whitespace-separated times."""
    lines = [ln for ln in text.splitlines()]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ValueError("line 1: empty sequence file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "T":
        raise ValueError(f"line 1: expected 'T <value>', got {lines[0]!r}")
    try:
        T = float(head[1])
    except ValueError:
        raise ValueError(f"line 1: bad duration {head[1]!r}") from None
    if len(lines) > 2:
        raise ValueError(f"line 3: unexpected content {lines[2]!r}")
    times = []
    if len(lines) == 2:
        for tok in lines[1].split():
            try:
                times.append(float(tok))
            except ValueError:
                raise ValueError(f"line 2: bad pulse time {tok!r}") from None
    try:
        return PulseSequence(T, times)
    except ValueError as exc:
        raise ValueError(f"line {2 if times else 1}: {exc}") from None


def read_sequence(path) -> PulseSequence:
    return parse_sequence(Path(path).read_text())


def write_sequence(seq: PulseSequence, path) -> None:
    Path(path).write_text(format_sequence(seq))
