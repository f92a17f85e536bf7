"""Fixed-step time stepping shared by the solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from .errors import NumericalAbort, ValidationError


@dataclass
class Trajectory:
    """States recorded at the requested sample times (ascending)."""

    times: np.ndarray
    states: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(zip(self.times, self.states))

    def at(self, t: float):
        i = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[i], t, rel_tol=1e-12, abs_tol=1e-12):
            raise KeyError(f"time {t} was not sampled")
        return self.states[i]

    @property
    def final(self):
        return self.states[-1]


def sample_grid(t_start: float, t_end: float, samples: Sequence[float] | int | None) -> np.ndarray:
    """Normalise a sample specification into a sorted array inside [t_start, t_end]."""
    if t_end < t_start:
        raise ValidationError(f"t_end={t_end} < t_start={t_start}")
    if samples is None:
        out = np.array([t_start, t_end])
    elif np.isscalar(samples):
        out = np.linspace(t_start, t_end, int(samples))
    else:
        out = np.asarray(samples, dtype=float)
    out = np.unique(out)
    if out.size == 0 or out[0] < t_start - 1e-12 or out[-1] > t_end + 1e-12:
        raise ValidationError("sample times must lie inside [t_start, t_end]")
    return out


def step_schedule(t_start: float, samples: np.ndarray, dt: float) -> Iterator[tuple[float, float, int | None]]:
    """Yield ``(t, h, sample_index)`` so that steps land exactly on every sample.

    ``sample_index`` is set on the step that ends on a sample time; a
    sample equal to ``t_start`` is reported with ``h = 0``.
    """
    if not dt > 0:
        raise ValidationError(f"time step must be positive, got {dt}")
    t = t_start
    for i, ts in enumerate(samples):
        span = ts - t
        if span <= 1e-14 * max(1.0, abs(ts)):
            yield t, 0.0, i
            continue
        n = max(1, math.ceil(span / dt - 1e-9))
        h = span / n
        for k in range(n):
            last = k == n - 1
            yield t + k * h, h, (i if last else None)
        t = ts


def check_finite(arr: np.ndarray, t: float, what: str = "state") -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericalAbort(f"non-finite {what} at t={t:.6g}", time=t)


def rk4(rhs: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray, t_start: float,
        samples: np.ndarray, dt: float, wrap: Callable[[np.ndarray], Any] = lambda y: y) -> Trajectory:
    """Classical fourth-order Runge-Kutta for dy/dt = rhs(t, y), recorded at ``samples``."""
    y = np.array(y0, dtype=complex)
    states = []
    for t, h, idx in step_schedule(t_start, samples, dt):
        if h > 0:
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + (h / 2) * k1)
            k3 = rhs(t + h / 2, y + (h / 2) * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            check_finite(y, t + h)
        if idx is not None:
            states.append(wrap(y.copy()))
    return Trajectory(np.asarray(samples, dtype=float), states)
