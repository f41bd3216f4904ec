"""Exploration-noise schedules and the concave-decay validity checker.

Two decay curves are provided: the linear baseline n0 - rate*t and the cubic
curve n0 - (rate*t)^3, whose steepness grows over time. The checker verifies,
by central finite differences on a grid, that a candidate curve is strictly
decreasing, strictly concave, and gets steeper between successive points —
the design conditions a well-behaved exploration decay must meet. The linear
curve fails the concavity condition by construction; the cubic passes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("linear", "cubic")


@dataclass(frozen=True)
class NoiseSchedule:
    """A decay curve plus the floor the live scale never drops below."""

    kind: str
    rate: float
    initial_scale: float
    floor: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.initial_scale <= 0:
            raise ValueError("initial scale must be positive")
        if self.floor < 0:
            raise ValueError("floor must be >= 0")

    def curve(self, t):
        """Raw decay curve, before the floor is applied."""
        t = np.asarray(t, dtype=float)
        if self.kind == "linear":
            out = self.initial_scale - self.rate * t
        else:
            out = self.initial_scale - (self.rate * t) ** 3
        return float(out) if out.ndim == 0 else out


def value(schedule: NoiseSchedule, t) -> float:
    """Noise scale at iteration t: the floored decay curve."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("iteration index must be >= 0")
    raw = schedule.curve(t)
    return np.maximum(schedule.floor, raw) if isinstance(raw, np.ndarray) \
        else max(schedule.floor, raw)


@dataclass(frozen=True)
class ScheduleReport:
    passed: bool
    failed_condition: str | None = None  # 'decreasing' | 'concave' | 'steepening'
    violation_at: float | None = None


def validate_schedule(fn, t_lo: float, t_hi: float, n_grid: int = 256,
                      fd_step: float | None = None) -> ScheduleReport:
    """Check the decay-curve conditions on the open interval (t_lo, t_hi).

    Uses central differences with step fd_step (default span/1e4) at n_grid
    interior points: (a) first derivative strictly negative, (b) second
    derivative strictly negative, (c) for consecutive point triples
    x0 < x1 < x2, the slope drop per unit distance strictly increases:
    (f'(x0)-f'(x1))/|x0-x1| < (f'(x1)-f'(x2))/|x1-x2|.

    Strictness thresholds are scaled to the function's magnitude so that
    rounding noise in the stencil can neither pass a flat curve nor fail a
    genuinely concave one.
    """
    if not t_lo < t_hi:
        raise ValueError("degenerate domain")
    if n_grid < 3:
        raise ValueError("need at least 3 grid points")
    span = t_hi - t_lo
    h = fd_step if fd_step is not None else span / 1e4
    xs = np.linspace(t_lo, t_hi, n_grid + 2)[1:-1]
    f_minus = np.asarray([fn(x - h) for x in xs], dtype=float)
    f_mid = np.asarray([fn(x) for x in xs], dtype=float)
    f_plus = np.asarray([fn(x + h) for x in xs], dtype=float)

    scale = max(1.0, float(np.max(np.abs([f_minus, f_mid, f_plus]))))
    d1 = (f_plus - f_minus) / (2.0 * h)
    d2 = (f_plus - 2.0 * f_mid + f_minus) / h ** 2

    bad = np.flatnonzero(d1 >= -1e-12 * scale)
    if bad.size:
        return ScheduleReport(False, "decreasing", float(xs[bad[0]]))
    bad = np.flatnonzero(d2 >= -1e-10 * scale)
    if bad.size:
        return ScheduleReport(False, "concave", float(xs[bad[0]]))

    gap = xs[1] - xs[0]
    lhs = (d1[:-2] - d1[1:-1]) / gap
    rhs = (d1[1:-1] - d1[2:]) / gap
    bad = np.flatnonzero(lhs + 1e-10 * scale >= rhs)
    if bad.size:
        return ScheduleReport(False, "steepening", float(xs[bad[0] + 1]))
    return ScheduleReport(True)


def validate_noise_schedule(schedule: NoiseSchedule, t_lo: float,
                            t_hi: float, **kwargs) -> ScheduleReport:
    """Run the checker against a schedule's raw (unfloored) decay curve."""
    return validate_schedule(lambda t: schedule.curve(t), t_lo, t_hi, **kwargs)


def sample_noise(scale: float, dim: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. Gaussian perturbation with standard deviation = scale."""
    if scale < 0:
        raise ValueError("scale must be >= 0")
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if scale == 0:
        return np.zeros(dim)
    return rng.normal(0.0, scale, size=dim)
