"""Uniform time grids.

States live on the n+1 grid points t_0=0 ... t_n=T; control fields live on
the n interval midpoints t_{j+1/2}.  This split makes the sequential field
update well defined: the field value for interval j is computed from states
already known at t_j.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, T] with ``n_steps`` intervals."""

    n_steps: int
    total_time: float
    points: np.ndarray = field(init=False, repr=False, compare=False)
    midpoints: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_steps) < 1 or self.n_steps != int(self.n_steps):
            raise GridError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not np.isfinite(self.total_time) or self.total_time <= 0.0:
            raise GridError(f"total_time must be positive and finite, got {self.total_time!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "total_time", float(self.total_time))
        points = np.linspace(0.0, self.total_time, self.n_steps + 1)
        midpoints = 0.5 * (points[:-1] + points[1:])
        points.setflags(write=False)
        midpoints.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "midpoints", midpoints)

    @property
    def dt(self) -> float:
        return self.total_time / self.n_steps

    def matches(self, other: "TimeGrid") -> bool:
        return self.n_steps == other.n_steps and self.total_time == other.total_time
