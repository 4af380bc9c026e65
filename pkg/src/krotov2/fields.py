"""Real control fields sampled on interval midpoints."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import FieldError
from .grids import TimeGrid


def sin2_envelope(t, total_time):
    """Smooth switch-on/off window sin^2(pi t / T)."""
    return np.sin(np.pi * np.asarray(t) / total_time) ** 2


@dataclass(frozen=True)
class ControlField:
    """Control samples, update shape S(t) and reference field on midpoints.

    ``lambda_a`` is the (positive) weight of the quadratic change penalty
    lambda_a/S(t) * (eps - eps_ref)^2; S(t) >= 0 scales where and how much
    the field may change per iteration.
    """

    values: np.ndarray
    shape: np.ndarray
    reference: np.ndarray
    lambda_a: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        shape = np.asarray(self.shape, dtype=float)
        reference = np.asarray(self.reference, dtype=float)
        n = values.shape[0]
        if values.ndim != 1 or n < 1:
            raise FieldError("field values must be a non-empty 1-d real array")
        if shape.shape != (n,) or reference.shape != (n,):
            raise FieldError(
                f"shape/reference must match the {n} field samples, "
                f"got {shape.shape} and {reference.shape}"
            )
        if np.any(shape < 0.0):
            raise FieldError("shape function S(t) must be non-negative everywhere")
        if not np.isfinite(self.lambda_a) or self.lambda_a <= 0.0:
            raise FieldError(f"lambda_a must be positive, got {self.lambda_a!r}")
        for arr in (values, shape, reference):
            arr.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "reference", reference)
        object.__setattr__(self, "lambda_a", float(self.lambda_a))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    def with_values(self, values, reference=None) -> "ControlField":
        """New field with the same S(t)/lambda_a, optionally re-referenced."""
        ref = self.reference if reference is None else np.asarray(reference, dtype=float)
        return replace(self, values=np.asarray(values, dtype=float), reference=ref)

    def rereferenced(self) -> "ControlField":
        """New field whose reference is its own values (zero change penalty)."""
        return replace(self, reference=self.values)

    def with_lambda_a(self, lambda_a: float) -> "ControlField":
        return replace(self, lambda_a=lambda_a)


def build_guess_field(grid: TimeGrid, eps0: float, omega: float,
                      lambda_a: float = 1.0) -> ControlField:
    """Windowed-cosine guess eps0 * sin^2(pi t/T) * cos(omega t) on midpoints.

    The update shape defaults to the same sin^2 window and the reference
    field to the guess itself, so the change penalty vanishes for the guess.
    """
    if eps0 < 0.0 or omega < 0.0:
        raise FieldError("eps0 and omega must be non-negative")
    t = grid.midpoints
    envelope = sin2_envelope(t, grid.total_time)
    values = eps0 * envelope * np.cos(omega * t)
    return ControlField(values=values, shape=envelope, reference=values,
                        lambda_a=lambda_a)
