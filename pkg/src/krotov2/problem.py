"""Bundled optimization problems: dynamics, objective, costs and defaults."""
from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field, replace

import numpy as np

from .errors import Krotov2Error
from .fields import ControlField
from .functionals import FinalTimeFunctional, SquareModulusFunctional
from .grids import TimeGrid
from .hamiltonians import Hamiltonian, RunningCost
from .second_order import SigmaParams
from .states import StateSet


@dataclass
class ProblemSpec:
    """Everything one optimization run needs, validated for consistency."""

    name: str
    hamiltonian: Hamiltonian
    initial: StateSet
    targets: StateSet
    grid: TimeGrid
    guess_field: ControlField
    cost: RunningCost = None
    functional: FinalTimeFunctional = dataclass_field(
        default_factory=SquareModulusFunctional)
    sigma: SigmaParams = dataclass_field(default_factory=SigmaParams)
    hbar: float = 1.0

    def __post_init__(self):
        if self.cost is None:
            self.cost = RunningCost.zero(total_time=self.grid.total_time,
                                         n_states=self.initial.n_states)
        self.validate()

    def validate(self):
        ham = self.hamiltonian
        if self.initial.dim != ham.dim or self.targets.dim != ham.dim:
            raise Krotov2Error(
                f"problem '{self.name}': state dimension mismatch "
                f"(H: {ham.dim}, initial: {self.initial.dim}, "
                f"targets: {self.targets.dim})"
            )
        if self.initial.n_states != self.targets.n_states:
            raise Krotov2Error(
                f"problem '{self.name}': {self.initial.n_states} initial states "
                f"vs {self.targets.n_states} targets"
            )
        if not self.initial.is_orthonormal():
            raise Krotov2Error(
                f"problem '{self.name}': initial states are not orthonormal"
            )
        if not self.targets.is_orthonormal():
            raise Krotov2Error(
                f"problem '{self.name}': targets are not orthonormal; the "
                "target operator must be unitary on the optimization subspace"
            )
        if self.guess_field.n_samples != self.grid.n_steps:
            raise Krotov2Error(
                f"problem '{self.name}': guess field has "
                f"{self.guess_field.n_samples} samples for {self.grid.n_steps} "
                "grid intervals"
            )
        if not self.cost.is_zero():
            mat = self.cost.operator_matrix(0.0)
            if mat.shape[0] != ham.dim:
                raise Krotov2Error(
                    f"problem '{self.name}': cost operator dimension "
                    f"{mat.shape[0]} does not match H dimension {ham.dim}"
                )
            if np.max(np.abs(mat - mat.conj().T)) >= 1e-12:
                raise Krotov2Error(
                    f"problem '{self.name}': cost operator D must be Hermitian"
                )
            if self.cost.total_time != self.grid.total_time:
                raise Krotov2Error(
                    f"problem '{self.name}': cost horizon {self.cost.total_time} "
                    f"differs from grid horizon {self.grid.total_time}"
                )
            if self.cost.n_states != self.initial.n_states:
                raise Krotov2Error(
                    f"problem '{self.name}': cost subspace size "
                    f"{self.cost.n_states} differs from {self.initial.n_states}"
                )
        if self.hbar <= 0.0:
            raise Krotov2Error(f"problem '{self.name}': hbar must be positive")

    @property
    def n_states(self) -> int:
        return self.initial.n_states

    def with_sigma(self, sigma: SigmaParams) -> "ProblemSpec":
        return replace(self, sigma=sigma)

    def with_functional(self, functional: FinalTimeFunctional) -> "ProblemSpec":
        return replace(self, functional=functional)

    def with_guess_field(self, guess_field: ControlField) -> "ProblemSpec":
        return replace(self, guess_field=guess_field)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.hamiltonian.dim,
            "n_states": self.n_states,
            "n_steps": self.grid.n_steps,
            "total_time": self.grid.total_time,
            "functional": type(self.functional).name,
            "lambda0": self.functional.lambda0,
            "lambda_a": self.guess_field.lambda_a,
            "lambda_b": self.cost.lambda_b,
            "sigma_mode": self.sigma.mode,
            "hermitian": self.hamiltonian.hermitian,
            "linear_in_field": self.hamiltonian.linear_in_field,
            "linear_in_state": self.hamiltonian.linear_in_state,
            "hbar": self.hbar,
        }
