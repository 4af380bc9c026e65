"""Hamiltonian abstraction and state-dependent running costs.

A Hamiltonian exposes its matrix at a given (field, time, state), the action
of its field derivative, and the supremum bounds needed by the second-order
parameter estimates.  Flags declare structure the algorithms exploit:
hermiticity (norm conservation), linearity in the field (no field-curvature
bound needed) and linearity in the state (no costate coupling terms).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BoundUnavailableError, OperatorError
from .operators import DenseOperator, as_matrix, extreme_eigenvalues


class Hamiltonian:
    """Base class for concrete generators H(state, field, t).

    Subclasses must implement :meth:`matrix` and :meth:`field_derivative_apply`
    and should set the structure flags and bounds in ``__init__``.
    """

    def __init__(self, dim, *, hermitian, linear_in_field, linear_in_state,
                 second_field_derivative_bound=None, state_gradient_bound=None,
                 imag_eigenvalue_bound=None):
        self.dim = int(dim)
        self.hermitian = bool(hermitian)
        self.linear_in_field = bool(linear_in_field)
        self.linear_in_state = bool(linear_in_state)
        if linear_in_field:
            second_field_derivative_bound = 0.0
        if linear_in_state:
            state_gradient_bound = 0.0
        if hermitian:
            imag_eigenvalue_bound = 0.0
        self.second_field_derivative_bound = second_field_derivative_bound
        self.state_gradient_bound = state_gradient_bound
        self.imag_eigenvalue_bound = imag_eigenvalue_bound

    def matrix(self, eps: float, t: float, state: Optional[np.ndarray] = None) -> np.ndarray:
        raise NotImplementedError

    def apply(self, states: np.ndarray, eps: float, t: float) -> np.ndarray:
        """Action of H on a single state (M,) or a state block (N, M)."""
        mat = self.matrix(eps, t)
        states = np.asarray(states)
        if states.ndim == 1:
            return mat @ states
        return states @ mat.T

    def field_derivative_apply(self, states: np.ndarray, eps: float, t: float) -> np.ndarray:
        """Action of dH/d(eps) on a state or state block."""
        raise NotImplementedError

    def state_coupling_source(self, chis: np.ndarray, phis: np.ndarray,
                              eps: float, t: float) -> Optional[np.ndarray]:
        """Costate source from the state dependence of H.

        Hook for generators that are non-linear in the state: returns the
        per-state inhomogeneous contribution to the backward equation, shaped
        like ``chis``.  Linear-in-state generators return None.
        """
        if self.linear_in_state:
            return None
        raise BoundUnavailableError(
            f"{type(self).__name__} is non-linear in the state but does not "
            "implement state_coupling_source"
        )

    def require_field_curvature_bound(self) -> float:
        if self.second_field_derivative_bound is None:
            raise BoundUnavailableError(
                f"{type(self).__name__} has no second-field-derivative bound; "
                "supply one to use the field-nonlinearity check"
            )
        return float(self.second_field_derivative_bound)

    def require_state_gradient_bound(self) -> float:
        if self.state_gradient_bound is None:
            raise BoundUnavailableError(
                f"{type(self).__name__} has no state-gradient bound; supply one "
                "to use analytic second-order estimates"
            )
        return float(self.state_gradient_bound)

    def require_imag_eigenvalue_bound(self) -> float:
        if self.imag_eigenvalue_bound is None:
            raise BoundUnavailableError(
                f"{type(self).__name__} is non-hermitian and has no bound on the "
                "imaginary part of its eigenvalues"
            )
        return float(self.imag_eigenvalue_bound)


class LinearFieldHamiltonian(Hamiltonian):
    """H(eps) = H0 + eps * mu, the standard dipole-coupling form."""

    def __init__(self, h0, mu):
        h0 = as_matrix(h0)
        mu = as_matrix(mu)
        if h0.shape != mu.shape:
            raise OperatorError(f"H0 {h0.shape} and mu {mu.shape} differ in shape")
        hermitian = (
            np.max(np.abs(h0 - h0.conj().T)) < 1e-12
            and np.max(np.abs(mu - mu.conj().T)) < 1e-12
        )
        super().__init__(h0.shape[0], hermitian=hermitian,
                         linear_in_field=True, linear_in_state=True)
        self.h0 = h0
        self.mu = mu

    def matrix(self, eps, t, state=None):
        return self.h0 + eps * self.mu

    def field_derivative_apply(self, states, eps, t):
        states = np.asarray(states)
        if states.ndim == 1:
            return self.mu @ states
        return states @ self.mu.T


@dataclass
class RunningCost:
    """State-dependent running cost (lambda_b/(T N)) sum_k <phi_k|D|phi_k>.

    ``operator`` may be a constant DenseOperator or a callable t -> matrix.
    A None operator or lambda_b = 0 disables the cost.
    """

    lambda_b: float = 0.0
    operator: Optional[object] = None
    total_time: float = 1.0
    n_states: int = 1

    def is_zero(self) -> bool:
        return self.lambda_b == 0.0 or self.operator is None

    def operator_matrix(self, t: float) -> np.ndarray:
        if callable(self.operator):
            return as_matrix(self.operator(t))
        return as_matrix(self.operator)

    @property
    def weight(self) -> float:
        return self.lambda_b / (self.total_time * self.n_states)

    def gradient_source(self, states: np.ndarray, t: float) -> np.ndarray:
        """Backward-equation source (lambda_b/(T N)) D(t)|phi_k(t)>, per state."""
        mat = self.operator_matrix(t)
        states = np.asarray(states)
        if states.ndim == 1:
            return self.weight * (mat @ states)
        return self.weight * (states @ mat.T)

    def density(self, states: np.ndarray, t: float) -> float:
        """Integrand value (lambda_b/(T N)) sum_k <phi_k|D|phi_k> at time t."""
        mat = self.operator_matrix(t)
        states = np.atleast_2d(np.asarray(states))
        return float(self.weight * np.real(np.sum(states.conj() * (states @ mat.T))))

    def curvature_sup(self, t_samples=None) -> float:
        """sup over state changes of the quadratic remainder of g per unit norm.

        For the quadratic cost this is (lambda_b/(T N)) times the extreme
        eigenvalue of D selected by the sign of lambda_b.
        """
        if self.is_zero():
            return 0.0
        if callable(self.operator):
            if t_samples is None:
                t_samples = np.linspace(0.0, self.total_time, 33)
            extremes = [extreme_eigenvalues(self.operator_matrix(t)) for t in t_samples]
            lam_min = min(e[0] for e in extremes)
            lam_max = max(e[1] for e in extremes)
        else:
            lam_min, lam_max = extreme_eigenvalues(self.operator_matrix(0.0))
        lam = lam_max if self.lambda_b >= 0.0 else lam_min
        return self.weight * lam

    @classmethod
    def zero(cls, total_time: float = 1.0, n_states: int = 1) -> "RunningCost":
        return cls(lambda_b=0.0, operator=None, total_time=total_time,
                   n_states=n_states)
