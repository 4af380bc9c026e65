"""Second-order weight sigma(t) and the estimation of its parameters.

The second-order field update adds 1/2 sigma(t) <dphi|dH/deps|phi_new> terms
to the first-order update.  sigma is built from three scalars (A_bar, B_bar,
C_bar) that bound how much the objective can curve under admissible state
changes.  They can be fixed by the user, derived from worst-case analytic
bounds, or approximated from the optimization history; the analytic route
guarantees monotonicity, the numeric route trades a rare retry for speed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import Krotov2Error
from .functionals import FinalTimeFunctional
from .hamiltonians import Hamiltonian, RunningCost
from .states import StateSet, Trajectory

SIGMA_MODES = ("off", "fixed", "analytic", "numeric")

#: grid points with a smaller total ||dphi||^2 are skipped in the numeric
#: estimates (0/0 limit of the defining ratios)
DENOMINATOR_FLOOR = 1e-14


@dataclass(frozen=True)
class SigmaParams:
    """Mode and parameters of the second-order weight.

    In "fixed" mode the bar values are used as given; in "analytic" and
    "numeric" modes they are recomputed every iteration and the eps_* margins
    enforce strict inequality on top of the estimated A, B, C.
    """

    mode: str = "off"
    a_bar: float = 0.0
    b_bar: float = 0.0
    c_bar: float = 0.0
    eps_a: float = 0.0
    eps_b: float = 0.0
    eps_c: float = 0.0

    def __post_init__(self):
        if self.mode not in SIGMA_MODES:
            raise Krotov2Error(
                f"sigma mode must be one of {SIGMA_MODES}, got {self.mode!r}"
            )
        for name in ("eps_a", "eps_b", "eps_c"):
            if getattr(self, name) < 0.0:
                raise Krotov2Error(f"{name} must be non-negative")


def sigma_eval(t: float, params: SigmaParams, total_time: float) -> float:
    """sigma(t) from the bar parameters; sigma(T) = -A_bar for both branches."""
    if params.mode == "off":
        return 0.0
    return sigma_from_bars(t, params.a_bar, params.b_bar, params.c_bar,
                           total_time)


def sigma_from_bars(t, a_bar: float, b_bar: float, c_bar: float,
                    total_time: float):
    """Exponential / linear-limit profile of the second-order weight.

    Written via expm1 so the B_bar -> 0 limit is smooth and sigma(T) = -A_bar
    holds exactly in both branches.
    """
    tau = total_time - np.asarray(t, dtype=float)
    if b_bar == 0.0:
        out = c_bar * tau - a_bar
    else:
        growth = b_bar * tau
        out = (c_bar / b_bar) * np.expm1(growth) - a_bar * np.exp(growth)
    if np.ndim(t) == 0:
        return float(out)
    return out


def bar_params(a: float, b: float, c: float, eps_a: float = 0.0,
               eps_b: float = 0.0, eps_c: float = 0.0):
    """Worst-case bar values: clipped so the second-order term never helps
    the objective move the wrong way."""
    a_bar = max(eps_a, 2.0 * a + eps_a)
    b_bar = 2.0 * b + eps_b
    c_bar = min(-eps_c, 2.0 * c - eps_c)
    return a_bar, b_bar, c_bar


def history_bar_params(a: float, b: float, c: float, eps_a: float = 0.0,
                       eps_b: float = 0.0, eps_c: float = 0.0):
    """Unclipped bar values used with history-based (numeric) estimates.

    Negative A_bar / positive C_bar are deliberately allowed here: that is
    what makes the numeric mode faster, at the price of occasional
    monotonicity violations handled by the retry logic.
    """
    return 2.0 * a + eps_a, 2.0 * b + eps_b, 2.0 * c - eps_c


def estimate_analytic(functional: FinalTimeFunctional, hamiltonian: Hamiltonian,
                      cost: RunningCost, costates: Trajectory,
                      targets: StateSet):
    """Worst-case (A, B, C) from supremum bounds.

    A comes from the functional's curvature bound, B from the Hamiltonian's
    state-gradient and imaginary-eigenvalue bounds, C from the costate norms
    times the state-gradient bound plus the running-cost curvature.  Missing
    bounds on nonlinear specifications raise instead of silently zeroing.
    """
    a = max(0.0, 0.5 * functional.curvature_bound(targets))

    state_grad = hamiltonian.require_state_gradient_bound()
    imag_bound = hamiltonian.require_imag_eigenvalue_bound()
    n = costates.n_states
    b = 2.0 * np.sqrt(n) * state_grad + 2.0 * imag_bound

    chi_norm_sums = np.linalg.norm(costates.data, axis=2).sum(axis=1)
    c = -(2.0 * float(np.max(chi_norm_sums)) * state_grad + cost.curvature_sup())
    return a, b, c


@dataclass
class IterationState:
    """Everything the numeric estimates need from a completed sweep."""

    field_values: np.ndarray
    forward_old: Trajectory
    costates: Trajectory
    costate_derivatives: Optional[np.ndarray]
    delta_phis: np.ndarray  # (n+1, N, M): new minus old forward states
    retries: int = 0

    def delta_norm_sq(self) -> np.ndarray:
        """Total ||dphi||^2 per grid point."""
        return np.sum(np.abs(self.delta_phis) ** 2, axis=(1, 2))


def estimate_numeric(iter_state: IterationState,
                     functional: FinalTimeFunctional,
                     hamiltonian: Hamiltonian, cost: RunningCost,
                     targets: StateSet, hbar: float = 1.0):
    """History-based (A, B_sup, C_inf) from the last accepted or failed sweep.

    Grid points where the states barely changed are skipped (the defining
    ratios become 0/0 there); if nothing changed anywhere the first-order
    triple (0, 0, 0) is returned.
    """
    if iter_state.costate_derivatives is None:
        raise Krotov2Error(
            "numeric estimates require stored costate derivatives; "
            "run the backward pass with with_derivative=True"
        )
    grid = iter_state.forward_old.grid
    n = grid.n_steps
    denom = iter_state.delta_norm_sq()
    usable = denom >= DENOMINATOR_FLOOR
    if not np.any(usable):
        return 0.0, 0.0, 0.0

    # A at the final time
    a = 0.0
    if usable[n]:
        d_final = iter_state.delta_phis[n]
        chi_t = iter_state.costates[n]
        overlap_term = 2.0 * float(np.real(np.sum(chi_t.conj() * d_final)))
        old_final = StateSet(iter_state.forward_old[n])
        new_final = StateSet(iter_state.forward_old[n] + d_final)
        jt_diff = functional.value(new_final, targets) - functional.value(
            old_final, targets)
        a = (overlap_term + jt_diff) / denom[n]

    b_values = []
    c_values = []
    for j in range(n + 1):
        if not usable[j]:
            continue
        eps = iter_state.field_values[min(j, n - 1)]
        t_j = grid.points[j]
        phi_old = iter_state.forward_old[j]
        d_phi = iter_state.delta_phis[j]
        phi_new = phi_old + d_phi
        # change of the equation-of-motion right-hand side at fixed old field
        if hamiltonian.linear_in_state:
            mat = hamiltonian.matrix(eps, t_j)
            delta_f = (-1j / hbar) * (d_phi @ mat.T)
        else:
            f_new = np.vstack([
                (-1j / hbar) * (hamiltonian.matrix(eps, t_j, state=phi_new[k])
                                @ phi_new[k])
                for k in range(phi_new.shape[0])
            ])
            f_old = np.vstack([
                (-1j / hbar) * (hamiltonian.matrix(eps, t_j, state=phi_old[k])
                                @ phi_old[k])
                for k in range(phi_old.shape[0])
            ])
            delta_f = f_new - f_old
        b_values.append(
            2.0 * float(np.real(np.sum(d_phi.conj() * delta_f))) / denom[j]
        )
        chi = iter_state.costates[j]
        chi_dot = iter_state.costate_derivatives[j]
        numer = 2.0 * float(np.real(np.sum(d_phi.conj() * chi_dot)))
        numer += 2.0 * float(np.real(np.sum(chi.conj() * delta_f)))
        if not cost.is_zero():
            numer -= cost.density(phi_new, t_j) - cost.density(phi_old, t_j)
        c_values.append(numer / denom[j])

    if not b_values:
        return a, 0.0, 0.0
    return a, float(np.max(b_values)), float(np.min(c_values))


def check_field_nonlinearity_bound(lambda_a: float, shape: np.ndarray,
                                   sigma_values: np.ndarray,
                                   chi_norm_sums: np.ndarray,
                                   hamiltonian: Hamiltonian, n_states: int,
                                   headroom: float = 1.1):
    """Per-point check of the step-size condition for field-nonlinear H.

    Verifies lambda_a / S(t) > sqrt(N)/2 * sum_k||chi_k(t)|| * M2 +
    N |sigma(t)| M2 at every sample, with M2 the supremum of the second field
    derivative of H.  Returns (ok_mask, minimal uniform lambda_a with the
    requested headroom).  Report-only: nothing is raised on violation.
    """
    m2 = hamiltonian.require_field_curvature_bound()
    shape = np.asarray(shape, dtype=float)
    sigma_values = np.asarray(sigma_values, dtype=float)
    chi_norm_sums = np.asarray(chi_norm_sums, dtype=float)
    if not (shape.shape == sigma_values.shape == chi_norm_sums.shape):
        raise Krotov2Error(
            "shape, sigma and costate-norm arrays must have equal length"
        )
    rhs = (0.5 * np.sqrt(n_states) * chi_norm_sums * m2
           + n_states * np.abs(sigma_values) * m2)
    with np.errstate(divide="ignore"):
        lhs = np.where(shape > 0.0, lambda_a / np.where(shape > 0.0, shape, 1.0),
                       np.inf)
    ok = lhs > rhs
    minimal = headroom * float(np.max(shape * rhs)) if shape.size else 0.0
    return ok, minimal
