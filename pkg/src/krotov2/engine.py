"""The optimization loop.

Each iteration backward-propagates the costates under the current field,
then sweeps forward through the grid: at every interval the field sample is
updated from the stored costate, the in-progress new states and (for the
second-order construction) the state change against the previous iteration,
after which the states advance one step under the fresh sample.  This
sequential scheme resolves the implicit coupling between the new field and
the states it propagates.

Monotonicity of the recorded total objective is checked against a round-off
tolerance; in numeric-sigma mode a violating iteration is redone once with
the parameter estimates extracted from the failed sweep.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np

from .errors import DivergenceError, FieldError, Krotov2Error
from .fields import ControlField
from .functionals import g_a_integral, g_b_integral
from .hamiltonians import Hamiltonian
from .problem import ProblemSpec
from .propagation import PassStepper, backward_costates, propagate_forward
from .second_order import (
    IterationState,
    bar_params,
    check_field_nonlinearity_bound,
    estimate_analytic,
    estimate_numeric,
    history_bar_params,
    sigma_from_bars,
)
from .states import StateSet, Trajectory

#: relative round-off allowance for the monotonicity check
MONOTONIC_RTOL = 1e-12

#: starting value when escalating a zero eps margin after repeated failures
EPS_ESCALATION_FLOOR = 1e-2

CSV_COLUMNS = ("iter", "J", "J_T", "int_ga", "int_gb", "J_norm", "delta_J",
               "monotonic", "A_bar", "B_bar", "C_bar", "retries")


def monotonic_tolerance(j_previous: float) -> float:
    return MONOTONIC_RTOL * (1.0 + abs(j_previous))


def j_norm(j_value: float, lambda0: float, lambda_b: float) -> float:
    """Weight-independent normalization of the total objective.

    Implemented exactly as defined; for lambda_b > 0 the raw components are
    recorded alongside so callers can renormalize differently if desired.
    """
    denominator = lambda_b - lambda0
    if denominator == 0.0:
        raise Krotov2Error("j_norm denominator lambda_b - lambda0 is zero")
    if lambda_b <= 0.0:
        return j_value / denominator
    return 1.0 - (j_value - lambda0) / denominator


@dataclass(frozen=True)
class IterationEntry:
    """One row of the convergence record."""

    iteration: int
    j_total: float
    j_final: float
    int_ga: float
    int_gb: float
    j_normalized: float
    delta_j: float
    monotonic: bool
    a_bar: float
    b_bar: float
    c_bar: float
    retries: int
    # extra diagnostics, not part of the CSV contract
    numeric_abc: Optional[tuple] = None
    max_delta_norm_sq: float = 0.0
    tau_abs: float = float("nan")


@dataclass
class OptimizationRecord:
    """Per-iteration convergence data plus the final field and states."""

    entries: list = dataclass_field(default_factory=list)
    final_field: Optional[ControlField] = None
    final_states: Optional[StateSet] = None
    message: str = ""
    lambda0: float = 1.0
    lambda_b: float = 0.0

    @property
    def iterations(self) -> int:
        return self.entries[-1].iteration if self.entries else 0

    def violations(self) -> int:
        return sum(1 for e in self.entries if not e.monotonic)

    def max_retries(self) -> int:
        return max((e.retries for e in self.entries), default=0)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(CSV_COLUMNS) + "\n")
        for e in self.entries:
            row = [
                str(int(e.iteration)),
                repr(float(e.j_total)),
                repr(float(e.j_final)),
                repr(float(e.int_ga)),
                repr(float(e.int_gb)),
                repr(float(e.j_normalized)),
                repr(float(e.delta_j)),
                str(int(e.monotonic)),
                repr(float(e.a_bar)),
                repr(float(e.b_bar)),
                repr(float(e.c_bar)),
                str(int(e.retries)),
            ]
            out.write(",".join(row) + "\n")
        return out.getvalue()


@dataclass(frozen=True)
class IterateOptions:
    max_iter: int = 100
    j_tol: float = 0.0
    monotonic_guard: bool = True
    collect_numeric: bool = False
    field_update_sweeps: int = 1
    source_mode: str = "midpoint"
    propagator_tol: float = 1e-12


def _rows(states) -> np.ndarray:
    if isinstance(states, StateSet):
        return states.states
    return np.atleast_2d(np.asarray(states))


def update_field_step(j: int, chis, phi_new, delta_phi, sigma_j: float,
                      field: ControlField, hamiltonian: Hamiltonian,
                      t: float = 0.0, sweeps: int = 1) -> float:
    """New field sample for interval j from states known at t_j.

    Realizes eps_new = eps_ref + S/lambda_a * Im{ sum_k <chi_k|dH/deps|phi_k>
    + sigma/2 sum_k <dphi_k|dH/deps|phi_k> }.  For field-nonlinear H the
    derivative is re-evaluated at the candidate field value ``sweeps`` times.
    """
    gain = field.shape[j] / field.lambda_a
    if not np.isfinite(gain):
        raise FieldError(f"S/lambda_a is not finite at time index {j}")
    reference = field.reference[j]
    chi_rows = _rows(chis)
    phi_rows = _rows(phi_new)
    delta_rows = _rows(delta_phi)

    def candidate(eps_eval: float) -> float:
        deriv = hamiltonian.field_derivative_apply(phi_rows, eps_eval, t)
        overlap = np.sum(chi_rows.conj() * deriv)
        if sigma_j != 0.0:
            overlap += 0.5 * sigma_j * np.sum(delta_rows.conj() * deriv)
        return reference + gain * float(np.imag(overlap))

    eps_new = candidate(field.values[j])
    if not hamiltonian.linear_in_field:
        for _ in range(max(0, sweeps)):
            eps_new = candidate(eps_new)
    return eps_new


def _forward_sweep(problem: ProblemSpec, field: ControlField,
                   forward_old: Trajectory, chis: Trajectory,
                   sigma_values: Optional[np.ndarray],
                   options: IterateOptions):
    """One field update + forward propagation pass.

    Returns (new_field, new_forward, delta_phis) where delta_phis holds the
    state change against the previous iteration at every grid point.
    """
    grid = problem.grid
    ham = problem.hamiltonian
    n = grid.n_steps
    n_states, dim = problem.initial.n_states, problem.initial.dim
    # the update is taken relative to the current iteration's field
    field = field.rereferenced()

    new_values = np.empty(n)
    new_forward = Trajectory.empty(grid, n_states, dim)
    delta_phis = np.empty((n + 1, n_states, dim), dtype=complex)
    new_forward.data[0] = problem.initial.states
    delta_phis[0] = 0.0

    block = np.ascontiguousarray(problem.initial.states.T)
    stepper = PassStepper(grid.dt, hbar=problem.hbar,
                          tol=options.propagator_tol)
    for j in range(n):
        phi_rows = block.T
        delta_rows = phi_rows - forward_old[j]
        delta_phis[j] = delta_rows
        sigma_j = 0.0 if sigma_values is None else float(sigma_values[j])
        eps_new = update_field_step(
            j, chis[j], phi_rows, delta_rows, sigma_j, field, ham,
            t=grid.midpoints[j], sweeps=options.field_update_sweeps,
        )
        new_values[j] = eps_new
        if ham.linear_in_state:
            mat = ham.matrix(eps_new, grid.midpoints[j])
            block = stepper.step(mat, ham.hermitian, block)
        else:
            cols = []
            for k in range(block.shape[1]):
                mat = ham.matrix(eps_new, grid.midpoints[j], state=block[:, k])
                cols.append(stepper.step(mat, ham.hermitian,
                                         block[:, k:k + 1]))
            block = np.hstack(cols)
        new_forward.data[j + 1] = block.T
    delta_phis[n] = block.T - forward_old[n]

    new_field = ControlField(values=new_values, shape=field.shape,
                             reference=field.values, lambda_a=field.lambda_a)
    return new_field, new_forward, delta_phis


def _objective(problem: ProblemSpec, field: ControlField,
               forward: Trajectory):
    jt = problem.functional.value(forward.final(), problem.targets)
    ga = g_a_integral(field, problem.grid)
    gb = g_b_integral(forward, problem.cost)
    return jt + ga + gb, jt, ga, gb


def _safe_j_norm(j_value: float, lambda0: float, lambda_b: float) -> float:
    try:
        return j_norm(j_value, lambda0, lambda_b)
    except Krotov2Error:
        return float("nan")


def iterate(problem: ProblemSpec, options: IterateOptions = IterateOptions()
            ) -> OptimizationRecord:
    """Run the optimization and return the convergence record.

    Iteration 0 evaluates the guess field; each further iteration performs
    one backward pass and one field-updating forward sweep.  Stops after
    ``max_iter`` iterations or when |delta J| < ``j_tol``.  Non-finite
    objective values abort with the record accumulated so far attached to
    the raised DivergenceError.
    """
    grid = problem.grid
    ham = problem.hamiltonian
    cost = problem.cost
    functional = problem.functional
    targets = problem.targets
    sigma = problem.sigma

    record = OptimizationRecord(lambda0=functional.lambda0,
                                lambda_b=cost.lambda_b)
    field = problem.guess_field.rereferenced()
    forward = propagate_forward(problem.initial, field, grid, ham,
                                hbar=problem.hbar, tol=options.propagator_tol)
    j_total, jt, ga, gb = _objective(problem, field, forward)
    if not np.isfinite(j_total):
        raise DivergenceError("guess-field objective is not finite", record)
    tau0 = abs(np.sum(targets.states.conj() * forward.final().states))
    record.entries.append(IterationEntry(
        iteration=0, j_total=j_total, j_final=jt, int_ga=ga, int_gb=gb,
        j_normalized=_safe_j_norm(j_total, functional.lambda0, cost.lambda_b),
        delta_j=0.0, monotonic=True, a_bar=0.0, b_bar=0.0, c_bar=0.0,
        retries=0, tau_abs=float(tau0),
    ))
    record.final_field = field
    record.final_states = forward.final()
    record.message = "guess evaluation only"
    if options.max_iter < 1:
        return record

    need_numeric = sigma.mode == "numeric" or options.collect_numeric
    numeric_abc = (0.0, 0.0, 0.0)
    eps_a, eps_c = sigma.eps_a, sigma.eps_c
    consecutive_failures = 0

    for iteration in range(1, options.max_iter + 1):
        terminal = functional.costate_boundary(forward.final(), targets)
        chis, chi_dots = backward_costates(
            terminal, forward, field, grid, ham, cost, hbar=problem.hbar,
            tol=options.propagator_tol, with_derivative=need_numeric,
            source_mode=options.source_mode,
        )

        if sigma.mode == "off":
            bars = None
        elif sigma.mode == "fixed":
            bars = (sigma.a_bar, sigma.b_bar, sigma.c_bar)
        elif sigma.mode == "analytic":
            abc = estimate_analytic(functional, ham, cost, chis, targets)
            bars = bar_params(*abc, sigma.eps_a, sigma.eps_b, sigma.eps_c)
        else:  # numeric: history-based, unclipped
            bars = history_bar_params(*numeric_abc, eps_a, sigma.eps_b, eps_c)

        retries = 0
        while True:
            sigma_values = None
            if bars is not None and any(b != 0.0 for b in bars):
                sigma_values = sigma_from_bars(grid.midpoints, *bars,
                                               grid.total_time)
            new_field, new_forward, delta_phis = _forward_sweep(
                problem, field, forward, chis, sigma_values, options)
            j_new, jt_new, ga_new, gb_new = _objective(problem, new_field,
                                                       new_forward)
            if not np.isfinite(j_new):
                record.message = (
                    f"diverged at iteration {iteration}; last good iteration "
                    f"{iteration - 1}"
                )
                raise DivergenceError(record.message, record)
            delta_j = j_new - j_total
            violated = (options.monotonic_guard
                        and delta_j > monotonic_tolerance(j_total))
            if violated and sigma.mode == "numeric" and retries == 0:
                failed_state = IterationState(
                    field_values=field.values, forward_old=forward,
                    costates=chis, costate_derivatives=chi_dots,
                    delta_phis=delta_phis,
                )
                failed_abc = estimate_numeric(failed_state, functional, ham,
                                              cost, targets, hbar=problem.hbar)
                bars = history_bar_params(*failed_abc, eps_a, sigma.eps_b,
                                          eps_c)
                retries = 1
                continue
            break

        monotonic_ok = delta_j <= monotonic_tolerance(j_total)
        if not monotonic_ok:
            consecutive_failures += 1
            if sigma.mode == "numeric" and consecutive_failures >= 2:
                eps_a = 2.0 * eps_a if eps_a > 0.0 else EPS_ESCALATION_FLOOR
                eps_c = 2.0 * eps_c if eps_c > 0.0 else EPS_ESCALATION_FLOOR
        else:
            consecutive_failures = 0

        accepted_state = IterationState(
            field_values=field.values, forward_old=forward, costates=chis,
            costate_derivatives=chi_dots, delta_phis=delta_phis,
            retries=retries,
        )
        abc_estimate = None
        if need_numeric:
            abc_estimate = estimate_numeric(accepted_state, functional, ham,
                                            cost, targets, hbar=problem.hbar)
            numeric_abc = abc_estimate

        used_bars = bars if bars is not None else (0.0, 0.0, 0.0)
        tau_abs = abs(np.sum(targets.states.conj()
                             * new_forward.final().states))
        record.entries.append(IterationEntry(
            iteration=iteration, j_total=j_new, j_final=jt_new,
            int_ga=ga_new, int_gb=gb_new,
            j_normalized=_safe_j_norm(j_new, functional.lambda0,
                                      cost.lambda_b),
            delta_j=delta_j, monotonic=monotonic_ok,
            a_bar=used_bars[0], b_bar=used_bars[1], c_bar=used_bars[2],
            retries=retries, numeric_abc=abc_estimate,
            max_delta_norm_sq=float(
                np.max(np.sum(np.abs(delta_phis) ** 2, axis=(1, 2)))),
            tau_abs=float(tau_abs),
        ))

        field, forward, j_total = new_field, new_forward, j_new
        record.final_field = field
        record.final_states = forward.final()
        if options.j_tol > 0.0 and abs(delta_j) < options.j_tol:
            record.message = (
                f"converged: |delta J| < {options.j_tol:g} at iteration "
                f"{iteration}"
            )
            return record

    record.message = f"reached max_iter = {options.max_iter}"
    return record


def minimal_lambda_a(problem: ProblemSpec, chi_norm_sums=None,
                     headroom: float = 1.1) -> float:
    """Smallest uniform lambda_a satisfying the field-nonlinearity condition.

    When no costate norms are given, a guess-field backward pass supplies
    them (averaged onto the field midpoints).  sigma is sampled from the
    problem's fixed bar values; for "off" (and the first analytic/numeric
    iteration) it is zero.
    """
    grid = problem.grid
    if chi_norm_sums is None:
        forward = propagate_forward(problem.initial, problem.guess_field,
                                    grid, problem.hamiltonian,
                                    hbar=problem.hbar)
        terminal = problem.functional.costate_boundary(forward.final(),
                                                       problem.targets)
        chis, _ = backward_costates(terminal, forward, problem.guess_field,
                                    grid, problem.hamiltonian, problem.cost,
                                    hbar=problem.hbar)
        per_point = np.linalg.norm(chis.data, axis=2).sum(axis=1)
        chi_norm_sums = 0.5 * (per_point[:-1] + per_point[1:])
    if problem.sigma.mode == "fixed":
        sigma_values = sigma_from_bars(grid.midpoints, problem.sigma.a_bar,
                                       problem.sigma.b_bar,
                                       problem.sigma.c_bar, grid.total_time)
    else:
        sigma_values = np.zeros(grid.n_steps)
    _, minimal = check_field_nonlinearity_bound(
        problem.guess_field.lambda_a, problem.guess_field.shape, sigma_values,
        chi_norm_sums, problem.hamiltonian, problem.n_states,
        headroom=headroom,
    )
    return minimal
