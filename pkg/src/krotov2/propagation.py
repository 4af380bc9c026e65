"""Time propagation of states and costates.

Each step applies the exact solution of d|phi>/dt = -(i/hbar) H |phi> + |s>
with H and |s> held constant over the interval:

    phi(t0 + dt) = f0(H) phi(t0) + f1(H) s,
    f0(x) = exp(-i x dt / hbar),   f1(x) = dt * phi1(-i x dt / hbar),

with phi1(z) = (e^z - 1)/z.  For Hermitian H both matrix functions are
evaluated by a Chebyshev expansion over the Gershgorin enclosure of the
spectrum; non-Hermitian generators fall back to a dense scaling-and-squaring
exponential of the augmented system.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import ChebyshevConvergenceError, GridError, PropagationError, StateError
from .fields import ControlField
from .grids import TimeGrid
from .hamiltonians import Hamiltonian, RunningCost
from .operators import DenseOperator, as_matrix
from .states import StateSet, Trajectory

DEFAULT_TOL = 1e-12
_TAIL = 4
_MAX_ORDER = 4096


def gershgorin_bounds(mat: np.ndarray) -> tuple[float, float]:
    """Real interval enclosing the spectrum of a Hermitian matrix."""
    diag = np.real(np.diag(mat))
    radii = np.sum(np.abs(mat), axis=1) - np.abs(np.diag(mat))
    return float(np.min(diag - radii)), float(np.max(diag + radii))


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z, entire; series branch avoids cancellation near 0."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-3
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs**2 / 6.0 + zs**3 / 24.0
    zb = z[~small]
    out[~small] = np.expm1(zb.real) * np.exp(1j * zb.imag) / zb + (
        np.exp(1j * zb.imag) - 1.0
    ) / zb
    return out


def _chebyshev_coefficients(fn, order: int) -> np.ndarray:
    """Chebyshev interpolation coefficients of fn on [-1, 1]."""
    theta = np.pi * (np.arange(order) + 0.5) / order
    fx = fn(np.cos(theta))
    coeff = (2.0 / order) * (np.cos(np.outer(np.arange(order), theta)) @ fx)
    coeff[0] *= 0.5
    return coeff


def _converged_coefficients(fns, bandwidth: float, tol: float):
    """Coefficient sets for all fns at a common, tail-converged order."""
    order = max(8, int(1.15 * bandwidth) + 8)
    while order <= _MAX_ORDER:
        coeff_sets = [_chebyshev_coefficients(fn, order) for fn in fns]
        scale = max(np.max(np.abs(c)) for c in coeff_sets)
        tail = max(np.max(np.abs(c[-_TAIL:])) for c in coeff_sets)
        if scale == 0.0 or tail <= tol * scale:
            return coeff_sets
        order *= 2
    raise ChebyshevConvergenceError(
        f"Chebyshev expansion did not converge below {tol:g} at order {_MAX_ORDER} "
        f"(bandwidth {bandwidth:.3g})"
    )


def _run_recurrence(mat, center, radius, coeff_sets, blocks):
    """Accumulate sum_k c_k T_k(Y) @ block for each (coeffs, block) pair.

    Y = (mat - center)/radius must have spectrum in [-1, 1]; all coefficient
    sets share one three-term recurrence over the blocks.
    """
    order = max(len(c) for c in coeff_sets)
    inv_r = 1.0 / radius
    t_prev = list(blocks)
    t_cur = [(mat @ blk - center * blk) * inv_r for blk in t_prev]
    acc = [c[0] * p + c[1] * q for c, p, q in zip(coeff_sets, t_prev, t_cur)]
    for k in range(2, order):
        t_next = [
            2.0 * (mat @ q - center * q) * inv_r - p
            for p, q in zip(t_prev, t_cur)
        ]
        for a, c, nxt in zip(acc, coeff_sets, t_next):
            if k < len(c):
                a += c[k] * nxt
        t_prev, t_cur = t_cur, t_next
    return acc


@lru_cache(maxsize=512)
def _step_coefficients(lo: float, hi: float, dt: float, hbar: float,
                       tol: float, with_source: bool):
    """Chebyshev coefficients of the step functions on [lo, hi] (cached)."""
    center = 0.5 * (hi + lo)
    radius = 0.5 * (hi - lo)
    scale = dt / hbar

    def f_exp(y):
        return np.exp(-1j * scale * (center + radius * y))

    def f_src(y):
        return dt * _phi1(-1j * scale * (center + radius * y))

    fns = (f_exp, f_src) if with_source else (f_exp,)
    coeff_sets = _converged_coefficients(fns, radius * abs(scale), tol)
    for c in coeff_sets:
        c.setflags(write=False)
    return tuple(coeff_sets)


def _dense_step(mat, dt, block, sources, hbar):
    """Augmented scaling-and-squaring step for arbitrary (non-Hermitian) H."""
    gen = (-1j * dt / hbar) * mat
    if sources is None:
        return scipy.linalg.expm(gen) @ block
    dim, n_rhs = block.shape
    aug = np.zeros((dim + n_rhs, dim + n_rhs), dtype=complex)
    aug[:dim, :dim] = gen
    aug[:dim, dim:] = dt * sources
    stacked = np.vstack([block, np.eye(n_rhs, dtype=complex)])
    return (scipy.linalg.expm(aug) @ stacked)[:dim]


def _scalar_step(value, dt, block, sources, hbar):
    """Exact step for a generator that is a multiple of the identity."""
    out = np.exp(-1j * value * dt / hbar) * block
    if sources is not None:
        out = out + dt * _phi1(np.array([-1j * value * dt / hbar]))[0] * sources
    return out


class PassStepper:
    """Constant-dt stepper that reuses Chebyshev coefficients across steps.

    The coefficient sets are built for a spectral hull that grows to cover
    every interval seen during the pass; nearby field values then share one
    expansion, which dominates the per-step cost for small systems.
    """

    def __init__(self, dt: float, hbar: float = 1.0, tol: float = DEFAULT_TOL):
        self.dt = float(dt)
        self.hbar = float(hbar)
        self.tol = float(tol)
        self._hull = None

    def step(self, mat, hermitian, block, sources=None):
        if not hermitian:
            return _dense_step(mat, self.dt, block, sources, self.hbar)
        lo, hi = gershgorin_bounds(mat)
        scale = max(1.0, abs(lo), abs(hi))
        if hi - lo <= 1e-14 * scale:
            return _scalar_step(0.5 * (lo + hi), self.dt, block, sources,
                                self.hbar)
        if self._hull is None or lo < self._hull[0] or hi > self._hull[1]:
            if self._hull is not None:
                lo, hi = min(lo, self._hull[0]), max(hi, self._hull[1])
            margin = 0.1 * (hi - lo)
            self._hull = (lo - margin, hi + margin)
        lo_h, hi_h = self._hull
        coeff_sets = _step_coefficients(lo_h, hi_h, self.dt, self.hbar,
                                        self.tol, sources is not None)
        center = 0.5 * (hi_h + lo_h)
        radius = 0.5 * (hi_h - lo_h)
        blocks = (block,) if sources is None else (block, sources)
        results = _run_recurrence(mat, center, radius, coeff_sets, blocks)
        return results[0] if sources is None else results[0] + results[1]


def _chebyshev_step(mat, dt, block, sources, hbar, tol):
    return PassStepper(dt, hbar, tol).step(mat, True, block, sources)


def step_block(mat, hermitian, dt, block, sources=None, hbar=1.0,
               tol=DEFAULT_TOL):
    """One constant-H step on an (M, n_rhs) column block; signed dt allowed."""
    if hermitian:
        return _chebyshev_step(mat, dt, block, sources, hbar, tol)
    return _dense_step(mat, dt, block, sources, hbar)


def step_propagator(op, dt: float, state: np.ndarray, source=None,
                    hbar: float = 1.0, tol: float = DEFAULT_TOL,
                    return_method: bool = False):
    """Propagate one state across one interval under a constant generator.

    Hermitian operators (per the DenseOperator flag, or detected for raw
    arrays) run through the Chebyshev expansion; anything else falls back to
    the dense exponential.  With ``return_method=True`` the result is a
    ``(state, method)`` pair reporting which path ran.
    """
    if dt == 0.0 or not np.isfinite(dt):
        raise PropagationError(f"dt must be finite and non-zero, got {dt!r}")
    if isinstance(op, DenseOperator):
        mat, hermitian = op.matrix, op.hermitian
    else:
        mat = as_matrix(op)
        hermitian = bool(np.max(np.abs(mat - mat.conj().T)) < 1e-12)
    column = np.asarray(state, dtype=complex).reshape(-1, 1)
    src = None if source is None else np.asarray(source, dtype=complex).reshape(-1, 1)
    method = "chebyshev" if hermitian else "expm"
    out = step_block(mat, hermitian, dt, column, src, hbar=hbar, tol=tol)[:, 0]
    if return_method:
        return out, method
    return out


def _check_problem_shapes(initial: StateSet, field: ControlField,
                          grid: TimeGrid, hamiltonian: Hamiltonian):
    if initial.dim != hamiltonian.dim:
        raise StateError(
            f"state dimension {initial.dim} does not match Hamiltonian "
            f"dimension {hamiltonian.dim}"
        )
    if field.n_samples != grid.n_steps:
        raise GridError(
            f"field has {field.n_samples} samples but grid has "
            f"{grid.n_steps} intervals"
        )


def propagate_forward(initial: StateSet, field: ControlField, grid: TimeGrid,
                      hamiltonian: Hamiltonian, hbar: float = 1.0,
                      tol: float = DEFAULT_TOL) -> Trajectory:
    """Propagate all basis states forward, storing every grid point."""
    _check_problem_shapes(initial, field, grid, hamiltonian)
    traj = Trajectory.empty(grid, initial.n_states, initial.dim)
    traj.data[0] = initial.states
    block = np.ascontiguousarray(initial.states.T)
    stepper = PassStepper(grid.dt, hbar=hbar, tol=tol)
    for j in range(grid.n_steps):
        eps = field.values[j]
        t_mid = grid.midpoints[j]
        try:
            if hamiltonian.linear_in_state:
                mat = hamiltonian.matrix(eps, t_mid)
                block = stepper.step(mat, hamiltonian.hermitian, block)
            else:
                cols = []
                for k in range(block.shape[1]):
                    mat = hamiltonian.matrix(eps, t_mid, state=block[:, k])
                    cols.append(stepper.step(mat, hamiltonian.hermitian,
                                             block[:, k:k + 1]))
                block = np.hstack(cols)
        except ChebyshevConvergenceError as exc:
            raise ChebyshevConvergenceError(
                f"forward step {j} (t = {grid.points[j]:.6g}): {exc}",
                step_index=j,
            ) from exc
        traj.data[j + 1] = block.T
    return traj


def _cost_sources(forward: Trajectory, cost) -> np.ndarray | None:
    """Running-cost source (lambda_b/(T N)) D(t)|phi_k(t)> at every grid
    point, shaped like the trajectory."""
    if cost.is_zero():
        return None
    grid = forward.grid
    if not callable(cost.operator):
        mat = cost.operator_matrix(0.0)
        return cost.weight * (forward.data @ mat.T)
    return np.stack([
        cost.gradient_source(forward[j], grid.points[j])
        for j in range(grid.n_steps + 1)
    ])


def _backward_source(cost_sources, forward, chi_block, hamiltonian,
                     field_value, j, t_hi, source_mode):
    """Constant source for the backward step across [t_j, t_{j+1}].

    Returns an (M, N) column block or None.  The running-cost part comes
    from the stored forward states; "midpoint" averages the two interval
    endpoints, "start" uses the later endpoint where the backward step
    begins.
    """
    source_rows = None
    if cost_sources is not None:
        if source_mode == "midpoint":
            source_rows = 0.5 * (cost_sources[j] + cost_sources[j + 1])
        else:
            source_rows = cost_sources[j + 1]
    if not hamiltonian.linear_in_state:
        extra = hamiltonian.state_coupling_source(
            chi_block.T, forward[j + 1], field_value, t_hi
        )
        if extra is not None:
            extra = np.asarray(extra)
            source_rows = extra if source_rows is None else source_rows + extra
    return None if source_rows is None else np.ascontiguousarray(source_rows.T)


def costate_rhs(chi_states, phi_states, hamiltonian, cost, eps, t, hbar=1.0):
    """Right-hand side of the backward equation at one grid point, per state.

    Used for the stored costate derivative; avoids finite differences of the
    trajectory.
    """
    mat = hamiltonian.matrix(eps, t)
    hdag = mat if hamiltonian.hermitian else mat.conj().T
    chi = np.atleast_2d(np.asarray(chi_states))
    rhs = (-1j / hbar) * (chi @ hdag.T)
    if not cost.is_zero():
        rhs = rhs + cost.gradient_source(phi_states, t)
    if not hamiltonian.linear_in_state:
        extra = hamiltonian.state_coupling_source(chi, phi_states, eps, t)
        if extra is not None:
            rhs = rhs + np.asarray(extra)
    return rhs


def backward_costates(terminal: StateSet, forward: Trajectory,
                      field: ControlField, grid: TimeGrid,
                      hamiltonian: Hamiltonian, cost: RunningCost,
                      hbar: float = 1.0, tol: float = DEFAULT_TOL,
                      with_derivative: bool = False,
                      source_mode: str = "midpoint"):
    """Propagate costates backward from t=T, storing every grid point.

    Returns ``(chis, chi_dots)`` where ``chi_dots`` is an (n+1, N, M) array
    of backward-equation right-hand sides, or None unless requested.
    """
    _check_problem_shapes(terminal, field, grid, hamiltonian)
    if not forward.grid.matches(grid):
        raise GridError("forward trajectory was computed on a different grid")
    if forward.dim != terminal.dim or forward.n_states != terminal.n_states:
        raise StateError("terminal states do not match the forward trajectory")
    if source_mode not in ("midpoint", "start"):
        raise ValueError(f"unknown source_mode {source_mode!r}")

    n = grid.n_steps
    chis = Trajectory.empty(grid, terminal.n_states, terminal.dim)
    chis.data[n] = terminal.states
    block = np.ascontiguousarray(terminal.states.T)
    stepper = PassStepper(-grid.dt, hbar=hbar, tol=tol)
    cost_sources = _cost_sources(forward, cost)
    for j in range(n - 1, -1, -1):
        eps = field.values[j]
        t_mid = grid.midpoints[j]
        mat = hamiltonian.matrix(eps, t_mid)
        hdag = mat if hamiltonian.hermitian else mat.conj().T
        sources = _backward_source(cost_sources, forward, block, hamiltonian,
                                   eps, j, grid.points[j + 1], source_mode)
        try:
            block = stepper.step(hdag, hamiltonian.hermitian, block, sources)
        except ChebyshevConvergenceError as exc:
            raise ChebyshevConvergenceError(
                f"backward step {j} (t = {grid.points[j]:.6g}): {exc}",
                step_index=j,
            ) from exc
        chis.data[j] = block.T

    chi_dots = None
    if with_derivative:
        chi_dots = np.empty_like(chis.data)
        for j in range(n + 1):
            eps = field.values[min(j, n - 1)]
            t_j = grid.points[j]
            mat = hamiltonian.matrix(eps, t_j)
            hdag = mat if hamiltonian.hermitian else mat.conj().T
            rhs = (-1j / hbar) * (chis[j] @ hdag.T)
            if cost_sources is not None:
                rhs = rhs + cost_sources[j]
            if not hamiltonian.linear_in_state:
                extra = hamiltonian.state_coupling_source(
                    chis[j], forward[j], eps, t_j)
                if extra is not None:
                    rhs = rhs + np.asarray(extra)
            chi_dots[j] = rhs
    return chis, chi_dots


def propagate_costate_backward(terminal: StateSet, forward: Trajectory,
                               field: ControlField, grid: TimeGrid,
                               hamiltonian: Hamiltonian, cost: RunningCost,
                               hbar: float = 1.0) -> Trajectory:
    """Backward costate trajectory (convenience wrapper)."""
    chis, _ = backward_costates(terminal, forward, field, grid, hamiltonian,
                                cost, hbar=hbar)
    return chis
