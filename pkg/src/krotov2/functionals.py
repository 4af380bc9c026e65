"""Final-time functionals, their costate boundary conditions, and the
time-integrated running costs.

All shipped functionals are built on the subspace-averaged overlap

    tau = sum_k <target_k | phi_k(T)>,

with target_k the desired image of the k-th initial basis state.  The
costate boundary realizes minus the gradient of the functional with respect
to the bra states; every costate here is validated against central finite
differences in the test suite.
"""
from __future__ import annotations

import numpy as np

from .errors import FieldError, FunctionalError
from .fields import ControlField
from .grids import TimeGrid
from .hamiltonians import RunningCost
from .operators import as_matrix
from .states import StateSet, Trajectory


def state_overlap_sum(states_T: StateSet, targets: StateSet) -> complex:
    """tau = sum_k <target_k|phi_k(T)>."""
    if states_T.n_states != targets.n_states or states_T.dim != targets.dim:
        raise FunctionalError(
            f"target subspace (N={targets.n_states}, M={targets.dim}) does not "
            f"match states (N={states_T.n_states}, M={states_T.dim})"
        )
    return complex(np.sum(targets.states.conj() * states_T.states))


def targets_from_operator(operator, basis: StateSet) -> StateSet:
    """Target states O|k> for the given initial basis."""
    mat = as_matrix(operator)
    return StateSet(basis.states @ mat.T)


class FinalTimeFunctional:
    """Scalar objective on the final states plus its costate boundary."""

    name = "abstract"

    def __init__(self, lambda0: float = 1.0):
        if lambda0 <= 0.0:
            raise FunctionalError(f"lambda0 must be positive, got {lambda0!r}")
        self.lambda0 = float(lambda0)

    def value(self, states_T: StateSet, targets: StateSet) -> float:
        raise NotImplementedError

    def costate_boundary(self, states_T: StateSet, targets: StateSet) -> StateSet:
        raise NotImplementedError

    def curvature_bound(self, targets: StateSet) -> float:
        """Supremum of second-order mixed derivatives over reachable changes.

        Non-negative by convention; 0 marks functionals whose second-order
        remainder never increases the objective.
        """
        raise NotImplementedError


class SquareModulusFunctional(FinalTimeFunctional):
    """-(lambda0/N^2) |tau|^2: phase-insensitive gate/state overlap."""

    name = "sm"

    def value(self, states_T, targets):
        n = targets.n_states
        tau = state_overlap_sum(states_T, targets)
        return -self.lambda0 / n**2 * abs(tau) ** 2

    def costate_boundary(self, states_T, targets):
        n = targets.n_states
        tau = state_overlap_sum(states_T, targets)
        return StateSet((self.lambda0 / n**2) * tau * targets.states)

    def curvature_bound(self, targets):
        # concave in the states: the quadratic remainder is never positive
        return 0.0


class RealPartFunctional(FinalTimeFunctional):
    """-(lambda0/N) Re tau: phase-sensitive variant, linear in the states."""

    name = "re"

    def value(self, states_T, targets):
        n = targets.n_states
        tau = state_overlap_sum(states_T, targets)
        return -self.lambda0 / n * tau.real

    def costate_boundary(self, states_T, targets):
        n = targets.n_states
        return StateSet((self.lambda0 / (2.0 * n)) * targets.states)

    def curvature_bound(self, targets):
        return 0.0


class PowerFunctional(FinalTimeFunctional):
    """-lambda0 (|tau|^2/N^2)^p: polynomial of degree 4p in the states.

    Stand-in for objectives of higher than quadratic order; p = 1 reduces to
    the square-modulus functional, p = 2 is an eighth-degree polynomial.
    The curvature bound is estimated by randomized second-order finite
    differences over the reachable ball (max over samples, times a 1.5
    safety factor); an explicit override is accepted.
    """

    name = "power"

    def __init__(self, lambda0: float = 1.0, p: int = 2, *,
                 curvature_samples: int = 2000, curvature_seed: int = 2024,
                 curvature_safety: float = 1.5, curvature_override=None):
        super().__init__(lambda0)
        if int(p) < 1:
            raise FunctionalError(f"power exponent p must be >= 1, got {p!r}")
        self.p = int(p)
        self.curvature_samples = int(curvature_samples)
        self.curvature_seed = int(curvature_seed)
        self.curvature_safety = float(curvature_safety)
        self.curvature_override = curvature_override
        self._curvature_cache: float | None = None

    def value(self, states_T, targets):
        n = targets.n_states
        tau = state_overlap_sum(states_T, targets)
        return -self.lambda0 * (abs(tau) ** 2 / n**2) ** self.p

    def costate_boundary(self, states_T, targets):
        n = targets.n_states
        tau = state_overlap_sum(states_T, targets)
        u = abs(tau) ** 2 / n**2
        factor = self.lambda0 * self.p / n**2 * u ** (self.p - 1)
        return StateSet(factor * tau * targets.states)

    def curvature_bound(self, targets):
        if self.curvature_override is not None:
            return float(self.curvature_override)
        if self.p == 1:
            return 0.0
        if self._curvature_cache is None:
            self._curvature_cache = sample_curvature_bound(
                self.value, targets, n_samples=self.curvature_samples,
                seed=self.curvature_seed, safety=self.curvature_safety,
            )
        return self._curvature_cache


def _random_normalized_set(rng, n, dim):
    states = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    states /= np.linalg.norm(states, axis=1)[:, None]
    return states


def _mixed_second_difference(value_of, base, i, j, h):
    """Finite-difference mixed partial d^2/dx_i dx_j on flattened real coords."""
    def shifted(deltas):
        arr = base.copy()
        flat = arr.view(np.float64).reshape(-1)
        for coord, delta in deltas:
            flat[coord] += delta
        return arr

    if i == j:
        return (value_of(shifted([(i, h)])) - 2.0 * value_of(base)
                + value_of(shifted([(i, -h)]))) / h**2
    return (value_of(shifted([(i, h), (j, h)])) - value_of(shifted([(i, h)]))
            - value_of(shifted([(j, h)])) + value_of(base)) / h**2


def sample_curvature_bound(value_fn, targets: StateSet, *, n_samples: int,
                           seed: int, safety: float, step: float = 1e-3) -> float:
    """Randomized supremum estimate of mixed second derivatives.

    Base points are drawn on segments between admissible (normalized) state
    sets, so they stay inside the reachable ball; coordinate pairs are drawn
    with extra weight on components that contribute to the overlap, plus a
    deterministic probe at phase-rotated targets where the extremes of the
    shipped polynomials sit.
    """
    rng = np.random.default_rng(seed)
    n, dim = targets.n_states, targets.dim
    n_coords = 2 * n * dim

    def value_of(states_arr):
        return value_fn(StateSet(states_arr), targets)

    # real-coordinate indices (both quadratures) of complex components that
    # contribute to the overlap
    magnitudes = np.abs(targets.states.reshape(-1))
    populated = np.flatnonzero(magnitudes > 1e-12)
    supported = np.sort(np.concatenate([2 * populated, 2 * populated + 1]))
    if supported.size == 0:
        supported = np.arange(n_coords)

    best = 0.0

    def probe(base, i, j):
        nonlocal best
        d2 = _mixed_second_difference(value_of, base, int(i), int(j), step)
        if d2 > best:
            best = d2

    # deterministic probes: phase-rotated targets, all supported pairs
    # (capped), where mixed curvature of the overlap polynomials is extremal
    cap = min(supported.size, 12)
    for phase in (1.0, 1j, np.exp(0.75j * np.pi), np.exp(-0.25j * np.pi)):
        base = (phase * targets.states).astype(complex)
        for a in range(cap):
            for b in range(a, cap):
                probe(base, supported[a], supported[b])

    for _ in range(n_samples):
        lo = _random_normalized_set(rng, n, dim)
        hi = _random_normalized_set(rng, n, dim)
        frac = rng.uniform()
        base = (1.0 - frac) * lo + frac * hi
        if rng.uniform() < 0.75:
            i = supported[rng.integers(supported.size)]
            j = supported[rng.integers(supported.size)]
        else:
            i = rng.integers(n_coords)
            j = rng.integers(n_coords)
        probe(base, i, j)

    return max(0.0, safety * best)


def g_a_integral(field: ControlField, grid: TimeGrid) -> float:
    """Midpoint-rule integral of lambda_a/S(t) (eps - eps_ref)^2."""
    if field.n_samples != grid.n_steps:
        raise FieldError("field and grid sizes differ")
    delta = field.values - field.reference
    total = 0.0
    for j in range(grid.n_steps):
        if field.shape[j] == 0.0:
            if delta[j] != 0.0:
                raise FieldError(
                    f"S(t) = 0 with eps != eps_ref at time index {j}"
                )
            continue
        total += field.lambda_a / field.shape[j] * delta[j] ** 2
    return total * grid.dt


def g_b_integral(forward: Trajectory, cost: RunningCost) -> float:
    """Trapezoid integral of the state-dependent running cost."""
    if cost.is_zero():
        return 0.0
    grid = forward.grid
    densities = np.array([
        cost.density(forward[j], grid.points[j])
        for j in range(grid.n_steps + 1)
    ])
    return float(np.trapezoid(densities, dx=grid.dt))


FUNCTIONALS = {
    "sm": SquareModulusFunctional,
    "re": RealPartFunctional,
    "power": PowerFunctional,
}
