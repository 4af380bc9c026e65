"""Monotonically convergent quantum optimal control.

Library core: time grids, control fields, state sets, a Chebyshev step
propagator with inhomogeneous support, final-time functionals with costate
boundaries, and the first-/second-order iterative field update with analytic
or history-based estimation of the second-order parameters.  A FastAPI
service and a thin-client CLI wrap the core for batch runs.
"""

from .engine import (
    IterateOptions,
    IterationEntry,
    OptimizationRecord,
    iterate,
    j_norm,
    minimal_lambda_a,
    update_field_step,
)
from .errors import (
    BoundUnavailableError,
    ChebyshevConvergenceError,
    ConfigError,
    DivergenceError,
    FieldError,
    FunctionalError,
    GridError,
    Krotov2Error,
    OperatorError,
    PropagationError,
    StateError,
)
from .fields import ControlField, build_guess_field, sin2_envelope
from .functionals import (
    FUNCTIONALS,
    FinalTimeFunctional,
    PowerFunctional,
    RealPartFunctional,
    SquareModulusFunctional,
    g_a_integral,
    g_b_integral,
    state_overlap_sum,
    targets_from_operator,
)
from .grids import TimeGrid
from .hamiltonians import Hamiltonian, LinearFieldHamiltonian, RunningCost
from .models import (
    DEFAULT_SPIN_TENSOR,
    SpinSpinHamiltonian,
    b_gate_matrix,
    hadamard_matrix,
    harmonic_potential,
    kinetic_matrix,
    make_fourier_grid,
    make_lambda,
    make_spin_spin,
    make_tls,
)
from .operators import DenseOperator, extreme_eigenvalues, projector
from .problem import ProblemSpec
from .propagation import (
    backward_costates,
    propagate_costate_backward,
    propagate_forward,
    step_propagator,
)
from .second_order import (
    IterationState,
    SigmaParams,
    bar_params,
    check_field_nonlinearity_bound,
    estimate_analytic,
    estimate_numeric,
    history_bar_params,
    sigma_eval,
    sigma_from_bars,
)
from .states import StateSet, Trajectory, orthonormal_basis

__version__ = "0.1.0"
