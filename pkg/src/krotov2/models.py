"""Ready-made problems exercising every algorithm path.

* two-level system: linear dynamics, state transfer or Hadamard gate
* three-level chain: state-dependent cost on an allowed/forbidden subspace
* spin-spin pair: control enters quadratically (field-nonlinear path)
* Fourier-grid vibrational model: kinetic operator diagonal in momentum
  space, chain-coupled electronic surfaces, user-supplied potentials
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import Krotov2Error
from .fields import build_guess_field
from .functionals import FinalTimeFunctional, SquareModulusFunctional
from .grids import TimeGrid
from .hamiltonians import Hamiltonian, LinearFieldHamiltonian, RunningCost
from .operators import DenseOperator, PAULIS, SIGMA_X, SIGMA_Z, projector
from .problem import ProblemSpec
from .second_order import SigmaParams
from .states import StateSet, orthonormal_basis

#: symmetric coupling tensor used by the shipped spin-spin demonstrations;
#: the physical tensor depends on molecular parameters outside this package
DEFAULT_SPIN_TENSOR = np.diag([0.0, 1.0, 0.5, 0.25])


def hadamard_matrix() -> np.ndarray:
    return np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


def b_gate_matrix() -> DenseOperator:
    """Two-qubit B gate in the logical basis."""
    c = np.cos(np.pi / 8.0)
    s = np.sin(np.pi / 8.0)
    mat = np.array(
        [
            [c, 0.0, 0.0, 1j * s],
            [0.0, s, 1j * c, 0.0],
            [0.0, 1j * c, s, 0.0],
            [1j * s, 0.0, 0.0, c],
        ],
        dtype=complex,
    )
    return DenseOperator(matrix=mat, hermitian=False)


def _default(value, fallback):
    return fallback if value is None else value


def make_tls(omega: float = 2.0, drive=None, *, target: str = "flip",
             grid: Optional[TimeGrid] = None, eps0: float = 0.3,
             guess_omega: Optional[float] = None, lambda_a: float = 1.0,
             functional: Optional[FinalTimeFunctional] = None,
             sigma: Optional[SigmaParams] = None, hbar: float = 1.0,
             name: str = "tls") -> ProblemSpec:
    """Driven two-level system H = (omega/2) sigma_z + eps(t) * drive.

    ``target`` selects a ground-to-excited transfer ("flip", N=1) or a
    Hadamard gate on the two levels ("hadamard", N=2).
    """
    drive_mat = SIGMA_X if drive is None else np.asarray(drive, dtype=complex)
    h0 = 0.5 * omega * SIGMA_Z
    ham = LinearFieldHamiltonian(h0, drive_mat)
    grid = _default(grid, TimeGrid(n_steps=200, total_time=10.0))
    guess = build_guess_field(grid, eps0, _default(guess_omega, omega),
                              lambda_a=lambda_a)
    if target == "flip":
        initial = orthonormal_basis(2, [0])
        targets = orthonormal_basis(2, [1])
    elif target == "hadamard":
        initial = orthonormal_basis(2, [0, 1])
        targets = StateSet(initial.states @ hadamard_matrix().T)
    else:
        raise Krotov2Error(f"unknown TLS target {target!r}")
    return ProblemSpec(
        name=f"{name}-{target}", hamiltonian=ham, initial=initial,
        targets=targets, grid=grid, guess_field=guess,
        functional=_default(functional, SquareModulusFunctional()),
        sigma=_default(sigma, SigmaParams()),
    )


def make_lambda(lambda_b: float, sign_choice: str = "forbid", *,
                levels: int = 3, forbidden_index: int = 2,
                energies: Sequence[float] = (0.0, 1.0, 2.35),
                grid: Optional[TimeGrid] = None, eps0: float = 0.2,
                guess_omega: Optional[float] = None, lambda_a: float = 1.0,
                functional: Optional[FinalTimeFunctional] = None,
                sigma: Optional[SigmaParams] = None,
                name: str = "lambda") -> ProblemSpec:
    """Chain-coupled three-level system with a state-dependent cost.

    ``sign_choice`` picks the cost operator: "allow" rewards population in
    the two working levels (lambda_b <= 0), "forbid" penalizes population of
    the spectator level (lambda_b >= 0).  The forbidden variant needs the
    second-order construction; the allowed variant does not.  lambda_b = 0
    reduces to a plain state-to-state problem.
    """
    if levels != 3:
        raise Krotov2Error("the chain model ships with exactly 3 levels")
    if sign_choice not in ("allow", "forbid"):
        raise Krotov2Error(f"sign_choice must be 'allow' or 'forbid', got {sign_choice!r}")
    if sign_choice == "forbid" and lambda_b < 0.0:
        raise Krotov2Error("the forbidden-subspace cost requires lambda_b >= 0")
    if sign_choice == "allow" and lambda_b > 0.0:
        raise Krotov2Error("the allowed-subspace cost requires lambda_b <= 0")
    energies = np.asarray(energies, dtype=float)
    if energies.shape != (levels,):
        raise Krotov2Error(f"need {levels} level energies, got {energies.shape}")

    h0 = np.diag(energies).astype(complex)
    mu = np.zeros((levels, levels), dtype=complex)
    for i in range(levels - 1):
        mu[i, i + 1] = mu[i + 1, i] = 1.0
    ham = LinearFieldHamiltonian(h0, mu)

    grid = _default(grid, TimeGrid(n_steps=200, total_time=2.0))
    omega_01 = energies[1] - energies[0]
    guess = build_guess_field(grid, eps0, _default(guess_omega, omega_01),
                              lambda_a=lambda_a)
    initial = orthonormal_basis(levels, [0])
    targets = orthonormal_basis(levels, [1])

    if lambda_b == 0.0:
        cost = RunningCost.zero(total_time=grid.total_time, n_states=1)
    else:
        allowed = [i for i in range(levels) if i != forbidden_index]
        op = (projector(levels, allowed) if sign_choice == "allow"
              else projector(levels, [forbidden_index]))
        cost = RunningCost(lambda_b=lambda_b, operator=op,
                           total_time=grid.total_time, n_states=1)
    return ProblemSpec(
        name=f"{name}-{sign_choice}", hamiltonian=ham, initial=initial,
        targets=targets, grid=grid, guess_field=guess, cost=cost,
        functional=_default(functional, SquareModulusFunctional()),
        sigma=_default(sigma, SigmaParams()),
    )


class SpinSpinHamiltonian(Hamiltonian):
    """Effective two-qubit coupling: H(W) = hbar W^2 / 8 * sum a_ij s_i x s_j.

    The control enters quadratically, so the second field derivative is the
    constant operator hbar/4 * K with K the coupling kernel, and the
    field-curvature bound is its spectral radius.
    """

    def __init__(self, tensor=None, hbar: float = 1.0):
        tensor = np.asarray(
            DEFAULT_SPIN_TENSOR if tensor is None else tensor, dtype=float)
        if tensor.shape != (4, 4):
            raise Krotov2Error(f"coupling tensor must be 4x4, got {tensor.shape}")
        if not np.allclose(tensor, tensor.T, atol=1e-12):
            raise Krotov2Error("coupling tensor must be symmetric")
        kernel = np.zeros((4, 4), dtype=complex)
        for i in range(4):
            for j in range(4):
                if tensor[i, j] != 0.0:
                    kernel += tensor[i, j] * np.kron(PAULIS[i], PAULIS[j])
        self.tensor = tensor
        self.kernel = kernel
        self.hbar_value = float(hbar)
        kernel_norm = float(np.max(np.abs(np.linalg.eigvalsh(kernel))))
        super().__init__(
            4, hermitian=True, linear_in_field=False, linear_in_state=True,
            second_field_derivative_bound=self.hbar_value / 4.0 * kernel_norm,
        )

    def matrix(self, eps, t, state=None):
        return (self.hbar_value * eps**2 / 8.0) * self.kernel

    def field_derivative_apply(self, states, eps, t):
        states = np.asarray(states)
        factor = self.hbar_value * eps / 4.0
        if states.ndim == 1:
            return factor * (self.kernel @ states)
        return factor * (states @ self.kernel.T)

    def second_field_derivative_matrix(self):
        return self.hbar_value / 4.0 * self.kernel


def make_spin_spin(tensor=None, hbar: float = 1.0, *, target: str = "state",
                   theta: float = 0.3, grid: Optional[TimeGrid] = None,
                   eps0: float = 1.0, guess_omega: float = 0.0,
                   lambda_a: float = 1.0,
                   functional: Optional[FinalTimeFunctional] = None,
                   sigma: Optional[SigmaParams] = None,
                   name: str = "spin-spin") -> ProblemSpec:
    """Two-qubit problem whose control (a Rabi frequency) enters squared.

    ``target="state"`` transfers |00> to exp(-i theta K)|00>, which is
    reachable because the generated evolution is exp(-i Theta K) with
    Theta the integrated squared control; ``target="b_gate"`` optimizes
    toward the B gate on the full two-qubit basis.
    """
    ham = SpinSpinHamiltonian(tensor=tensor, hbar=hbar)
    grid = _default(grid, TimeGrid(n_steps=100, total_time=4.0))
    guess = build_guess_field(grid, eps0, guess_omega, lambda_a=lambda_a)
    if target == "state":
        initial = orthonormal_basis(4, [0])
        evolved = scipy.linalg.expm(-1j * theta * ham.kernel) @ initial.states[0]
        targets = StateSet(evolved)
    elif target == "b_gate":
        initial = orthonormal_basis(4, [0, 1, 2, 3])
        targets = StateSet(initial.states @ b_gate_matrix().matrix.T)
    else:
        raise Krotov2Error(f"unknown spin-spin target {target!r}")
    return ProblemSpec(
        name=f"{name}-{target}", hamiltonian=ham, initial=initial,
        targets=targets, grid=grid, guess_field=guess,
        functional=_default(functional, SquareModulusFunctional()),
        sigma=_default(sigma, SigmaParams()), hbar=hbar,
    )


def kinetic_matrix(n_r: int, dr: float, mass: float, hbar: float = 1.0
                   ) -> np.ndarray:
    """Fourier-grid kinetic operator, diagonal in momentum space."""
    k = 2.0 * np.pi * np.fft.fftfreq(n_r, d=dr)
    kinetic_diag = (hbar**2) * k**2 / (2.0 * mass)
    mat = np.fft.ifft(kinetic_diag[:, None] * np.fft.fft(np.eye(n_r), axis=0),
                      axis=0)
    return 0.5 * (mat + mat.conj().T)


def harmonic_potential(omega: float, r0: float, mass: float):
    """V(R) = m omega^2 (R - r0)^2 / 2 as a callable for the grid builder."""
    def _v(r):
        return 0.5 * mass * omega**2 * (np.asarray(r) - r0) ** 2

    return _v


def make_fourier_grid(potentials, n_r: int, r_min: float, r_max: float,
                      mass: float, mu: float, *, hbar: float = 1.0,
                      initial_level: int = 1, target_level: int = 0,
                      target: str = "state", grid: Optional[TimeGrid] = None,
                      eps0: float = 0.1, guess_omega: Optional[float] = None,
                      lambda_a: float = 1.0,
                      functional: Optional[FinalTimeFunctional] = None,
                      sigma: Optional[SigmaParams] = None,
                      name: str = "fourier-grid") -> ProblemSpec:
    """Vibrational dynamics on chain-coupled electronic surfaces.

    ``potentials`` is a sequence (one per surface) of either callables V(R)
    or arrays of N_R samples on the position grid.  The dipole coupling
    mu * eps(t) connects neighbouring surfaces; initial and target states
    are vibrational eigenstates of the first surface (or, for
    ``target="hadamard"``, the gate on its lowest two).
    """
    if n_r < 2 or (n_r & (n_r - 1)) != 0:
        raise Krotov2Error(f"N_R must be a power of two, got {n_r}")
    n_surfaces = len(potentials)
    if not 1 <= n_surfaces <= 3:
        raise Krotov2Error("between 1 and 3 surfaces are supported")
    r = np.linspace(r_min, r_max, n_r, endpoint=False)
    dr = r[1] - r[0]
    kin = kinetic_matrix(n_r, dr, mass, hbar=hbar)

    blocks = []
    for pot in potentials:
        v = pot(r) if callable(pot) else np.asarray(pot, dtype=float)
        if v.shape != (n_r,):
            raise Krotov2Error(
                f"potential samples must have length {n_r}, got {v.shape}")
        blocks.append(kin + np.diag(v))
    dim = n_surfaces * n_r
    h0 = np.zeros((dim, dim), dtype=complex)
    for i, block in enumerate(blocks):
        h0[i * n_r:(i + 1) * n_r, i * n_r:(i + 1) * n_r] = block
    coupling = np.zeros((dim, dim), dtype=complex)
    eye = np.eye(n_r)
    for i in range(n_surfaces - 1):
        coupling[i * n_r:(i + 1) * n_r, (i + 1) * n_r:(i + 2) * n_r] = mu * eye
        coupling[(i + 1) * n_r:(i + 2) * n_r, i * n_r:(i + 1) * n_r] = mu * eye
    ham = LinearFieldHamiltonian(h0, coupling)

    energies, vectors = np.linalg.eigh(blocks[0])

    def _embed(level):
        vec = np.zeros(dim, dtype=complex)
        vec[:n_r] = vectors[:, level]
        return vec

    if target == "state":
        initial = StateSet(_embed(initial_level))
        targets = StateSet(_embed(target_level))
    elif target == "hadamard":
        basis = np.vstack([_embed(0), _embed(1)])
        initial = StateSet(basis)
        targets = StateSet(hadamard_matrix() @ basis)
    else:
        raise Krotov2Error(f"unknown fourier-grid target {target!r}")

    grid = _default(grid, TimeGrid(n_steps=400, total_time=10.0))
    gap = energies[1] - energies[0]
    guess = build_guess_field(grid, eps0, _default(guess_omega, gap),
                              lambda_a=lambda_a)
    problem = ProblemSpec(
        name=f"{name}-{target}", hamiltonian=ham, initial=initial,
        targets=targets, grid=grid, guess_field=guess,
        functional=_default(functional, SquareModulusFunctional()),
        sigma=_default(sigma, SigmaParams()), hbar=hbar,
    )
    problem.surface_energies = energies
    return problem
