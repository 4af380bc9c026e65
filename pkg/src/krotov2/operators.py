"""Dense complex operators and a few standard matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OperatorError

HERMITICITY_TOL = 1e-12

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
PAULIS = (IDENTITY_2, SIGMA_X, SIGMA_Y, SIGMA_Z)


@dataclass(frozen=True)
class DenseOperator:
    """M x M complex matrix with a declared hermiticity flag."""

    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise OperatorError(f"operator must be a square matrix, got shape {mat.shape}")
        if self.hermitian:
            dev = np.max(np.abs(mat - mat.conj().T))
            if dev >= HERMITICITY_TOL:
                raise OperatorError(
                    f"operator declared hermitian but max |H - H^dag| = {dev:.3e}"
                )
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, states: np.ndarray) -> np.ndarray:
        """Matrix action on a single state (M,) or a state block (N, M)."""
        states = np.asarray(states)
        if states.ndim == 1:
            return self.matrix @ states
        return states @ self.matrix.T

    @classmethod
    def from_matrix(cls, matrix, hermitian=None) -> "DenseOperator":
        mat = np.asarray(matrix, dtype=complex)
        if hermitian is None:
            hermitian = bool(np.max(np.abs(mat - mat.conj().T)) < HERMITICITY_TOL)
        return cls(matrix=mat, hermitian=hermitian)


def as_matrix(op) -> np.ndarray:
    """Accept DenseOperator or raw array wherever an ndarray is needed."""
    if isinstance(op, DenseOperator):
        return op.matrix
    return np.asarray(op, dtype=complex)


def projector(dim: int, indices) -> DenseOperator:
    """Projector onto the span of the given canonical basis indices."""
    mat = np.zeros((dim, dim), dtype=complex)
    for idx in indices:
        mat[idx, idx] = 1.0
    return DenseOperator(matrix=mat, hermitian=True)


def extreme_eigenvalues(matrix, n_iter: int = 200, tol: float = 1e-12,
                        seed: int = 7) -> tuple[float, float]:
    """(lambda_min, lambda_max) of a Hermitian matrix by power iteration.

    Power iteration on shifted copies of the matrix isolates the largest and
    smallest eigenvalues without a full decomposition.
    """
    mat = as_matrix(matrix)
    dim = mat.shape[0]
    rng = np.random.default_rng(seed)

    def _dominant(m):
        vec = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        vec /= np.linalg.norm(vec)
        value = 0.0
        for _ in range(n_iter):
            nxt = m @ vec
            nrm = np.linalg.norm(nxt)
            if nrm == 0.0:
                return 0.0
            nxt /= nrm
            new_value = float(np.real(nxt.conj() @ (m @ nxt)))
            if abs(new_value - value) < tol * (1.0 + abs(new_value)):
                return new_value
            value, vec = new_value, nxt
        return value

    radius = abs(_dominant(mat))
    if radius == 0.0:
        return 0.0, 0.0
    shift = radius * np.eye(dim)
    lam_max = _dominant(mat + shift) - radius
    lam_min = -(_dominant(-mat + shift) - radius)
    return lam_min, lam_max
