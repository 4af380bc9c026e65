"""State sets and stored trajectories.

Individual states are plain complex ndarrays of length M; a StateSet holds
the N states driven in parallel (one per basis vector of the optimization
subspace) as an (N, M) array.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StateError
from .grids import TimeGrid


@dataclass(frozen=True)
class StateSet:
    """N complex state vectors of dimension M, labelled k = 0 ... N-1."""

    states: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.states, dtype=complex)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise StateError(f"states must be an (N, M) array, got shape {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "states", arr)

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def total_norm_sq(self) -> float:
        return float(np.sum(np.abs(self.states) ** 2))

    def overlaps_with(self, other: "StateSet") -> np.ndarray:
        """Per-state overlaps <self_k|other_k>."""
        return np.sum(self.states.conj() * other.states, axis=1)

    def gram(self) -> np.ndarray:
        """Gram matrix <self_k|self_k'>."""
        return self.states.conj() @ self.states.T

    def is_orthonormal(self, tol: float = 1e-9) -> bool:
        gram = self.gram()
        return bool(np.max(np.abs(gram - np.eye(self.n_states))) < tol)


def orthonormal_basis(dim: int, indices) -> StateSet:
    """Canonical unit vectors at the given indices of an M-dim space."""
    indices = list(indices)
    if len(set(indices)) != len(indices):
        raise StateError(f"duplicate basis index in {indices}")
    states = np.zeros((len(indices), dim), dtype=complex)
    for row, idx in enumerate(indices):
        if not 0 <= idx < dim:
            raise StateError(f"basis index {idx} out of range for dimension {dim}")
        states[row, idx] = 1.0
    return StateSet(states)


@dataclass
class Trajectory:
    """State sets stored at every grid point; index 0 holds t=0.

    The array is written once per time index during propagation and treated
    as read-only afterwards.
    """

    grid: TimeGrid
    data: np.ndarray = field(repr=False)

    @classmethod
    def empty(cls, grid: TimeGrid, n_states: int, dim: int) -> "Trajectory":
        data = np.empty((grid.n_steps + 1, n_states, dim), dtype=complex)
        return cls(grid=grid, data=data)

    def __post_init__(self):
        if self.data.shape[0] != self.grid.n_steps + 1:
            raise StateError(
                f"trajectory length {self.data.shape[0]} does not match "
                f"grid with {self.grid.n_steps + 1} points"
            )

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, j: int) -> np.ndarray:
        return self.data[j]

    @property
    def n_states(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]

    def state_set(self, j: int) -> StateSet:
        return StateSet(self.data[j])

    def final(self) -> StateSet:
        return StateSet(self.data[-1])
