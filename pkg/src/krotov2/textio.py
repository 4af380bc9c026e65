"""Plain-text serialization.

Complex matrices and state sets use one row of whitespace-separated
"re im" pairs per matrix row / state.  Fields use two columns "t value",
with t the interval midpoints.
"""
from __future__ import annotations

import io

import numpy as np

from .errors import FieldError, OperatorError
from .fields import ControlField
from .grids import TimeGrid
from .operators import DenseOperator
from .states import StateSet

_FLOAT_FMT = "%.17g"


def _complex_rows_to_text(rows: np.ndarray) -> str:
    out = io.StringIO()
    for row in np.atleast_2d(rows):
        pairs = []
        for z in row:
            pairs.append(_FLOAT_FMT % z.real)
            pairs.append(_FLOAT_FMT % z.imag)
        out.write(" ".join(pairs) + "\n")
    return out.getvalue()


def _text_to_complex_rows(text: str) -> np.ndarray:
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        nums = [float(tok) for tok in line.split()]
        if len(nums) % 2 != 0:
            raise OperatorError("complex row must contain an even number of entries")
        nums = np.asarray(nums)
        rows.append(nums[0::2] + 1j * nums[1::2])
    if not rows:
        raise OperatorError("no data rows found")
    return np.asarray(rows)


def dump_operator(op: DenseOperator) -> str:
    return _complex_rows_to_text(op.matrix)


def save_operator(path, op: DenseOperator) -> None:
    with open(path, "w") as fh:
        fh.write(dump_operator(op))


def load_operator(path, hermitian=None) -> DenseOperator:
    with open(path) as fh:
        mat = _text_to_complex_rows(fh.read())
    if mat.shape[0] != mat.shape[1]:
        raise OperatorError(f"operator file is not square: shape {mat.shape}")
    return DenseOperator.from_matrix(mat, hermitian=hermitian)


def dump_states(states: StateSet) -> str:
    return _complex_rows_to_text(states.states)


def save_states(path, states: StateSet) -> None:
    with open(path, "w") as fh:
        fh.write(dump_states(states))


def load_states(path) -> StateSet:
    with open(path) as fh:
        return StateSet(_text_to_complex_rows(fh.read()))


def dump_field(field: ControlField, grid: TimeGrid) -> str:
    if field.n_samples != grid.n_steps:
        raise FieldError(
            f"field has {field.n_samples} samples but grid has {grid.n_steps} intervals"
        )
    lines = [
        (_FLOAT_FMT % t) + " " + (_FLOAT_FMT % v)
        for t, v in zip(grid.midpoints, field.values)
    ]
    return "\n".join(lines) + "\n"


def save_field(path, field: ControlField, grid: TimeGrid) -> None:
    with open(path, "w") as fh:
        fh.write(dump_field(field, grid))


def load_field_samples(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (times, values) from a two-column field file."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2:
        raise FieldError(f"field file must have two columns, got {data.shape[1]}")
    return data[:, 0], data[:, 1]
