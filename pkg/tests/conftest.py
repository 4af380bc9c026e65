"""Shared helpers: random problem data and independent numerical oracles."""
import numpy as np
import pytest

from krotov2 import StateSet


def random_state_set(rng, n_states, dim, normalized=True):
    states = rng.standard_normal((n_states, dim)) + 1j * rng.standard_normal(
        (n_states, dim))
    if normalized:
        states /= np.linalg.norm(states, axis=1)[:, None]
    return StateSet(states)


def random_orthonormal_set(rng, n_states, dim):
    mat = rng.standard_normal((dim, n_states)) + 1j * rng.standard_normal(
        (dim, n_states))
    q, _ = np.linalg.qr(mat)
    return StateSet(q.T[:n_states])


def random_hermitian(rng, dim, scale=1.0):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (a + a.conj().T)


def fd_costate(value_fn, states: StateSet, targets: StateSet, h=1e-5):
    """Central finite-difference costate boundary: -grad_<phi| of the value.

    Wirtinger convention: the gradient with respect to the bra coordinates is
    (dJ/dx + i dJ/dy) / 2 per complex amplitude.
    """
    base = states.states
    grad = np.zeros_like(base)
    for k in range(base.shape[0]):
        for m in range(base.shape[1]):
            for part, unit in ((0, 1.0), (1, 1.0j)):
                plus = base.copy()
                plus[k, m] += h * unit
                minus = base.copy()
                minus[k, m] -= h * unit
                deriv = (value_fn(StateSet(plus), targets)
                         - value_fn(StateSet(minus), targets)) / (2.0 * h)
                if part == 0:
                    grad[k, m] += deriv / 2.0
                else:
                    grad[k, m] += 1j * deriv / 2.0
    return StateSet(-grad)


def costate_matches_fd(functional, states, targets, rel_tol=1e-6):
    analytic = functional.costate_boundary(states, targets).states
    numeric = fd_costate(functional.value, states, targets).states
    scale = max(np.max(np.abs(analytic)), 1e-12)
    return np.max(np.abs(analytic - numeric)) / scale < rel_tol


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
