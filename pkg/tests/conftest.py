import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from cavclone.hilbert import BasisLayout, PureState
from cavclone.protocol import InputQubit, solve_phase_matching

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SEED = 1729


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def solver_params():
    return solve_phase_matching()


def random_pure(rng, layout, normalize=True):
    v = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    if normalize:
        v /= np.linalg.norm(v)
    return PureState(layout, v)


def random_qubit(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    return InputQubit(v[0], v[1])


def random_density(rng, dim, rank=None):
    rank = rank or dim
    m = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = m @ m.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


@st.composite
def qubits(draw):
    theta = draw(st.floats(0, math.pi))
    phi = draw(st.floats(0, 2 * math.pi))
    return InputQubit.from_bloch(theta, phi)


@st.composite
def states(draw, layout: BasisLayout):
    re = draw(st.lists(finite, min_size=layout.dim, max_size=layout.dim))
    im = draw(st.lists(finite, min_size=layout.dim, max_size=layout.dim))
    v = np.array(re) + 1j * np.array(im)
    n = np.linalg.norm(v)
    if n < 1e-3:
        v = np.zeros(layout.dim, complex)
        v[0] = 1.0
        n = 1.0
    return PureState(layout, v / n)


REFERENCE_QUBIT = InputQubit.from_bloch(math.pi / 2, 0.0)


@pytest.fixture(scope="session")
def scaling_20_40(solver_params):
    """Full-model rows at delta/g = 20 and 40 for the reference input (about 4 s)."""
    from cavclone.analysis import dispersive_scaling_study

    return dispersive_scaling_study([20.0, 40.0], solver_params, REFERENCE_QUBIT)


@pytest.fixture(scope="session")
def decoherence_grid(solver_params):
    """Master-equation study on kappa/lambda in {0, 0.01, 0.05, 0.1} at delta = 20 g (about 20 s)."""
    from cavclone.analysis import decoherence_study

    return decoherence_study([0.0, 0.01, 0.05, 0.1], [0.0], solver_params)


_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; printed again in the terminal summary."""

    def record(number: int, name: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number} {'PASS' if passed else 'FAIL'} {name}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
