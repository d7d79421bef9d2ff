import numpy as np
import pytest
from scipy.stats import unitary_group

from qwalk.evolution import propagator
from qwalk.lattice import build_linear_chain, build_swiss_cross, hamiltonian


def coupler_closed_form(beta, c, z):
    """exp(-i z [[beta, c], [c, beta]]) written out by hand."""
    phase = np.exp(-1j * beta * z)
    cz = c * z
    return phase * np.array(
        [[np.cos(cz), -1j * np.sin(cz)], [-1j * np.sin(cz), np.cos(cz)]]
    )


def random_hermitian(rng, n, scale=5.0, complex_=False):
    h = rng.uniform(-scale, scale, size=(n, n))
    if complex_:
        h = h + 1j * rng.uniform(-scale, scale, size=(n, n))
    return 0.5 * (h + h.conj().T)


def random_unitary(rng, n):
    return unitary_group.rvs(n, random_state=rng)


@pytest.fixture
def rng():
    return np.random.default_rng(20131017)


@pytest.fixture
def hom_coupler():
    """Two-site coupler at C z = pi/4, the balanced beam splitter."""
    lattice = build_linear_chain(2, 18.0, 1.0, 0.0, np.pi / 4)
    return propagator(hamiltonian(lattice), lattice.length)


@pytest.fixture(scope="session")
def swiss():
    return build_swiss_cross()


@pytest.fixture(scope="session")
def swiss_propagator(swiss):
    return propagator(hamiltonian(swiss), swiss.length)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
