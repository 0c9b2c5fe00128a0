import numpy as np
import pytest

from zxdecoherence.gf2 import gf2_rank
from zxdecoherence.lattice import TorusLattice, build_initial_state
from zxdecoherence.pauli import PauliOperator
from zxdecoherence.stabilizer import MixedStabilizerState


def random_commuting_generators(n_qubits, k, rng):
    """k independent, pairwise commuting Hermitian Paulis with random signs."""
    chosen = []
    while len(chosen) < k:
        x = rng.integers(0, 2, n_qubits)
        z = rng.integers(0, 2, n_qubits)
        if not (x.any() or z.any()):
            continue
        op = PauliOperator.from_bits(x, z, 2 * int(rng.integers(0, 2)))
        if not all(op.commutes(c) for c in chosen):
            continue
        rows = np.array([np.concatenate([c.x_bits, c.z_bits]) for c in chosen + [op]])
        if gf2_rank(rows) < len(chosen) + 1:
            continue
        chosen.append(op)
    return chosen


def random_pauli(n_qubits, rng, hermitian=True):
    x = rng.integers(0, 2, n_qubits)
    z = rng.integers(0, 2, n_qubits)
    phase = 2 * int(rng.integers(0, 2)) if hermitian else int(rng.integers(0, 4))
    return PauliOperator.from_bits(x, z, phase)


def dense_dephase(rho, op):
    p = op.to_matrix()
    return (rho + p @ rho @ p.conj().T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_state(rng):
    def make(n_qubits, k):
        return MixedStabilizerState(n_qubits, random_commuting_generators(n_qubits, k, rng))
    return make


@pytest.fixture(scope='session')
def lattice6():
    return TorusLattice(6, 6)


@pytest.fixture(scope='session')
def lattice4():
    return TorusLattice(4, 4)


@pytest.fixture
def rho_tc6(lattice6):
    return build_initial_state(lattice6)


@pytest.fixture
def rho_f6(lattice6):
    from zxdecoherence.channels import apply_maximal
    state = build_initial_state(lattice6)
    apply_maximal(state, lattice6)
    return state
