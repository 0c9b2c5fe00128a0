import numpy as np
import pytest

from zxdecoherence.channels import apply_maximal, apply_stochastic_layer, kraus_operators
from zxdecoherence.lattice import TorusLattice, build_initial_state
from zxdecoherence.pauli import DimensionError, PauliOperator, product
from zxdecoherence.stabilizer import Membership, MixedStabilizerState, centralizer_membership_oracle

from .conftest import dense_dephase, random_pauli


def ops(*texts):
    return [PauliOperator.from_string(t) for t in texts]


class TestValidation:
    """Generator sets the tableau refuses."""

    def test_anticommuting_generators(self):
        with pytest.raises(ValueError):
            MixedStabilizerState(1, ops('+X', '+Z'))

    def test_dependent_generators(self):
        with pytest.raises(ValueError):
            MixedStabilizerState(3, ops('+ZII', '+IZI', '+ZZI'))

    def test_non_hermitian_generator(self):
        with pytest.raises(ValueError):
            MixedStabilizerState(1, ops('+iZ'))

    def test_size_mismatch(self):
        with pytest.raises(DimensionError):
            MixedStabilizerState(3, ops('+ZZ'))

    def test_purity(self):
        state = MixedStabilizerState(3, ops('+ZZI', '+IZZ'))
        assert state.k == 2
        assert state.purity == pytest.approx(0.5)


class TestMembership:
    """Signed membership in the stabilizer group."""

    @pytest.fixture
    def state(self):
        return MixedStabilizerState(2, ops('+ZI', '+IZ'))

    def test_plus(self, state):
        assert state.contains(PauliOperator.from_string('+ZZ')) is Membership.PLUS

    def test_minus(self, state):
        assert state.contains(PauliOperator.from_string('-ZZ')) is Membership.MINUS

    def test_anticommutes(self, state):
        assert state.contains(PauliOperator.from_string('+XI')) is Membership.ANTICOMMUTES

    def test_not_member(self):
        state = MixedStabilizerState(2, ops('+ZZ'))
        assert state.contains(PauliOperator.from_string('+ZI')) is Membership.NOT_MEMBER

    def test_expectation_values(self):
        assert Membership.PLUS.expectation == 1
        assert Membership.MINUS.expectation == -1
        assert Membership.NOT_MEMBER.expectation == 0
        assert Membership.ANTICOMMUTES.expectation == 0

    def test_canonicalize_keeps_group(self, random_state):
        state = random_state(5, 4)
        original = state.generators
        canonical = state.canonicalize()
        assert canonical.k == 4
        assert all(canonical.contains(g) is Membership.PLUS for g in original)

    def test_copy_is_independent(self):
        state = MixedStabilizerState(2, ops('+ZI', '+IZ'))
        clone = state.copy()
        clone.apply_dephasing(PauliOperator.from_string('+XI'))
        assert state.k == 2
        assert clone.k == 1


class TestDephasing:
    """The dephasing update against dense matrices."""

    def test_commuting_operator_leaves_state(self):
        state = MixedStabilizerState(2, ops('+ZZ'))
        assert state.apply_dephasing(PauliOperator.from_string('+XX')) is False
        assert state.k == 1

    def test_anticommuting_operator_removes_one(self):
        state = MixedStabilizerState(3, ops('+ZII', '+IZI', '+IIZ'))
        assert state.apply_dephasing(PauliOperator.from_string('+XXI')) is True
        assert state.k == 2
        assert state.contains(PauliOperator.from_string('+ZZI')) is Membership.PLUS

    def test_rejects_non_hermitian(self):
        state = MixedStabilizerState(1, ops('+Z'))
        with pytest.raises(ValueError):
            state.apply_dephasing(PauliOperator.from_string('+iX'))

    def test_matches_dense_channel(self, random_state, rng):
        for _ in range(15):
            state = random_state(4, int(rng.integers(1, 5)))
            rho = state.to_density_matrix()
            for _ in range(3):
                p = random_pauli(4, rng)
                rho = dense_dephase(rho, p)
                state.apply_dephasing(p)
                assert np.allclose(state.to_density_matrix(), rho)

    def test_k_counts_removals(self, random_state, rng):
        state = random_state(5, 5)
        removed = sum(state.apply_dephasing(random_pauli(5, rng)) for _ in range(8))
        assert state.k == 5 - removed


class TestDenseOracles:
    """Purity, expectation values and Renyi-2 correlators against dense matrices."""

    def test_purity(self, random_state):
        for k in range(0, 5):
            state = random_state(4, k)
            rho = state.to_density_matrix()
            assert np.trace(rho @ rho).real == pytest.approx(state.purity)
            assert state.purity == pytest.approx(2.0 ** (k - 4))

    def test_expectation(self, random_state, rng):
        state = random_state(4, 3)
        rho = state.to_density_matrix()
        members = [state.generators[0] * state.generators[1], state.generators[2].negate()]
        for p in members + [random_pauli(4, rng) for _ in range(20)]:
            assert np.trace(p.to_matrix() @ rho).real == pytest.approx(state.contains(p).expectation)

    def test_renyi2_correlator(self, random_state, rng):
        state = random_state(4, 2)
        rho = state.to_density_matrix()
        for _ in range(20):
            p = random_pauli(4, rng)
            pm = p.to_matrix()
            value = np.trace(rho @ pm @ rho @ pm).real / np.trace(rho @ rho).real
            assert value == pytest.approx(float(state.commutes_with_all(p)))


class TestCentralizerOracle:
    """Final group as the initial elements commuting with every Kraus operator."""

    def test_agrees_with_simulation(self, random_state, rng):
        for _ in range(10):
            initial = random_state(5, 5)
            final = initial.copy()
            kraus = [random_pauli(5, rng) for _ in range(3)]
            for p in kraus:
                final.apply_dephasing(p)
            probes = list(initial.generators) + [random_pauli(5, rng) for _ in range(10)]
            for op in probes:
                assert centralizer_membership_oracle(initial, kraus, op, final) is final.contains(op)

    @pytest.mark.parametrize('size', [(4, 4), (6, 6), (8, 8)])
    def test_agrees_on_toric_trajectories(self, size, rng):
        """Final-group membership, sign included, from initial group plus commuting condition."""
        lattice = TorusLattice(*size)
        initial = build_initial_state(lattice)
        generators = initial.generators
        outcomes = set()
        pairs = 0
        for r in (0.1, 0.3, 0.5):
            for _ in range(4):
                final = initial.copy()
                pattern = apply_stochastic_layer(final, lattice, r, rng)
                kraus = kraus_operators(lattice, pattern.decohered)
                candidates = []
                for _ in range(10):
                    picked = rng.choice(len(generators), size=int(rng.integers(1, 6)), replace=False)
                    candidates.append(product([generators[i] for i in picked]))
                for _ in range(5):
                    xs, ys = rng.integers(0, lattice.Lx, 2), rng.integers(0, lattice.Ly, 2)
                    candidates.append(product([lattice.w_operator(x, y) for x, y in zip(xs, ys)]))
                candidates += [op.negate() for op in candidates[-3:]]
                for op in candidates:
                    expected = final.contains(op)
                    assert centralizer_membership_oracle(initial, kraus, op, final) is expected
                    outcomes.add(expected)
                    pairs += 1
        assert pairs >= 200
        assert {Membership.PLUS, Membership.MINUS, Membership.NOT_MEMBER} <= outcomes


class TestLogicals:
    """Logical tracking, repair and death."""

    def test_no_tracked_logicals(self):
        with pytest.raises(RuntimeError):
            MixedStabilizerState(1, ops('+Z')).logical_dead()

    def test_single_dephasing_repairs_logical(self, lattice4):
        state = build_initial_state(lattice4)
        from zxdecoherence.channels import kraus_for
        state.apply_dephasing(kraus_for(lattice4, lattice4.v(0, 0)))
        logical = state.tracked_logicals[0]
        assert logical.name == 'x'
        assert logical.alive
        assert state.contains(logical.operator) is Membership.PLUS
        assert not logical.operator.commutes(lattice4.logical_Z('y'))

    def test_maximal_channel_kills_logicals(self, lattice4):
        state = build_initial_state(lattice4)
        apply_maximal(state, lattice4)
        assert state.logical_dead() == {'x': True, 'y': True}
