import logging

import numpy as np
import pytest

from zxdecoherence.channels import apply_maximal, apply_stochastic_layer
from zxdecoherence.ensemble import initial_state_template, trajectory_rng
from zxdecoherence.lattice import TorusLattice, build_initial_state
from zxdecoherence.observables import (ObservableToggles, chi_I, chi_II, chi_II_strings, ci_by_loop, evaluate,
                                       loop_sizes, negativity, negativity_profile, order_param_CI,
                                       symmetry_diagnostics)
from zxdecoherence.stabilizer import MixedStabilizerState


class TestOrderParameters:
    """C^I and C^II on the toric code and the fully decohered state."""

    def test_toric_code(self, rho_tc6, lattice6):
        assert chi_I(rho_tc6, lattice6) == 1.0
        assert chi_II(rho_tc6, lattice6) == 0.0

    def test_maximally_decohered(self, rho_f6, lattice6):
        assert chi_I(rho_f6, lattice6) == 0.0
        assert chi_II(rho_f6, lattice6) == 1.0

    def test_loop_sizes(self):
        assert list(loop_sizes(TorusLattice(6, 8))) == [1, 2, 3, 4]

    def test_anchor_average_agrees_on_translation_invariant_states(self, rho_tc6, rho_f6, lattice6):
        assert ci_by_loop(rho_tc6, lattice6, anchor_average=True) == ci_by_loop(rho_tc6, lattice6)
        assert ci_by_loop(rho_f6, lattice6, anchor_average=True) == ci_by_loop(rho_f6, lattice6)

    def test_negative_wilson_loop_reports_zero(self, caplog):
        lattice = TorusLattice(3, 3)
        loop = lattice.square_loop(1)
        state = MixedStabilizerState(lattice.n_qubits, [lattice.wilson_Z(loop).negate()])
        with caplog.at_level(logging.WARNING, logger='observables'):
            assert order_param_CI(state, lattice, loop) == 0
        assert any(getattr(r, 'event', None) == 'sign_anomaly' for r in caplog.records)

    def test_chi_II_strings(self, lattice6):
        strings = chi_II_strings(lattice6)
        assert len(strings) == 6 * 3
        assert [n for ix, n, _ in strings if ix == 0] == [1, 2, 3]
        with pytest.raises(ValueError):
            chi_II_strings(TorusLattice(5, 3))


class TestNegativity:
    """Negativity from the restricted anticommutation rank."""

    def test_empty_region(self, rho_tc6):
        assert negativity(rho_tc6, []) == 0.0

    def test_is_integer_valued(self, rho_tc6, lattice6):
        for _, value in negativity_profile(rho_tc6, lattice6):
            assert value > 0
            assert float(value).is_integer()

    def test_maximally_decohered_slope_is_three(self):
        lattice = TorusLattice(12, 6)
        state = build_initial_state(lattice)
        apply_maximal(state, lattice)
        values = [n for _, n in negativity_profile(state, lattice)]
        assert len(values) == 5
        assert np.diff(values).tolist() == [3.0] * 4

    def test_product_state_has_none(self):
        lattice = TorusLattice(6, 6)
        state = MixedStabilizerState(lattice.n_qubits, [lattice.z_operator([i]) for i in range(lattice.n_qubits)])
        assert negativity(state, lattice.region_links(2)) == 0.0


class TestSymmetryDiagnostics:
    """O1, O2, D1 and D2."""

    def test_toric_code(self, rho_tc6, lattice6):
        diag = symmetry_diagnostics(rho_tc6, lattice6)
        assert diag.O1 == 1
        assert diag.D2 == 0

    def test_maximally_decohered(self, rho_f6, lattice6):
        diag = symmetry_diagnostics(rho_f6, lattice6)
        assert (diag.O1, diag.O2, diag.D1, diag.D2) == (0, 1, 0, 0)


class TestEvaluate:
    """Observable toggles and flattened records."""

    def test_default_keys(self, rho_tc6, lattice6):
        values = evaluate(rho_tc6, lattice6).flat()
        expected = {'chi_I', 'chi_II', 'chi_II_count', 'logical_dead_x', 'logical_dead_y', 'p_lo'}
        expected |= {f'C_I_k{k}' for k in loop_sizes(lattice6)}
        assert set(values) == expected
        assert values['p_lo'] == 0.0
        assert values['chi_II_count'] == 0.0

    def test_negativity_and_symmetry(self, rho_f6, lattice6):
        toggles = ObservableToggles(negativity=True, chi_I=False, chi_II=False, logicals=False, symmetry=True)
        record = evaluate(rho_f6, lattice6, toggles)
        values = record.flat()
        assert {'N_A_k1', 'N_A_k2', 'O1', 'O2', 'D1', 'D2'} == set(values)
        assert record.to_dict()['negativity_by_kA'][0][0] == 1

    def test_maximal_channel_kills_logicals(self, rho_f6, lattice6):
        assert evaluate(rho_f6, lattice6).flat()['p_lo'] == 1.0


@pytest.mark.slow
@pytest.mark.parametrize('r', [0.1, 0.2, 0.3])
def test_loop_survival_law(r):
    """E[C^I] of square_loop(k) follows (1 - r)^(4k) for every loop size k."""
    lattice = TorusLattice(12, 12)
    samples = 2000
    r_index = int(round(r * 10))
    hits = np.array([ci_by_loop(_decohered(lattice, r, trajectory_rng(11, 12, 12, r_index, s)), lattice)
                     for s in range(samples)])
    for k, observed in zip(loop_sizes(lattice), hits.mean(axis=0)):
        expected = (1 - r) ** (4 * k)
        stderr = np.sqrt(expected * (1 - expected) / samples)
        assert abs(observed - expected) <= 3 * stderr, k


def _decohered(lattice, r, rng):
    state = initial_state_template(lattice.Lx, lattice.Ly, 'pure')
    apply_stochastic_layer(state, lattice, r, rng)
    return state
