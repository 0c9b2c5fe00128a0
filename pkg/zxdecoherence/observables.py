"""Per-state quantities: negativity, loop order parameters, Renyi-2 string
correlators, strong-symmetry order/disorder parameters and logical survival."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .gf2 import commutation_matrix, gf2_rank
from .lattice import TorusLattice
from .pauli import PauliOperator
from .stabilizer import Membership, MixedStabilizerState

logger = logging.getLogger('observables')


@dataclass(frozen=True)
class SymmetryDiagnostics:
    O1: int
    O2: int
    D1: int
    D2: int


@dataclass(frozen=True)
class ObservableToggles:
    negativity: bool = False
    chi_I: bool = True
    chi_II: bool = True
    logicals: bool = True
    symmetry: bool = False
    anchor_average: bool = False


@dataclass
class ObservableRecord:
    negativity_by_kA: List[Tuple[int, float]] = field(default_factory=list)
    chi_I: Optional[float] = None
    C_I: List[float] = field(default_factory=list)
    chi_II: Optional[float] = None
    chi_II_count: Optional[int] = None
    logical_dead: Dict[str, bool] = field(default_factory=dict)
    symmetry: Optional[SymmetryDiagnostics] = None

    def to_dict(self) -> dict:
        data = asdict(self)
        data['negativity_by_kA'] = [[k, n] for k, n in self.negativity_by_kA]
        return data

    def flat(self) -> Dict[str, float]:
        """Scalar observables keyed by the names used in the ensemble summary."""
        values: Dict[str, float] = {}
        for k, n in self.negativity_by_kA:
            values[f'N_A_k{k}'] = float(n)
        if self.chi_I is not None:
            values['chi_I'] = float(self.chi_I)
            for k, c in enumerate(self.C_I, start=1):
                values[f'C_I_k{k}'] = float(c)
        if self.chi_II is not None:
            values['chi_II'] = float(self.chi_II)
            values['chi_II_count'] = float(self.chi_II_count)
        if self.logical_dead:
            for name, dead in sorted(self.logical_dead.items()):
                values[f'logical_dead_{name}'] = float(dead)
            values['p_lo'] = float(np.mean([float(d) for d in self.logical_dead.values()]))
        if self.symmetry is not None:
            values.update({k: float(v) for k, v in asdict(self.symmetry).items()})
        return values


def negativity(state: MixedStabilizerState, region: Sequence[int]) -> float:
    """N_A = rank(J) / 2 with J the anticommutation matrix of generators restricted to A."""
    region = sorted(set(int(i) for i in region))
    if not region or state.k == 0:
        return 0.0
    xb, zb = state.restricted_bits(region)
    keep = (xb | zb).any(axis=1)
    if not keep.any():
        return 0.0
    j_matrix = commutation_matrix(xb[keep], zb[keep])
    return gf2_rank(j_matrix) / 2


def negativity_profile(state: MixedStabilizerState, lattice: TorusLattice,
                       k_values: Optional[Sequence[int]] = None) -> List[Tuple[int, float]]:
    if k_values is None:
        k_values = range(1, (lattice.Lx - 2) // 2 + 1)
    return [(k, negativity(state, lattice.region_links(k))) for k in k_values]


def order_param_CI(state: MixedStabilizerState, lattice: TorusLattice, loop: Sequence[int]) -> int:
    """C^I: 1 iff the Wilson loop is a +1 stabilizer element."""
    membership = state.contains(lattice.wilson_Z(loop))
    if membership is Membership.MINUS:
        logger.warning('Wilson loop has expectation -1; reporting C^I = 0',
                       extra={'event': 'sign_anomaly', 'loop_size': len(loop)})
    return int(membership is Membership.PLUS)


def loop_sizes(lattice: TorusLattice) -> range:
    return range(1, min(lattice.Lx - 2, lattice.Ly - 2) + 1)


def ci_by_loop(state: MixedStabilizerState, lattice: TorusLattice,
               anchor_average: bool = False) -> List[float]:
    """C^I for square_loop(k), k = 1..N_l; averaged over every anchor if requested."""
    values = []
    for k in loop_sizes(lattice):
        if anchor_average:
            anchors = [(x, y) for y in range(lattice.Ly) for x in range(lattice.Lx)]
            hits = [order_param_CI(state, lattice, lattice.square_loop(k, a)) for a in anchors]
            values.append(float(np.mean(hits)))
        else:
            values.append(float(order_param_CI(state, lattice, lattice.square_loop(k))))
    return values


def chi_I(state: MixedStabilizerState, lattice: TorusLattice, anchor_average: bool = False) -> float:
    return float(np.mean(ci_by_loop(state, lattice, anchor_average)))


def renyi2_correlator(state: MixedStabilizerState, op: PauliOperator) -> int:
    """Tr[rho P rho P] / Tr[rho^2] for a Pauli P: 1 iff P commutes with every generator."""
    return int(state.commutes_with_all(op))


def chi_II_strings(lattice: TorusLattice) -> List[Tuple[int, int, List[int]]]:
    """(ix, length, links) of every vertical string entering chi^II."""
    if lattice.Ly < 4:
        msg = f'chi_II needs Ly >= 4, got {lattice.Ly}'
        logger.error(msg)
        raise ValueError(msg)
    return [(ix, n, lattice.vertical_path(ix, n))
            for ix in range(lattice.Lx) for n in range(1, lattice.Ly - 2)]


def c_II_values(state: MixedStabilizerState, lattice: TorusLattice) -> np.ndarray:
    return np.array([renyi2_correlator(state, lattice.zx_string(links))
                     for _, _, links in chi_II_strings(lattice)], dtype=np.int64)


def chi_II(state: MixedStabilizerState, lattice: TorusLattice) -> float:
    return float(c_II_values(state, lattice).mean())


def is_strong_symmetric(state: MixedStabilizerState, op: PauliOperator) -> bool:
    return state.contains(op).is_member


def is_weak_symmetric(state: MixedStabilizerState, op: PauliOperator) -> bool:
    return state.commutes_with_all(op)


def default_diagnostic_geometry(lattice: TorusLattice):
    """square_loop(2) on both lattices and a two-step q-lattice string."""
    dual_loop = lattice.dual_square_loop(2)
    loop = lattice.square_loop(2)
    dual_string = lattice.dual_lattice_path((1, 1), (1, 3))
    return dual_loop, dual_string, loop


def symmetry_diagnostics(state: MixedStabilizerState, lattice: TorusLattice,
                         dual_loop: Optional[Sequence[int]] = None,
                         dual_string: Optional[Sequence[int]] = None,
                         loop: Optional[Sequence[int]] = None) -> SymmetryDiagnostics:
    """O1, O2, D1, D2 for a q-lattice loop, a q-lattice open string and a v-lattice loop.

    O1 and O2 require both the 't Hooft loop on ``dual_loop`` and the Wilson loop
    on ``loop`` to qualify.
    """
    default_dual_loop, default_dual_string, default_loop = default_diagnostic_geometry(lattice)
    dual_loop = default_dual_loop if dual_loop is None else dual_loop
    dual_string = default_dual_string if dual_string is None else dual_string
    loop = default_loop if loop is None else loop

    loops = (lattice.thooft_X(dual_loop), lattice.wilson_Z(loop))
    string = lattice.xz_string(dual_string)
    o1 = int(all(state.contains(op) is Membership.PLUS for op in loops))
    o2 = int(all(renyi2_correlator(state, op) for op in loops))
    d1 = int(state.contains(string) is Membership.PLUS)
    d2 = renyi2_correlator(state, string)
    return SymmetryDiagnostics(O1=o1, O2=o2, D1=d1, D2=d2)


def logical_dead(state: MixedStabilizerState) -> Dict[str, bool]:
    return state.logical_dead()


def evaluate(state: MixedStabilizerState, lattice: TorusLattice,
             toggles: ObservableToggles = ObservableToggles()) -> ObservableRecord:
    """Every enabled observable of one trajectory's final state."""
    record = ObservableRecord()
    if toggles.negativity and lattice.Ly >= 4 and lattice.Lx >= 4:
        record.negativity_by_kA = negativity_profile(state, lattice)
    if toggles.chi_I:
        record.C_I = ci_by_loop(state, lattice, toggles.anchor_average)
        record.chi_I = float(np.mean(record.C_I))
    if toggles.chi_II:
        values = c_II_values(state, lattice)
        record.chi_II = float(values.mean())
        record.chi_II_count = int(values.sum())
    if toggles.logicals and state.tracked_logicals:
        record.logical_dead = logical_dead(state)
    if toggles.symmetry:
        record.symmetry = symmetry_diagnostics(state, lattice)
    return record
