"""Local ZX dephasing channel and its single-layer compositions."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .lattice import LinkIndex, TorusLattice
from .pauli import DimensionError, PauliOperator
from .stabilizer import MixedStabilizerState

logger = logging.getLogger('decoherence-channels')


@dataclass(frozen=True)
class DecoherencePattern:
    """Links hit by the stochastic channel in one trajectory, ascending flat order."""

    Lx: int
    Ly: int
    decohered: Tuple[int, ...] = ()

    def __post_init__(self):
        links = tuple(sorted(set(int(i) for i in self.decohered)))
        n_links = 2 * self.Lx * self.Ly
        if links and (links[0] < 0 or links[-1] >= n_links):
            raise IndexError(f'pattern link out of range for {self.Lx}x{self.Ly}')
        object.__setattr__(self, 'decohered', links)

    def __len__(self) -> int:
        return len(self.decohered)

    def __contains__(self, link: int) -> bool:
        return int(link) in set(self.decohered)

    def __iter__(self):
        return iter(self.decohered)

    def with_links(self, links: Iterable[int]) -> 'DecoherencePattern':
        return DecoherencePattern(self.Lx, self.Ly, self.decohered + tuple(links))

    def to_record(self) -> List[int]:
        return list(self.decohered)


LinkLike = Union[int, LinkIndex]


def kraus_for(lattice: TorusLattice, link: LinkLike) -> PauliOperator:
    """Z_l X_{l+delta}."""
    index = lattice.link_index(link) if isinstance(link, LinkIndex) else int(link)
    return _kraus(lattice, index)


@lru_cache(maxsize=None)
def _kraus(lattice: TorusLattice, index: int) -> PauliOperator:
    return lattice.zx_string([index])


def kraus_operators(lattice: TorusLattice, links: Optional[Iterable[int]] = None) -> List[PauliOperator]:
    links = range(lattice.n_qubits) if links is None else links
    return [kraus_for(lattice, i) for i in links]


def apply_pattern(state: MixedStabilizerState, lattice: TorusLattice,
                  links: Iterable[int]) -> int:
    """Dephase at every listed link in the given order; returns how many removed a generator."""
    removed = 0
    for index in links:
        removed += state.apply_dephasing(kraus_for(lattice, index))
    return removed


def apply_stochastic_layer(state: MixedStabilizerState, lattice: TorusLattice, r: float,
                           rng: np.random.Generator) -> DecoherencePattern:
    """One sweep over the links in ascending order, dephasing each with probability r."""
    if not 0.0 <= r <= 1.0:
        msg = f'decoherence probability must lie in [0, 1], got {r}'
        logger.error(msg)
        raise ValueError(msg)
    hits = np.flatnonzero(rng.random(lattice.n_qubits) < r)
    apply_pattern(state, lattice, hits)
    return DecoherencePattern(lattice.Lx, lattice.Ly, tuple(hits.tolist()))


def apply_maximal(state: MixedStabilizerState, lattice: TorusLattice) -> DecoherencePattern:
    """E^all: dephasing at every link."""
    links = range(lattice.n_qubits)
    apply_pattern(state, lattice, links)
    return DecoherencePattern(lattice.Lx, lattice.Ly, tuple(links))


def channel_is_strong_symmetric(kraus_ops: Sequence[PauliOperator], op: PauliOperator) -> bool:
    """Every Kraus operator commutes with ``op``."""
    return all(k.commutes(op) for k in kraus_ops)


def channel_is_weak_symmetric(kraus_ops: Sequence[PauliOperator], op: PauliOperator,
                              dense: bool = False) -> bool:
    """U K U^dagger = +-K for every Kraus operator, so the channel is U-invariant.

    For Pauli ``op`` and Kraus operators this holds identically (they commute or
    anticommute), so the symbolic branch only checks that the operators act on
    the same qubits. ``dense`` conjugates the matrices instead (small systems only).
    """
    mismatched = [k for k in kraus_ops if k.n_qubits != op.n_qubits]
    if mismatched:
        msg = f'Kraus operator on {mismatched[0].n_qubits} qubits vs symmetry on {op.n_qubits}'
        logger.error(msg)
        raise DimensionError(msg)
    if not dense:
        return True
    u = op.to_matrix()
    for k in kraus_ops:
        km = k.to_matrix()
        conj = u @ km @ u.conj().T
        if not (np.allclose(conj, km) or np.allclose(conj, -km)):
            return False
    return True
