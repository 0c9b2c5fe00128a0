"""Mixed stabilizer states rho ~ prod_n (1 + g_n)/2 and the dephasing update.

The tableau keeps the k generators as packed rows (``x``, ``z`` of shape
(k, words) and ``phase`` of shape (k,)). Row operations are vectorised over
rows; the only Python loop is the column sweep of the echelon form.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .gf2 import commutation_matrix, gf2_solve
from .pauli import (DimensionError, PauliOperator, anticommutation, n_words, popcount,
                    product_phase, sequence_product, unpack_bits)

logger = logging.getLogger('stabilizer-state')


class Membership(enum.Enum):
    PLUS = 'PlusMember'
    MINUS = 'MinusMember'
    NOT_MEMBER = 'NotMember'
    ANTICOMMUTES = 'Anticommutes'

    @property
    def expectation(self) -> int:
        """Tr[P rho] for a normalised rho."""
        return {Membership.PLUS: 1, Membership.MINUS: -1}.get(self, 0)

    @property
    def is_member(self) -> bool:
        return self in (Membership.PLUS, Membership.MINUS)


@dataclass
class TrackedLogical:
    """A logical representative carried through channel updates.

    ``conjugates`` are operators the repair element has to commute with, so
    that repairing never moves the representative into another logical class.
    """

    name: str
    operator: PauliOperator
    conjugates: tuple = ()
    alive: bool = True


@dataclass
class _Echelon:
    x: np.ndarray
    z: np.ndarray
    phase: np.ndarray
    pivots: np.ndarray


def _row_reduce(n_qubits: int, x: np.ndarray, z: np.ndarray, phase: np.ndarray) -> _Echelon:
    """Reduced row echelon form; columns are all x-columns then all z-columns."""
    x = x.copy()
    z = z.copy()
    phase = phase.copy()
    k = x.shape[0]
    pivots = []
    row = 0
    for col in range(2 * n_qubits):
        if row == k:
            break
        part = x if col < n_qubits else z
        qubit = col % n_qubits
        word, bit = divmod(qubit, 64)
        column = (part[:, word] >> np.uint64(bit)) & np.uint64(1)
        hits = np.flatnonzero(column[row:])
        if hits.size == 0:
            continue
        pivot = row + int(hits[0])
        if pivot != row:
            x[[row, pivot]] = x[[pivot, row]]
            z[[row, pivot]] = z[[pivot, row]]
            phase[[row, pivot]] = phase[[pivot, row]]
            column[[row, pivot]] = column[[pivot, row]]
        targets = np.flatnonzero(column)
        targets = targets[targets != row]
        if targets.size:
            phase[targets] = product_phase(phase[targets], x[targets], z[targets],
                                           phase[row], x[row], z[row])
            x[targets] ^= x[row]
            z[targets] ^= z[row]
        pivots.append(col)
        row += 1
    return _Echelon(x=x, z=z, phase=phase, pivots=np.asarray(pivots, dtype=np.int64))


class MixedStabilizerState:
    """rho = 2^-L prod_{n<k} (1 + g_n) over k independent commuting generators.

    Args:
        n_qubits: number of qubits L.
        generators: Hermitian, pairwise commuting, independent Pauli operators.
        tracked_logicals: logical representatives updated by :meth:`apply_dephasing`.
    """

    def __init__(self, n_qubits: int, generators: Sequence[PauliOperator] = (),
                 tracked_logicals: Iterable[TrackedLogical] = ()):
        generators = list(generators)
        words = n_words(n_qubits)
        for g in generators:
            if g.n_qubits != n_qubits:
                raise DimensionError(f'generator {g} acts on {g.n_qubits} qubits, state on {n_qubits}')
        x = np.array([g.x for g in generators], dtype=np.uint64).reshape(len(generators), words)
        z = np.array([g.z for g in generators], dtype=np.uint64).reshape(len(generators), words)
        phase = np.array([g.phase for g in generators], dtype=np.int64)
        self._init_rows(n_qubits, x, z, phase, tracked_logicals, validate=True)

    @classmethod
    def from_arrays(cls, n_qubits: int, x: np.ndarray, z: np.ndarray, phase: np.ndarray,
                    tracked_logicals: Iterable[TrackedLogical] = (),
                    validate: bool = True) -> 'MixedStabilizerState':
        """Build directly from packed rows (used by lattice constructors)."""
        state = cls.__new__(cls)
        state._init_rows(n_qubits, np.asarray(x, dtype=np.uint64), np.asarray(z, dtype=np.uint64),
                         np.asarray(phase, dtype=np.int64) % 4, tracked_logicals, validate)
        return state

    def _init_rows(self, n_qubits, x, z, phase, tracked_logicals, validate) -> None:
        self.n_qubits = n_qubits
        self._x = np.ascontiguousarray(x)
        self._z = np.ascontiguousarray(z)
        self._phase = np.ascontiguousarray(phase)
        self._echelon: Optional[_Echelon] = None
        self.tracked_logicals: List[TrackedLogical] = [replace(t) for t in tracked_logicals]
        for logical in self.tracked_logicals:
            if logical.operator.n_qubits != n_qubits:
                raise DimensionError(f'logical {logical.name} has wrong size')
        if validate:
            self._validate()

    def _validate(self) -> None:
        k = self.k
        if k > self.n_qubits:
            raise ValueError(f'{k} generators exceed {self.n_qubits} qubits')
        if np.any(self._phase % 2):
            msg = 'stabilizer generators must be Hermitian (phase_exp in {0, 2})'
            logger.error(msg)
            raise ValueError(msg)
        if k == 0:
            return
        xb = unpack_bits(self._x, self.n_qubits)
        zb = unpack_bits(self._z, self.n_qubits)
        if commutation_matrix(xb, zb).any():
            msg = 'stabilizer generators must pairwise commute'
            logger.error(msg)
            raise ValueError(msg)
        echelon = self._get_echelon()
        if echelon.pivots.size != k:
            msg = f'stabilizer generators are dependent: rank {echelon.pivots.size} < k={k}'
            logger.error(msg)
            raise ValueError(msg)

    # basic views

    @property
    def k(self) -> int:
        return int(self._x.shape[0])

    @property
    def purity(self) -> float:
        """Tr[rho^2] = 2^(k - L)."""
        return 2.0 ** (self.k - self.n_qubits)

    @property
    def generators(self) -> List[PauliOperator]:
        return [self.generator(i) for i in range(self.k)]

    def generator(self, index: int) -> PauliOperator:
        return PauliOperator(self.n_qubits, self._x[index], self._z[index], int(self._phase[index]))

    def restricted_bits(self, qubits: Sequence[int]):
        """Unpacked (x, z) columns of every generator on the listed qubits."""
        cols = np.asarray(list(qubits), dtype=np.int64)
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_qubits):
            raise IndexError(f'qubit index out of range for {self.n_qubits} qubits')
        xb = unpack_bits(self._x, self.n_qubits)[:, cols]
        zb = unpack_bits(self._z, self.n_qubits)[:, cols]
        return xb, zb

    def copy(self) -> 'MixedStabilizerState':
        return MixedStabilizerState.from_arrays(self.n_qubits, self._x.copy(), self._z.copy(),
                                                self._phase.copy(), self.tracked_logicals,
                                                validate=False)

    def dump(self) -> str:
        lines = [f'k={self.k} L={self.n_qubits}']
        lines.extend(str(g) for g in self.generators)
        return '\n'.join(lines)

    def __repr__(self) -> str:
        return f'MixedStabilizerState(L={self.n_qubits}, k={self.k})'

    # canonical form and membership

    def _get_echelon(self) -> _Echelon:
        if self._echelon is None:
            self._echelon = _row_reduce(self.n_qubits, self._x, self._z, self._phase)
        return self._echelon

    def canonicalize(self) -> 'MixedStabilizerState':
        """Same group, generators in reduced row echelon form with exact signs."""
        echelon = self._get_echelon()
        state = MixedStabilizerState.from_arrays(self.n_qubits, echelon.x.copy(), echelon.z.copy(),
                                                 echelon.phase.copy(), self.tracked_logicals,
                                                 validate=False)
        state._echelon = echelon
        return state

    def _check(self, op: PauliOperator) -> None:
        if op.n_qubits != self.n_qubits:
            msg = f'operator on {op.n_qubits} qubits, state on {self.n_qubits}'
            logger.error(msg)
            raise DimensionError(msg)

    def anticommuting_mask(self, op: PauliOperator) -> np.ndarray:
        self._check(op)
        return anticommutation(self._x, self._z, op.x, op.z).astype(bool)

    def commutes_with_all(self, op: PauliOperator) -> bool:
        return not self.anticommuting_mask(op).any()

    def contains(self, op: PauliOperator) -> Membership:
        """Classify ``op`` against the stabilizer group."""
        if not self.commutes_with_all(op):
            return Membership.ANTICOMMUTES
        echelon = self._get_echelon()
        target = np.concatenate([op.x_bits, op.z_bits])
        selected = np.flatnonzero(target[echelon.pivots])
        x, z, phase = sequence_product(echelon.x[selected], echelon.z[selected],
                                       echelon.phase[selected])
        if not (np.array_equal(x, op.x) and np.array_equal(z, op.z)):
            return Membership.NOT_MEMBER
        if phase == op.phase:
            return Membership.PLUS
        if (phase + 2) % 4 == op.phase:
            return Membership.MINUS
        return Membership.NOT_MEMBER

    # channel update

    def apply_dephasing(self, op: PauliOperator) -> bool:
        """rho -> (rho + P rho P) / 2.

        Returns:
            True if a generator was removed (k decreased by one).
        """
        self._check(op)
        if not op.is_hermitian:
            msg = f'dephasing operator must be Hermitian, got {op}'
            logger.error(msg)
            raise ValueError(msg)
        mask = self.anticommuting_mask(op)
        for logical in self.tracked_logicals:
            if logical.alive and not logical.operator.commutes(op):
                self._repair(logical, mask)
        hits = np.flatnonzero(mask)
        if hits.size == 0:
            return False
        g, others = int(hits[0]), hits[1:]
        if others.size:
            self._phase[others] = product_phase(self._phase[others], self._x[others], self._z[others],
                                                self._phase[g], self._x[g], self._z[g])
            self._x[others] ^= self._x[g]
            self._z[others] ^= self._z[g]
        self._x = np.delete(self._x, g, axis=0)
        self._z = np.delete(self._z, g, axis=0)
        self._phase = np.delete(self._phase, g)
        self._echelon = None
        return True

    def _repair(self, logical: TrackedLogical, mask: np.ndarray) -> None:
        """Multiply the logical by a generator product that absorbs the anticommutation."""
        hits = np.flatnonzero(mask)
        if hits.size == 0:
            logical.alive = False
            logger.debug(f'logical {logical.name} annihilated',
                         extra={'event': 'logical_dead', 'logical': logical.name})
            return
        g = int(hits[0])
        g_star = self.generator(g)
        if all(g_star.commutes(c) for c in logical.conjugates):
            logical.operator = logical.operator * g_star
            return
        rows = [mask.astype(np.uint8)]
        for conj in logical.conjugates:
            rows.append(anticommutation(self._x, self._z, conj.x, conj.z).astype(np.uint8))
        rhs = np.zeros(len(rows), dtype=np.uint8)
        rhs[0] = 1
        solution = gf2_solve(np.stack(rows), rhs)
        if solution is None:
            logical.alive = False
            logger.debug(f'logical {logical.name} annihilated',
                         extra={'event': 'logical_dead', 'logical': logical.name})
            return
        chosen = np.flatnonzero(solution)
        x, z, phase = sequence_product(self._x[chosen], self._z[chosen], self._phase[chosen])
        logical.operator = logical.operator * PauliOperator(self.n_qubits, x, z, phase)

    def logical_dead(self) -> dict:
        if not self.tracked_logicals:
            msg = 'no logicals are tracked on this state'
            logger.error(msg)
            raise RuntimeError(msg)
        return {t.name: not t.alive for t in self.tracked_logicals}

    # dense oracle

    def to_density_matrix(self) -> np.ndarray:
        """rho = 2^-L prod (1 + g) as a dense matrix; small L only."""
        if self.n_qubits > 10:
            raise ValueError(f'dense density matrix requested for {self.n_qubits} qubits')
        dim = 2 ** self.n_qubits
        rho = np.eye(dim, dtype=complex)
        for g in self.generators:
            rho = rho @ (np.eye(dim) + g.to_matrix())
        return rho / dim


def centralizer_membership_oracle(initial: MixedStabilizerState, kraus_ops: Sequence[PauliOperator],
                                  op: PauliOperator,
                                  final: Optional[MixedStabilizerState] = None) -> Membership:
    """Predict ``final.contains(op)`` from the initial group and the applied Kraus set.

    The final group is the subgroup of the initial one commuting with every
    applied Kraus operator. When the prediction is not a member, ``final`` (if
    given) only decides between NOT_MEMBER and ANTICOMMUTES.
    """
    base = initial.contains(op)
    if base.is_member and all(op.commutes(k) for k in kraus_ops):
        return base
    if final is not None and not final.commutes_with_all(op):
        return Membership.ANTICOMMUTES
    return Membership.NOT_MEMBER
