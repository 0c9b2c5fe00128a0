"""Signed Pauli strings in bit-packed binary-symplectic form.

An operator on n qubits is stored as two packed bit-vectors ``x`` and ``z``
(little-endian uint64 words, qubit j in word j // 64, bit j % 64) and a phase
exponent ``phase`` mod 4::

    P = i^phase * sigma(x_0, z_0) (x) ... (x) sigma(x_{n-1}, z_{n-1})

with sigma(0,0)=I, sigma(1,0)=X, sigma(0,1)=Z and sigma(1,1)=Y. Internally a
product is evaluated in X-then-Z order, sigma(x, z) = i^(x.z) X^x Z^z, which
gives the product rule implemented in :func:`product_phase`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger('pauli-core')

WORD_BITS = 64

_CHARS = {(0, 0): 'I', (1, 0): 'X', (0, 1): 'Z', (1, 1): 'Y'}
_BITS = {c: xz for xz, c in _CHARS.items()}
_PREFIX = {0: '+', 1: '+i', 2: '-', 3: '-i'}
_PHASE_OF = {p: k for k, p in _PREFIX.items()}

_SINGLE = {
    'I': np.eye(2, dtype=complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
}


class DimensionError(ValueError):
    """Operands act on different numbers of qubits."""


def n_words(n_qubits: int) -> int:
    return (n_qubits + WORD_BITS - 1) // WORD_BITS


def pack_bits(bits) -> np.ndarray:
    """Pack a 0/1 array of shape (..., n) into uint64 words of shape (..., n_words(n))."""
    bits = np.asarray(bits, dtype=np.uint8) & 1
    n = bits.shape[-1]
    words = n_words(n)
    if words == 0:
        return np.zeros(bits.shape[:-1] + (0,), dtype=np.uint64)
    padded = np.zeros(bits.shape[:-1] + (words * WORD_BITS,), dtype=np.uint8)
    padded[..., :n] = bits
    packed = np.ascontiguousarray(np.packbits(padded, axis=-1, bitorder='little'))
    return packed.view('<u8').astype(np.uint64)


def unpack_bits(words, n_qubits: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; returns uint8 0/1 array of shape (..., n_qubits)."""
    words = np.ascontiguousarray(np.asarray(words, dtype=np.uint64).astype('<u8'))
    if words.shape[-1] == 0:
        return np.zeros(words.shape[:-1] + (n_qubits,), dtype=np.uint8)
    raw = words.view(np.uint8)
    return np.unpackbits(raw, axis=-1, bitorder='little')[..., :n_qubits]


def popcount(words: np.ndarray) -> np.ndarray:
    """Number of set bits summed over the last (word) axis."""
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def anticommutation(x_a, z_a, x_b, z_b) -> np.ndarray:
    """Symplectic form x_a.z_b + z_a.x_b mod 2; broadcasts over leading axes."""
    return (popcount(x_a & z_b) + popcount(z_a & x_b)) & 1


def product_phase(p_a, x_a, z_a, p_b, x_b, z_b) -> np.ndarray:
    """Phase exponent of a*b for packed operands (broadcasts over rows)."""
    w_ab = popcount((x_a ^ x_b) & (z_a ^ z_b))
    return (np.asarray(p_a) + np.asarray(p_b) + popcount(x_a & z_a) + popcount(x_b & z_b)
            - w_ab + 2 * popcount(z_a & x_b)) % 4


def sequence_product(xs: np.ndarray, zs: np.ndarray, phases: np.ndarray):
    """Ordered product rows[0] * rows[1] * ... of packed operators.

    Returns:
        (x, z, phase) of the product.
    """
    if xs.shape[0] == 0:
        words = xs.shape[-1]
        return np.zeros(words, dtype=np.uint64), np.zeros(words, dtype=np.uint64), 0
    z_before = np.zeros_like(zs)
    z_before[1:] = np.bitwise_xor.accumulate(zs, axis=0)[:-1]
    cross = int(popcount(z_before & xs).sum())
    x = np.bitwise_xor.reduce(xs, axis=0)
    z = np.bitwise_xor.reduce(zs, axis=0)
    total = int(np.sum(phases)) + int(popcount(xs & zs).sum()) + 2 * cross - int(popcount(x & z))
    return x, z, total % 4


@dataclass(frozen=True, eq=False)
class PauliOperator:
    """Immutable signed Pauli string; see the module docstring for the encoding."""

    n_qubits: int
    x: np.ndarray
    z: np.ndarray
    phase: int = 0

    def __post_init__(self):
        if self.n_qubits < 0:
            raise ValueError(f'n_qubits must be non-negative, got {self.n_qubits}')
        words = n_words(self.n_qubits)
        x = np.array(self.x, dtype=np.uint64, copy=True).reshape(-1)
        z = np.array(self.z, dtype=np.uint64, copy=True).reshape(-1)
        if x.shape != (words,) or z.shape != (words,):
            raise DimensionError(
                f'expected {words} words for {self.n_qubits} qubits, got x={x.shape} z={z.shape}'
            )
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'z', z)
        object.__setattr__(self, 'phase', int(self.phase) % 4)

    # constructors

    @classmethod
    def identity(cls, n_qubits: int) -> 'PauliOperator':
        words = n_words(n_qubits)
        return cls(n_qubits, np.zeros(words, np.uint64), np.zeros(words, np.uint64), 0)

    @classmethod
    def from_bits(cls, x_bits, z_bits, phase: int = 0) -> 'PauliOperator':
        x_bits = np.asarray(x_bits)
        z_bits = np.asarray(z_bits)
        if x_bits.shape != z_bits.shape or x_bits.ndim != 1:
            raise DimensionError(f'x/z bit-vectors differ: {x_bits.shape} vs {z_bits.shape}')
        return cls(x_bits.shape[0], pack_bits(x_bits), pack_bits(z_bits), phase)

    @classmethod
    def from_support(cls, n_qubits: int, x: Iterable[int] = (), z: Iterable[int] = (),
                     phase: int = 0) -> 'PauliOperator':
        """X on qubits ``x`` and Z on qubits ``z``; a qubit in both carries Y.

        Indices listed twice cancel (mod 2), which is what link-set products need.
        """
        x_bits = np.zeros(n_qubits, dtype=np.uint8)
        z_bits = np.zeros(n_qubits, dtype=np.uint8)
        for idx in x:
            _check_index(idx, n_qubits)
            x_bits[idx] ^= 1
        for idx in z:
            _check_index(idx, n_qubits)
            z_bits[idx] ^= 1
        return cls.from_bits(x_bits, z_bits, phase)

    @classmethod
    def from_string(cls, text: str) -> 'PauliOperator':
        """Parse "+XIZY", "-ZZ", "+iX" or "-iY"."""
        text = text.strip()
        for prefix in ('+i', '-i', '+', '-'):
            if text.startswith(prefix):
                body = text[len(prefix):]
                phase = _PHASE_OF[prefix]
                break
        else:
            raise ValueError(f'Pauli string must start with a sign prefix: {text!r}')
        try:
            bits = [_BITS[c] for c in body.upper()]
        except KeyError as exc:
            raise ValueError(f'invalid Pauli character {exc.args[0]!r} in {text!r}') from None
        x_bits = np.array([b[0] for b in bits], dtype=np.uint8)
        z_bits = np.array([b[1] for b in bits], dtype=np.uint8)
        return cls.from_bits(x_bits, z_bits, phase)

    # views

    @property
    def x_bits(self) -> np.ndarray:
        return unpack_bits(self.x, self.n_qubits)

    @property
    def z_bits(self) -> np.ndarray:
        return unpack_bits(self.z, self.n_qubits)

    @property
    def weight(self) -> int:
        return int(popcount(self.x | self.z))

    @property
    def is_hermitian(self) -> bool:
        return self.phase in (0, 2)

    @property
    def is_identity_string(self) -> bool:
        return not (self.x.any() or self.z.any())

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.x_bits | self.z_bits)

    # algebra

    def multiply(self, other: 'PauliOperator') -> 'PauliOperator':
        return multiply(self, other)

    __mul__ = multiply

    def commutes(self, other: 'PauliOperator') -> bool:
        return commutes(self, other)

    def restrict(self, qubits: Sequence[int]) -> 'PauliOperator':
        return restrict(self, qubits)

    def negate(self) -> 'PauliOperator':
        return PauliOperator(self.n_qubits, self.x, self.z, self.phase + 2)

    def to_matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix, qubit 0 as the leftmost tensor factor."""
        if self.n_qubits > 12:
            raise ValueError(f'dense matrix requested for {self.n_qubits} qubits')
        matrix = np.ones((1, 1), dtype=complex)
        for c in str(self).lstrip('+-i'):
            matrix = np.kron(matrix, _SINGLE[c])
        return (1j ** self.phase) * matrix

    def __str__(self) -> str:
        xb, zb = self.x_bits, self.z_bits
        body = ''.join(_CHARS[(int(a), int(b))] for a, b in zip(xb, zb))
        return _PREFIX[self.phase] + body

    def __repr__(self) -> str:
        return f'PauliOperator({str(self)!r})'

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return (self.n_qubits == other.n_qubits and self.phase == other.phase
                and np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z))

    def __hash__(self) -> int:
        return hash((self.n_qubits, self.phase, self.x.tobytes(), self.z.tobytes()))


def _check_index(idx: int, n_qubits: int) -> None:
    if not 0 <= idx < n_qubits:
        raise IndexError(f'qubit index {idx} out of range for {n_qubits} qubits')


def _check_sizes(a: PauliOperator, b: PauliOperator) -> None:
    if a.n_qubits != b.n_qubits:
        msg = f'size mismatch: {a.n_qubits} vs {b.n_qubits} qubits'
        logger.error(msg)
        raise DimensionError(msg)


def multiply(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    """Exact product a*b; x/z parts XOR and the phase is tracked mod 4."""
    _check_sizes(a, b)
    phase = int(product_phase(a.phase, a.x, a.z, b.phase, b.x, b.z))
    return PauliOperator(a.n_qubits, a.x ^ b.x, a.z ^ b.z, phase)


def commutes(a: PauliOperator, b: PauliOperator) -> bool:
    _check_sizes(a, b)
    return int(anticommutation(a.x, a.z, b.x, b.z)) == 0


def restrict(a: PauliOperator, qubits: Sequence[int]) -> PauliOperator:
    """Keep only the listed qubits, in the listed order; the phase is copied unchanged."""
    qubits = list(qubits)
    for idx in qubits:
        _check_index(idx, a.n_qubits)
    if len(set(qubits)) != len(qubits):
        raise ValueError(f'restrict needs distinct qubits, got {qubits}')
    cols = np.asarray(qubits, dtype=np.int64)
    return PauliOperator.from_bits(a.x_bits[cols], a.z_bits[cols], a.phase)


def product(operators: Sequence[PauliOperator], n_qubits: int | None = None) -> PauliOperator:
    """Ordered product of many operators."""
    operators = list(operators)
    if not operators:
        if n_qubits is None:
            raise ValueError('empty product needs n_qubits')
        return PauliOperator.identity(n_qubits)
    n = operators[0].n_qubits
    for op in operators[1:]:
        _check_sizes(operators[0], op)
    xs = np.stack([op.x for op in operators])
    zs = np.stack([op.z for op in operators])
    phases = np.array([op.phase for op in operators], dtype=np.int64)
    x, z, phase = sequence_product(xs, zs, phases)
    return PauliOperator(n, x, z, phase)
