"""Torus geometry, the delta shift and toric-code operator constructors.

Conventions (vertex (x, y), periodic in both directions):

* ``h(x, y)`` joins (x, y)-(x+1, y), midpoint (x+1/2, y);
  ``v(x, y)`` joins (x, y)-(x, y+1), midpoint (x, y+1/2).
* flat link index = 2 (y Lx + x) + (0 for horizontal, 1 for vertical).
* star (x, y) = {h(x,y), h(x-1,y), v(x,y), v(x,y-1)};
  plaquette q(x, y) = {h(x,y), h(x,y+1), v(x,y), v(x+1,y)}, centre (x+1/2, y+1/2).
* delta = (1/2, -1/2): h(x, y) -> v(x+1, y-1), v(x, y) -> h(x, y);
  vertex (x, y) + delta is the centre of q(x, y-1).
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from .pauli import PauliOperator, pack_bits
from .stabilizer import MixedStabilizerState, TrackedLogical

logger = logging.getLogger('toric-lattice')

Vertex = Tuple[int, int]


class Orientation(enum.IntEnum):
    HORIZONTAL = 0
    VERTICAL = 1


class LinkIndex(NamedTuple):
    x: int
    y: int
    orientation: Orientation


@dataclass(frozen=True)
class TorusLattice:
    """Lx x Ly vertices on a torus with one qubit per link (2 Lx Ly qubits)."""

    Lx: int
    Ly: int

    def __post_init__(self):
        if self.Lx < 3 or self.Ly < 3:
            msg = f'torus needs Lx, Ly >= 3, got ({self.Lx}, {self.Ly})'
            logger.error(msg)
            raise ValueError(msg)

    @property
    def n_qubits(self) -> int:
        return 2 * self.Lx * self.Ly

    @property
    def n_vertices(self) -> int:
        return self.Lx * self.Ly

    # indexing

    def h(self, x: int, y: int) -> int:
        return 2 * ((y % self.Ly) * self.Lx + (x % self.Lx))

    def v(self, x: int, y: int) -> int:
        return 2 * ((y % self.Ly) * self.Lx + (x % self.Lx)) + 1

    def link_index(self, link: LinkIndex) -> int:
        if not (0 <= link.x < self.Lx and 0 <= link.y < self.Ly):
            raise IndexError(f'link {link} outside {self.Lx}x{self.Ly} torus')
        return 2 * (link.y * self.Lx + link.x) + int(link.orientation)

    def link_at(self, index: int) -> LinkIndex:
        if not 0 <= index < self.n_qubits:
            raise IndexError(f'link index {index} out of range')
        cell, orientation = divmod(int(index), 2)
        y, x = divmod(cell, self.Lx)
        return LinkIndex(x, y, Orientation(orientation))

    def vertex_index(self, x: int, y: int) -> int:
        return (y % self.Ly) * self.Lx + (x % self.Lx)

    def link_endpoints(self, index: int) -> Tuple[Vertex, Vertex]:
        """Endpoints (a, b) with b = a + (1, 0) or a + (0, 1) before wrapping."""
        link = self.link_at(index)
        if link.orientation is Orientation.HORIZONTAL:
            return (link.x, link.y), ((link.x + 1) % self.Lx, link.y)
        return (link.x, link.y), (link.x, (link.y + 1) % self.Ly)

    def _vertex(self, x: int, y: int) -> None:
        if not (0 <= x < self.Lx and 0 <= y < self.Ly):
            raise IndexError(f'coords ({x}, {y}) outside {self.Lx}x{self.Ly} torus')

    # delta shift

    def shift_by_delta(self, link: LinkIndex) -> LinkIndex:
        if link.orientation is Orientation.HORIZONTAL:
            return LinkIndex((link.x + 1) % self.Lx, (link.y - 1) % self.Ly, Orientation.VERTICAL)
        return LinkIndex(link.x, link.y, Orientation.HORIZONTAL)

    def shift_index(self, index: int) -> int:
        return int(self.delta_permutation[index])

    @cached_property
    def delta_permutation(self) -> np.ndarray:
        perm = np.array([self.link_index(self.shift_by_delta(self.link_at(i)))
                         for i in range(self.n_qubits)], dtype=np.int64)
        perm.setflags(write=False)
        return perm

    @cached_property
    def inverse_delta_permutation(self) -> np.ndarray:
        inverse = np.empty(self.n_qubits, dtype=np.int64)
        inverse[self.delta_permutation] = np.arange(self.n_qubits)
        inverse.setflags(write=False)
        return inverse

    def shifted(self, links: Iterable[int]) -> List[int]:
        return [int(self.delta_permutation[i]) for i in links]

    def unshifted(self, links: Iterable[int]) -> List[int]:
        return [int(self.inverse_delta_permutation[i]) for i in links]

    # local stabilizers

    def star_links(self, x: int, y: int) -> List[int]:
        return [self.h(x, y), self.h(x - 1, y), self.v(x, y), self.v(x, y - 1)]

    def plaquette_links(self, x: int, y: int) -> List[int]:
        return [self.h(x, y), self.h(x, y + 1), self.v(x, y), self.v(x + 1, y)]

    @staticmethod
    def vertex_plus_delta(x: int, y: int) -> Vertex:
        return x, y - 1

    def star_operator(self, x: int, y: int) -> PauliOperator:
        self._vertex(x, y)
        return PauliOperator.from_support(self.n_qubits, x=self.star_links(x, y))

    def plaquette_operator(self, x: int, y: int) -> PauliOperator:
        self._vertex(x, y)
        return PauliOperator.from_support(self.n_qubits, z=self.plaquette_links(x, y))

    def w_operator(self, x: int, y: int) -> PauliOperator:
        """W_v = A_v B_{v+delta}, the exact product."""
        qx, qy = self.vertex_plus_delta(x, y)
        return self.star_operator(x, y) * self.plaquette_operator(qx, qy % self.Ly)

    # link-set operators

    def _parity(self, links: Iterable[int]) -> np.ndarray:
        bits = np.zeros(self.n_qubits, dtype=np.uint8)
        idx = np.asarray(list(links), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_qubits):
            raise IndexError(f'link index out of range in {sorted(set(idx.tolist()))}')
        np.bitwise_xor.at(bits, idx, 1)
        return bits

    def _ordered(self, first: str, first_links: Iterable[int], second_links: Iterable[int]) -> PauliOperator:
        """(prod of `first` on first_links)(prod of the other type on second_links).

        An odd number of overlapping sites makes the product anti-Hermitian; it is
        then multiplied by i so every builder returns a Hermitian operator.
        """
        a = self._parity(first_links)
        b = self._parity(second_links)
        overlap = int(np.count_nonzero(a & b))
        if first == 'X':
            phase = -overlap + overlap % 2
            return PauliOperator.from_bits(a, b, phase)
        phase = overlap + overlap % 2
        return PauliOperator.from_bits(b, a, phase)

    def z_operator(self, links: Iterable[int]) -> PauliOperator:
        return PauliOperator.from_bits(np.zeros(self.n_qubits, np.uint8), self._parity(links))

    def x_operator(self, links: Iterable[int]) -> PauliOperator:
        return PauliOperator.from_bits(self._parity(links), np.zeros(self.n_qubits, np.uint8))

    def zx_string(self, links: Iterable[int]) -> PauliOperator:
        """prod Z_l X_{l+delta} over the link set."""
        links = list(links)
        return self._ordered('Z', links, self.shifted(links))

    def xz_string(self, links: Iterable[int]) -> PauliOperator:
        """prod X_l Z_{l+delta} over the link set."""
        links = list(links)
        return self._ordered('X', links, self.shifted(links))

    def wilson_Z(self, loop: Iterable[int]) -> PauliOperator:
        loop = self.require_cycle(loop)
        return self.z_operator(loop)

    def thooft_X(self, loop: Iterable[int]) -> PauliOperator:
        loop = self.require_dual_cycle(loop)
        return self.x_operator(loop)

    def zx_loop(self, loop: Iterable[int]) -> PauliOperator:
        return self.zx_string(self.require_cycle(loop))

    def xz_loop(self, loop: Iterable[int]) -> PauliOperator:
        return self.xz_string(self.require_dual_cycle(loop))

    def require_cycle(self, links: Iterable[int]) -> List[int]:
        """Links of a closed chain on the v-lattice (even degree at every vertex)."""
        links = list(links)
        degree = np.zeros(self.n_vertices, dtype=np.int64)
        for index in links:
            a, b = self.link_endpoints(index)
            degree[self.vertex_index(*a)] += 1
            degree[self.vertex_index(*b)] += 1
        if np.any(degree % 2):
            msg = 'open loop: link set has odd-degree vertices'
            logger.error(msg)
            raise ValueError(msg)
        return links

    def require_dual_cycle(self, links: Iterable[int]) -> List[int]:
        """Links crossed by a closed path on the q-lattice (even count per plaquette)."""
        links = list(links)
        counts = np.zeros(self.n_vertices, dtype=np.int64)
        members = set(links)
        for qy in range(self.Ly):
            for qx in range(self.Lx):
                counts[self.vertex_index(qx, qy)] = sum(l in members for l in self.plaquette_links(qx, qy))
        if np.any(counts % 2):
            msg = 'open loop: link set is not closed on the q-lattice'
            logger.error(msg)
            raise ValueError(msg)
        return links

    # paths and loops

    def _step(self, a: Vertex, b: Vertex) -> int:
        ax, ay = a
        bx, by = b
        dx = (bx - ax) % self.Lx
        dy = (by - ay) % self.Ly
        if dy == 0 and dx == 1:
            return self.h(ax, ay)
        if dy == 0 and dx == self.Lx - 1:
            return self.h(bx, by)
        if dx == 0 and dy == 1:
            return self.v(ax, ay)
        if dx == 0 and dy == self.Ly - 1:
            return self.v(bx, by)
        msg = f'non-adjacent path step {a} -> {b}'
        logger.error(msg)
        raise ValueError(msg)

    def path_links(self, vertices: Sequence[Vertex], closed: bool = False) -> List[int]:
        """Links along a vertex path on the v-lattice."""
        vertices = [(x % self.Lx, y % self.Ly) for x, y in vertices]
        if closed and (len(vertices) < 2 or vertices[0] != vertices[-1]):
            raise ValueError('open loop: first and last vertex differ')
        return [self._step(a, b) for a, b in zip(vertices, vertices[1:])]

    def _dual_step(self, a: Vertex, b: Vertex) -> int:
        ax, ay = a
        bx, by = b
        dx = (bx - ax) % self.Lx
        dy = (by - ay) % self.Ly
        if dy == 0 and dx == 1:
            return self.v(ax + 1, ay)
        if dy == 0 and dx == self.Lx - 1:
            return self.v(ax, ay)
        if dx == 0 and dy == 1:
            return self.h(ax, ay + 1)
        if dx == 0 and dy == self.Ly - 1:
            return self.h(ax, ay)
        msg = f'non-adjacent dual path step q{a} -> q{b}'
        logger.error(msg)
        raise ValueError(msg)

    def dual_path_links(self, plaquettes: Sequence[Vertex], closed: bool = False) -> List[int]:
        """Links crossed by a plaquette path on the q-lattice."""
        plaquettes = [(x % self.Lx, y % self.Ly) for x, y in plaquettes]
        if closed and (len(plaquettes) < 2 or plaquettes[0] != plaquettes[-1]):
            raise ValueError('open loop: first and last plaquette differ')
        return [self._dual_step(a, b) for a, b in zip(plaquettes, plaquettes[1:])]

    def square_loop(self, k: int, anchor: Vertex = (0, 0)) -> List[int]:
        """Boundary of the k x k square whose lower-left corner is ``anchor``."""
        if not 1 <= k <= min(self.Lx, self.Ly) - 1:
            raise ValueError(f'square loop of size {k} does not fit a {self.Lx}x{self.Ly} torus')
        x0, y0 = anchor
        links = [self.h(x0 + i, y0) for i in range(k)]
        links += [self.h(x0 + i, y0 + k) for i in range(k)]
        links += [self.v(x0, y0 + j) for j in range(k)]
        links += [self.v(x0 + k, y0 + j) for j in range(k)]
        return sorted(links)

    def coboundary(self, vertices: Iterable[Vertex]) -> List[int]:
        """Links with exactly one endpoint in the vertex set."""
        inside = {self.vertex_index(x, y) for x, y in vertices}
        links = []
        for index in range(self.n_qubits):
            a, b = self.link_endpoints(index)
            if (self.vertex_index(*a) in inside) != (self.vertex_index(*b) in inside):
                links.append(index)
        return links

    def dual_square_loop(self, k: int, anchor: Vertex = (0, 0)) -> List[int]:
        """q-lattice loop around the k x k block of vertices starting at ``anchor``."""
        if not 1 <= k <= min(self.Lx, self.Ly) - 1:
            raise ValueError(f'dual square loop of size {k} does not fit a {self.Lx}x{self.Ly} torus')
        x0, y0 = anchor
        return self.coboundary((x0 + i, y0 + j) for i in range(k) for j in range(k))

    def vertical_path(self, ix: int, n: int) -> List[int]:
        """Links v(ix, 0..n-1), joining (ix, 0) to (ix, n)."""
        if not 1 <= n <= self.Ly - 1:
            raise ValueError(f'vertical path of length {n} does not fit Ly={self.Ly}')
        return [self.v(ix, j) for j in range(n)]

    def lattice_path(self, start: Vertex, end: Vertex) -> List[int]:
        """Straight path from ``start``: +x steps first, then +y steps."""
        (x1, y1), (x2, y2) = start, end
        dx = (x2 - x1) % self.Lx
        dy = (y2 - y1) % self.Ly
        links = [self.h(x1 + i, y1) for i in range(dx)]
        links += [self.v(x2, y1 + j) for j in range(dy)]
        return links

    def dual_lattice_path(self, start: Vertex, end: Vertex) -> List[int]:
        """Crossed links of the plaquette path from q(start) to q(end), +x then +y."""
        (x1, y1), (x2, y2) = start, end
        dx = (x2 - x1) % self.Lx
        dy = (y2 - y1) % self.Ly
        links = [self.v(x1 + i + 1, y1) for i in range(dx)]
        links += [self.h(x2, y1 + j + 1) for j in range(dy)]
        return links

    def logical_X(self, direction: str) -> PauliOperator:
        """X along an x- or y-directed non-contractible loop of the q-lattice."""
        return self.x_operator(self.logical_loop(direction))

    def logical_Z(self, direction: str) -> PauliOperator:
        """Z along an x- or y-directed non-contractible loop of the v-lattice."""
        if direction == 'x':
            return self.z_operator([self.h(x, 0) for x in range(self.Lx)])
        if direction == 'y':
            return self.z_operator([self.v(0, y) for y in range(self.Ly)])
        raise ValueError(f"direction must be 'x' or 'y', got {direction!r}")

    def logical_loop(self, direction: str) -> List[int]:
        """Crossed links of the non-contractible q-lattice loop in ``direction``."""
        if direction == 'x':
            return [self.v(x, 0) for x in range(self.Lx)]
        if direction == 'y':
            return [self.h(0, y) for y in range(self.Ly)]
        raise ValueError(f"direction must be 'x' or 'y', got {direction!r}")

    def region_links(self, k_A: int) -> List[int]:
        """Links with midpoints in [0, 2 k_A] x [0, 2], anchored at vertex (0, 0)."""
        if k_A < 0 or 2 * k_A > self.Lx - 2 or self.Ly < 4:
            msg = f'region k_A={k_A} wraps a {self.Lx}x{self.Ly} torus'
            logger.error(msg)
            raise ValueError(msg)
        links = [self.h(x, y) for x in range(2 * k_A) for y in range(3)]
        links += [self.v(x, y) for x in range(2 * k_A + 1) for y in range(2)]
        return sorted(links)

    # generator matrices

    def _rows(self, supports: Sequence[Sequence[int]]) -> np.ndarray:
        bits = np.zeros((len(supports), self.n_qubits), dtype=np.uint8)
        for row, links in enumerate(supports):
            np.bitwise_xor.at(bits[row], np.asarray(links, dtype=np.int64), 1)
        return bits


def build_initial_state(lattice: TorusLattice, with_logicals: bool = True,
                        validate: bool = True) -> MixedStabilizerState:
    """Toric-code state: all A_v but v0=(0,0), all B_q but q0=q(0,0), optionally the X-logicals.

    Both X-logicals are registered as tracked logicals in either variant; the
    Z-logicals serve as their conjugates.
    """
    stars = [lattice.star_links(x, y) for y in range(lattice.Ly) for x in range(lattice.Lx)][1:]
    plaquettes = [lattice.plaquette_links(x, y) for y in range(lattice.Ly) for x in range(lattice.Lx)][1:]
    x_supports = stars + [[] for _ in plaquettes]
    z_supports = [[] for _ in stars] + plaquettes
    if with_logicals:
        x_supports += [lattice.logical_loop('x'), lattice.logical_loop('y')]
        z_supports += [[], []]
    x_rows = pack_bits(lattice._rows(x_supports))
    z_rows = pack_bits(lattice._rows(z_supports))
    phases = np.zeros(len(x_supports), dtype=np.int64)
    conjugates = (lattice.logical_Z('x'), lattice.logical_Z('y'))
    tracked = [TrackedLogical('x', lattice.logical_X('x'), conjugates),
               TrackedLogical('y', lattice.logical_X('y'), conjugates)]
    state = MixedStabilizerState.from_arrays(lattice.n_qubits, x_rows, z_rows, phases, tracked,
                                             validate=validate)
    logger.debug(f'initial state on {lattice.Lx}x{lattice.Ly}: k={state.k}',
                 extra={'event': 'initial_state', 'with_logicals': with_logicals, 'k': state.k})
    return state
