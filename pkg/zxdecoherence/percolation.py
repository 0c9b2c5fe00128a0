"""Bond-percolation view of a decoherence pattern.

The open ZX string between two vertices keeps a unit Renyi-2 correlator exactly
when the decohered links connect its endpoints; with the X-logicals in the
initial group the connecting path must also close up with the string into a
homologically trivial loop (mod 2), which the winding-aware union-find tracks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .channels import DecoherencePattern
from .lattice import TorusLattice, Vertex

logger = logging.getLogger('percolation-oracle')


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def __len__(self) -> int:
        return len(self.parent)

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb] or (self.size[ra] == self.size[rb] and rb < ra):
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def labels(self) -> np.ndarray:
        """Component labels numbered 0, 1, ... in order of each component's smallest element."""
        roots = [self.find(a) for a in range(len(self))]
        first: Dict[int, int] = {}
        for root in roots:
            first.setdefault(root, len(first))
        return np.array([first[r] for r in roots], dtype=np.int64)


class WindingUnionFind(UnionFind):
    """Union-find on torus vertices that also records unwrapped displacements.

    ``offset[a]`` is the displacement of ``a`` from its parent along tree links;
    each root keeps the set of mod-2 windings (bit 0: x, bit 1: y) spanned by
    the cycles inside its cluster.
    """

    def __init__(self, Lx: int, Ly: int):
        super().__init__(Lx * Ly)
        self.Lx = Lx
        self.Ly = Ly
        self.off_x = [0] * (Lx * Ly)
        self.off_y = [0] * (Lx * Ly)
        self.span = [frozenset({0}) for _ in range(Lx * Ly)]

    def find_with_offset(self, a: int) -> Tuple[int, int, int]:
        path = []
        node = a
        while self.parent[node] != node:
            path.append(node)
            node = self.parent[node]
        root = node
        acc_x = acc_y = 0
        for node in reversed(path):
            acc_x += self.off_x[node]
            acc_y += self.off_y[node]
            self.off_x[node], self.off_y[node] = acc_x, acc_y
            self.parent[node] = root
        if a == root:
            return root, 0, 0
        return root, self.off_x[a], self.off_y[a]

    def find(self, a: int) -> int:
        return self.find_with_offset(a)[0]

    def _winding(self, dx: int, dy: int) -> int:
        return (dx // self.Lx) % 2 | ((dy // self.Ly) % 2) << 1

    @staticmethod
    def _extend(span: frozenset, winding: int) -> frozenset:
        return span | frozenset(s ^ winding for s in span)

    def union_step(self, a: int, b: int, step: Tuple[int, int]) -> int:
        """Join a and b where b sits at a + step before wrapping."""
        ra, ax, ay = self.find_with_offset(a)
        rb, bx, by = self.find_with_offset(b)
        dx, dy = ax + step[0] - bx, ay + step[1] - by
        if ra == rb:
            winding = self._winding(dx, dy)
            if winding and winding not in self.span[ra]:
                self.span[ra] = self._extend(self.span[ra], winding)
            return ra
        if self.size[ra] < self.size[rb] or (self.size[ra] == self.size[rb] and rb < ra):
            ra, rb = rb, ra
            dx, dy = -dx, -dy
        # pos(rb) - pos(ra) = dx, dy
        self.parent[rb] = ra
        self.off_x[rb], self.off_y[rb] = dx, dy
        self.size[ra] += self.size[rb]
        merged = self.span[ra]
        for w in self.span[rb]:
            if w not in merged:
                merged = self._extend(merged, w)
        self.span[ra] = merged
        return ra

    def path_winding(self, a: int, b: int, displacement: Tuple[int, int]) -> Optional[int]:
        """Winding of (tree path a->b) closed with a string of the given displacement, or None."""
        ra, ax, ay = self.find_with_offset(a)
        rb, bx, by = self.find_with_offset(b)
        if ra != rb:
            return None
        return self._winding(bx - ax - displacement[0], by - ay - displacement[1])

    def cycle_span(self, a: int) -> frozenset:
        return self.span[self.find(a)]


@dataclass
class OpenBondGraph:
    """Torus vertices joined by the decohered links of one pattern."""

    lattice: TorusLattice
    pattern: DecoherencePattern = None
    forest: WindingUnionFind = field(init=False, repr=False)

    def __post_init__(self):
        if self.pattern is None:
            self.pattern = DecoherencePattern(self.lattice.Lx, self.lattice.Ly)
        if (self.pattern.Lx, self.pattern.Ly) != (self.lattice.Lx, self.lattice.Ly):
            raise ValueError('pattern and lattice sizes differ')
        self.forest = WindingUnionFind(self.lattice.Lx, self.lattice.Ly)
        for index in self.pattern:
            self._insert(index)

    @classmethod
    def from_pattern(cls, pattern: DecoherencePattern) -> 'OpenBondGraph':
        return cls(TorusLattice(pattern.Lx, pattern.Ly), pattern)

    def _insert(self, index: int) -> None:
        a, b = self.lattice.link_endpoints(index)
        step = (1, 0) if self.lattice.link_at(index).orientation == 0 else (0, 1)
        self.forest.union_step(self.lattice.vertex_index(*a), self.lattice.vertex_index(*b), step)

    def add_links(self, links: Iterable[int]) -> None:
        links = list(links)
        self.pattern = self.pattern.with_links(links)
        for index in links:
            self._insert(index)

    def connected(self, a: Vertex, b: Vertex) -> bool:
        return self.forest.connected(self.lattice.vertex_index(*a), self.lattice.vertex_index(*b))

    def labels(self) -> np.ndarray:
        return self.forest.labels()

    def string_survives(self, e1: Vertex, e2: Vertex, displacement: Optional[Tuple[int, int]] = None,
                        homology_aware: bool = True) -> bool:
        a = self.lattice.vertex_index(*e1)
        b = self.lattice.vertex_index(*e2)
        if not homology_aware:
            return self.forest.connected(a, b)
        if displacement is None:
            displacement = ((e2[0] - e1[0]) % self.lattice.Lx, (e2[1] - e1[1]) % self.lattice.Ly)
        winding = self.forest.path_winding(a, b, displacement)
        return winding is not None and winding in self.forest.cycle_span(a)


def predict_CII(pattern: DecoherencePattern, e1: Vertex, e2: Vertex, *,
                homology_aware: bool = True,
                displacement: Optional[Tuple[int, int]] = None,
                graph: Optional[OpenBondGraph] = None) -> int:
    """C^II of the ZX string joining e1 and e2, read off the pattern alone.

    ``homology_aware`` matches the initial state that includes the X-logicals;
    without it the answer is plain connectivity. ``displacement`` is the
    unwrapped (dx, dy) of the string, by default the +x-then-+y path.
    """
    e1 = (e1[0] % pattern.Lx, e1[1] % pattern.Ly)
    e2 = (e2[0] % pattern.Lx, e2[1] % pattern.Ly)
    if e1 == e2:
        msg = f'string endpoints coincide at {e1}'
        logger.error(msg)
        raise ValueError(msg)
    graph = OpenBondGraph.from_pattern(pattern) if graph is None else graph
    return int(graph.string_survives(e1, e2, displacement, homology_aware))


def predict_CI(pattern: DecoherencePattern, loop: Sequence[int],
               lattice: Optional[TorusLattice] = None) -> int:
    """1 iff no decohered link is shifted onto the loop."""
    lattice = TorusLattice(pattern.Lx, pattern.Ly) if lattice is None else lattice
    dangerous = set(lattice.unshifted(loop))
    return int(dangerous.isdisjoint(pattern.decohered))


def predict_CII_strings(pattern: DecoherencePattern, homology_aware: bool = True) -> np.ndarray:
    """predict_CII for every vertical chi^II string, in observables.chi_II_strings order."""
    graph = OpenBondGraph.from_pattern(pattern)
    return np.array([predict_CII(pattern, (ix, 0), (ix, n), homology_aware=homology_aware,
                                 displacement=(0, n), graph=graph)
                     for ix in range(pattern.Lx) for n in range(1, pattern.Ly - 2)], dtype=np.int64)


# bond percolation reference

class Estimate(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True)
class ThresholdEstimate:
    r_c: float
    stderr: float
    crossings: Tuple[float, ...]
    curves: Dict[int, List[float]]


def _square_bonds(Lx: int, Ly: int) -> Tuple[np.ndarray, np.ndarray]:
    """Endpoints of every link in flat-index order on an Lx x Ly torus."""
    cells = np.arange(Lx * Ly)
    y, x = np.divmod(cells, Lx)
    right = y * Lx + (x + 1) % Lx
    up = ((y + 1) % Ly) * Lx + x
    tails = np.repeat(cells, 2)
    heads = np.empty(2 * Lx * Ly, dtype=np.int64)
    heads[0::2] = right
    heads[1::2] = up
    return tails, heads


def _component_labels(open_mask: np.ndarray, tails: np.ndarray, heads: np.ndarray,
                      n_vertices: int) -> np.ndarray:
    """Connected-component labels of every sample, stacked as one block-diagonal graph."""
    samples = open_mask.shape[0]
    sample_idx, link_idx = np.nonzero(open_mask)
    rows = sample_idx * n_vertices + tails[link_idx]
    cols = sample_idx * n_vertices + heads[link_idx]
    total = samples * n_vertices
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(total, total))
    _, labels = connected_components(graph.tocsr(), directed=False)
    return labels.reshape(samples, n_vertices)


def _validate_reference(r: float, L: int, samples: int) -> None:
    if not 0.0 <= r <= 1.0:
        msg = f'bond probability must lie in [0, 1], got {r}'
        logger.error(msg)
        raise ValueError(msg)
    if L < 4 or samples < 1:
        msg = f'need L >= 4 and samples >= 1, got L={L}, samples={samples}'
        logger.error(msg)
        raise ValueError(msg)


def _estimate(hits: np.ndarray) -> Estimate:
    p = float(hits.mean())
    return Estimate(p, float(np.sqrt(p * (1 - p) / hits.size)))


def crossing_probability(r: float, L: int, samples: int, rng: np.random.Generator) -> Estimate:
    """Probability that (0, 0) and (L/2, L/2) share a cluster under i.i.d. open links."""
    _validate_reference(r, L, samples)
    tails, heads = _square_bonds(L, L)
    open_mask = rng.random((samples, tails.size)) < r
    labels = _component_labels(open_mask, tails, heads, L * L)
    far = (L // 2) * L + L // 2
    return _estimate(labels[:, 0] == labels[:, far])


def wrapping_probability(r: float, L: int, samples: int, rng: np.random.Generator) -> Estimate:
    """Probability of a cluster with odd x-winding, detected on the 2L x L cover."""
    _validate_reference(r, L, samples)
    open_mask = rng.random((samples, 2 * L * L)) < r
    # cover link (X, y) copies base link (X mod L, y)
    cells = np.arange(2 * L * L)
    y, X = np.divmod(cells, 2 * L)
    base_cell = y * L + X % L
    cover_links = np.empty(4 * L * L, dtype=np.int64)
    cover_links[0::2] = 2 * base_cell
    cover_links[1::2] = 2 * base_cell + 1
    tails, heads = _square_bonds(2 * L, L)
    labels = _component_labels(open_mask[:, cover_links], tails, heads, 2 * L * L)
    base = np.arange(L * L)
    by, bx = np.divmod(base, L)
    lower = by * 2 * L + bx
    upper = lower + L
    return _estimate((labels[:, lower] == labels[:, upper]).any(axis=1))


def _crossing(r_grid: np.ndarray, a: np.ndarray, b: np.ndarray) -> Optional[float]:
    diff = np.asarray(b) - np.asarray(a)
    for i in range(len(r_grid) - 1):
        if diff[i] == 0:
            return float(r_grid[i])
        if diff[i] * diff[i + 1] < 0:
            t = diff[i] / (diff[i] - diff[i + 1])
            return float(r_grid[i] + t * (r_grid[i + 1] - r_grid[i]))
    return None


def estimate_threshold(sizes: Sequence[int], r_grid: Sequence[float], samples: int,
                       rng: np.random.Generator, kind: str = 'wrapping') -> ThresholdEstimate:
    """Percolation threshold from the crossings of curves for consecutive sizes."""
    probability = {'wrapping': wrapping_probability, 'crossing': crossing_probability}.get(kind)
    if probability is None:
        raise ValueError(f"kind must be 'wrapping' or 'crossing', got {kind!r}")
    sizes = sorted(sizes)
    if len(sizes) < 2:
        raise ValueError('threshold estimate needs at least two sizes')
    r_grid = np.asarray(sorted(r_grid), dtype=float)
    curves = {L: [probability(r, L, samples, rng).value for r in r_grid] for L in sizes}
    crossings = []
    for small, large in zip(sizes, sizes[1:]):
        point = _crossing(r_grid, curves[small], curves[large])
        if point is not None:
            crossings.append(point)
    if not crossings:
        msg = f'no curve crossing found on r grid [{r_grid[0]}, {r_grid[-1]}]'
        logger.error(msg)
        raise ValueError(msg)
    stderr = float(np.std(crossings, ddof=1) / np.sqrt(len(crossings))) if len(crossings) > 1 else 0.0
    estimate = ThresholdEstimate(float(np.mean(crossings)), stderr, tuple(crossings), curves)
    logger.info(f'percolation threshold {estimate.r_c:.4f} +- {estimate.stderr:.4f}',
                extra={'event': 'threshold', 'kind': kind, 'sizes': sizes})
    return estimate
