"""GF(2) linear algebra on dense 0/1 matrices."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np


def to_gf2(matrix) -> np.ndarray:
    return np.array(matrix, dtype=np.uint8) % 2


@dataclass(frozen=True)
class RowReduceResult:
    matrix: np.ndarray
    rank: int
    pivots: Tuple[int, ...]


def gf2_row_reduce(matrix) -> RowReduceResult:
    """Reduced row-echelon form over GF(2)."""
    mat = to_gf2(matrix)
    if mat.ndim != 2:
        raise ValueError(f'expected a 2-d matrix, got shape {mat.shape}')
    m, n = mat.shape
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        hits = np.flatnonzero(mat[row:, col])
        if hits.size == 0:
            continue
        pivot = row + int(hits[0])
        if pivot != row:
            mat[[row, pivot]] = mat[[pivot, row]]
        mask = mat[:, col].astype(bool)
        mask[row] = False
        mat[mask] ^= mat[row]
        pivots.append(col)
        row += 1
    return RowReduceResult(matrix=mat, rank=len(pivots), pivots=tuple(pivots))


def gf2_rank(matrix) -> int:
    return gf2_row_reduce(matrix).rank


def gf2_solve(matrix, rhs) -> Optional[np.ndarray]:
    """One solution s of matrix @ s = rhs over GF(2), or None if inconsistent.

    Free variables are set to zero, so the solution is deterministic.
    """
    mat = to_gf2(matrix)
    vec = to_gf2(rhs).reshape(-1, 1)
    if mat.shape[0] != vec.shape[0]:
        raise ValueError(f'rhs length {vec.shape[0]} does not match {mat.shape[0]} rows')
    n = mat.shape[1]
    reduced = gf2_row_reduce(np.concatenate([mat, vec], axis=1))
    if reduced.pivots and reduced.pivots[-1] == n:
        return None
    solution = np.zeros(n, dtype=np.uint8)
    for row, col in enumerate(reduced.pivots):
        solution[col] = reduced.matrix[row, n]
    return solution


def commutation_matrix(x_bits: np.ndarray, z_bits: np.ndarray) -> np.ndarray:
    """Pairwise symplectic products of rows, J[a, b] = x_a.z_b + z_a.x_b mod 2.

    Float matmul keeps this on BLAS; counts stay far below 2^24 so it is exact.
    """
    xf = np.asarray(x_bits, dtype=np.float32)
    zf = np.asarray(z_bits, dtype=np.float32)
    counts = xf @ zf.T + zf @ xf.T
    return (np.rint(counts).astype(np.int64) % 2).astype(np.uint8)
