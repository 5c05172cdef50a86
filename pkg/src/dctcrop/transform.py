"""Orthonormal DCT-II (1-D and separable 2-D) and 8x8 block decomposition.

The 1-D transform of a length-N signal f is

    C(u) = a(u) * sum_x f(x) * cos(pi * (2x + 1) * u / (2N))

with a(0) = sqrt(1/N) and a(u>0) = sqrt(2/N), so the basis is orthonormal
and Parseval holds exactly. The 2-D block transform is the separable
application along both axes, realised as M @ B @ M.T with M the basis
matrix. All block coefficients are float64; no quantization anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

BLOCK_SIZE = 8


@lru_cache(maxsize=16)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis matrix M with M[u, x] = a(u)*cos(pi*(2x+1)u/2n)."""
    if n < 1:
        raise ValueError("DCT size must be at least 1")
    x = np.arange(n)
    u = np.arange(n)[:, None]
    m = np.cos(np.pi * (2 * x + 1) * u / (2 * n))
    m *= np.sqrt(2.0 / n)
    m[0, :] = np.sqrt(1.0 / n)
    m.setflags(write=False)
    return m


def _as_signal(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def dct_1d(signal) -> np.ndarray:
    """Forward 1-D DCT-II with orthonormal scaling."""
    f = _as_signal(signal, "signal")
    return dct_matrix(f.size) @ f


def idct_1d(coeffs) -> np.ndarray:
    """Exact inverse of dct_1d (the basis matrix is orthogonal, so M.T)."""
    c = _as_signal(coeffs, "coeffs")
    return dct_matrix(c.size).T @ c


def dct_2d_block(block) -> np.ndarray:
    """Separable 2-D DCT-II of one 8x8 block; coefficient (0, 0) is the DC term."""
    b = np.asarray(block, dtype=np.float64)
    if b.shape != (BLOCK_SIZE, BLOCK_SIZE):
        raise ValueError(f"block must be {BLOCK_SIZE}x{BLOCK_SIZE}, got {b.shape}")
    m = dct_matrix(BLOCK_SIZE)
    return m @ b @ m.T


@dataclass(frozen=True)
class DctBlock:
    """One transformed 8x8 tile and its block coordinates in the source plane."""

    coefficients: np.ndarray
    position: tuple[int, int]

    def __post_init__(self):
        if self.coefficients.shape != (BLOCK_SIZE, BLOCK_SIZE):
            raise ValueError("DctBlock needs an 8x8 coefficient matrix")


def block_dct(plane) -> np.ndarray:
    """Transform every full 8x8 tile of a plane.

    Returns an array of shape (rows//8, cols//8, 8, 8) in row-major block
    order. Trailing rows/columns that do not fill a block are discarded.
    """
    p = np.asarray(plane, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("plane must be a 2-D array")
    rows, cols = p.shape
    if rows < BLOCK_SIZE or cols < BLOCK_SIZE:
        raise ValueError(f"plane {rows}x{cols} smaller than one {BLOCK_SIZE}x{BLOCK_SIZE} block")
    nbr, nbc = rows // BLOCK_SIZE, cols // BLOCK_SIZE
    tiles = p[: nbr * BLOCK_SIZE, : nbc * BLOCK_SIZE]
    tiles = tiles.reshape(nbr, BLOCK_SIZE, nbc, BLOCK_SIZE).transpose(0, 2, 1, 3)
    m = dct_matrix(BLOCK_SIZE)
    return np.matmul(np.matmul(m, tiles), m.T)


def block_decompose(plane) -> list[DctBlock]:
    """Non-overlapping 8x8 tiling from (0, 0), each tile DCT-transformed."""
    coeffs = block_dct(plane)
    nbr, nbc = coeffs.shape[:2]
    return [
        DctBlock(coefficients=coeffs[r, c], position=(r, c))
        for r in range(nbr)
        for c in range(nbc)
    ]


def _zigzag_positions() -> tuple[tuple[int, int], ...]:
    # JPEG scan order: walk anti-diagonals, alternating direction.
    cells = [(r, c) for r in range(BLOCK_SIZE) for c in range(BLOCK_SIZE)]
    cells.sort(key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else -rc[0]))
    return tuple(cells)


#: All 64 block positions in zigzag order; index 0 is the DC term.
ZIGZAG_POSITIONS: tuple[tuple[int, int], ...] = _zigzag_positions()

#: Flat (row*8 + col) indices of the 63 AC positions, zigzag order.
AC_FLAT_INDICES: np.ndarray = np.array(
    [r * BLOCK_SIZE + c for r, c in ZIGZAG_POSITIONS[1:]], dtype=np.intp
)
