"""Real-steering-vector (RSV) dictionary built from an auxiliary-source sweep."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .array_model import (ArrayConfig, complex_noise, corrupted_steering_matrix,
                          steering_matrix)
from .frequency import dft_all_antennas

# angles per vectorised sweep block; bounds peak memory at N=900, L0=512
_SWEEP_BLOCK = 64


@dataclass(frozen=True)
class AngularGrid:
    """``angles[n-1] = -pi/2 + n*pi/N`` for ``n = 1..N``."""

    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("grid size must be positive")

    @property
    def angles(self) -> np.ndarray:
        return -np.pi / 2 + np.arange(1, self.N + 1) * np.pi / self.N

    @property
    def degrees(self) -> np.ndarray:
        # computed in degrees so that whole-degree grid points stay exact
        return -90.0 + np.arange(1, self.N + 1) * 180.0 / self.N

    @property
    def step(self) -> float:
        return np.pi / self.N

    def index_of(self, theta: float) -> int:
        """0-based index of the grid angle nearest ``theta`` (radians)."""
        return int(np.argmin(np.abs(self.angles - theta)))

    def __len__(self):
        return self.N


@dataclass(frozen=True)
class RsvBasis:
    matrix: np.ndarray
    grid: AngularGrid
    normalized: bool = False

    def __post_init__(self):
        if self.matrix.shape[1] != self.grid.N:
            raise ValueError("basis column count must equal grid size")

    @property
    def num_antennas(self) -> int:
        return self.matrix.shape[0]


def sweep_and_build(config: ArrayConfig, grid: AngularGrid, aux_bin: int, num_snapshots: int,
                    snr_db: float = 30.0, seed=None, *, amplitude: complex = 1.0,
                    repeats: int = 1) -> RsvBasis:
    """Sweep an auxiliary tone over every grid angle and collect DFT peaks.

    For each grid angle the array receives ``b(theta_n) s0(l) + n(l)`` with
    ``s0(l) = amplitude * exp(2j*pi*aux_bin*l/L0)``; the column at
    ``aux_bin`` of its L0-point DFT becomes basis column ``n``.  With
    ``repeats > 1`` the peak columns of independent repeats are averaged.
    The result is unnormalised; see :func:`normalize`.
    """
    if not 1 <= aux_bin <= num_snapshots:
        raise ValueError(f"auxiliary bin {aux_bin} outside [1, {num_snapshots}]")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    M = config.num_antennas
    if grid.N < M:
        warnings.warn(f"grid size N={grid.N} is smaller than M={M}", stacklevel=2)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    B = corrupted_steering_matrix(config, grid.angles)
    ell = np.arange(1, num_snapshots + 1)
    s0 = amplitude * np.exp(2j * np.pi * aux_bin * ell / num_snapshots)
    sigma2 = 0.0 if np.isposinf(snr_db) else abs(amplitude) ** 2 / 10 ** (snr_db / 10)

    psi = np.zeros((M, grid.N), dtype=complex)
    for _ in range(repeats):
        for start in range(0, grid.N, _SWEEP_BLOCK):
            cols = slice(start, min(start + _SWEEP_BLOCK, grid.N))
            x = B[:, cols].T[:, :, None] * s0[None, None, :]       # (n, M, L0)
            if sigma2 > 0:
                x = x + complex_noise(rng, x.shape, sigma2)
            X = dft_all_antennas(x.reshape(-1, num_snapshots)).column(aux_bin)
            psi[:, cols] += X.reshape(-1, M).T
    return RsvBasis(psi / repeats, grid, normalized=False)


def normalize(basis: RsvBasis, tol: float = 1e-12) -> RsvBasis:
    """Divide every column by its first (reference-antenna) entry."""
    first = basis.matrix[0]
    bad = np.flatnonzero(np.abs(first) < tol)
    if bad.size:
        deg = basis.grid.degrees[bad[0]]
        raise ValueError(f"reference entry vanishes at grid angle {deg:.4f} deg "
                         f"(column {bad[0] + 1}); sweep is corrupted")
    matrix = basis.matrix / first[None, :]
    matrix[0] = 1.0
    return RsvBasis(matrix, basis.grid, normalized=True)


def nominal_basis(config: ArrayConfig, grid: AngularGrid) -> RsvBasis:
    """Error-free dictionary of ideal steering vectors."""
    return RsvBasis(steering_matrix(config, grid.angles), grid, normalized=True)


def calibrate(config: ArrayConfig, grid: AngularGrid, aux_bin: int = 1,
              num_snapshots: int = 512, snr_db: float = 30.0, seed=None,
              repeats: int = 1) -> RsvBasis:
    """Sweep and normalise in one call."""
    return normalize(sweep_and_build(config, grid, aux_bin, num_snapshots, snr_db, seed,
                                     repeats=repeats))
