"""Per-antenna DFT, spectral peak detection and peak accumulation.

DFT convention: bins and snapshots are both 1-based,

    X_m(w) = sum_{l=1}^{L} x_m(l) exp(-2j*pi*w*l/L),   w = 1..L,

so bin ``L`` is DC.  Column ``w - 1`` of :attr:`SpectrumMatrix.data` holds
bin ``w``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array_model import SnapshotMatrix

#: Bins whose aggregate power is below this fraction of the strongest bin
#: are not peak candidates (round-off floor of a noiseless spectrum).
POWER_FLOOR = 1e-12


@dataclass(frozen=True)
class SpectrumMatrix:
    data: np.ndarray

    @property
    def bin_count(self) -> int:
        return self.data.shape[1]

    def column(self, w: int) -> np.ndarray:
        if not 1 <= w <= self.bin_count:
            raise ValueError(f"bin {w} outside [1, {self.bin_count}]")
        return self.data[:, w - 1]

    def aggregate_power(self) -> np.ndarray:
        """Antenna-summed power ``P(w) = sum_m |X_m(w)|^2``, index ``w - 1``."""
        return np.sum(np.abs(self.data) ** 2, axis=0)


@dataclass(frozen=True)
class PeakMeasurement:
    vector: np.ndarray
    bins: tuple
    aggregate_power: float


def _phase_ramp(L: int) -> np.ndarray:
    # exp(-2j pi w / L) for w = 1..L maps numpy's 0-based sum onto l = 1..L
    return np.exp(-2j * np.pi * np.arange(1, L + 1) / L)


def dft_all_antennas(snapshots) -> SpectrumMatrix:
    """L-point DFT of every antenna row (FFT, ``O(M L log L)``)."""
    x = snapshots.data if isinstance(snapshots, SnapshotMatrix) else np.asarray(snapshots)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("expected an M x L matrix with L >= 1")
    L = x.shape[1]
    # numpy bin k sits at column k; bin w = L is numpy's k = 0
    spec = np.roll(np.fft.fft(x, axis=1), -1, axis=1)
    return SpectrumMatrix(spec * _phase_ramp(L)[None, :])


def inverse_dft(spectrum: SpectrumMatrix) -> SnapshotMatrix:
    """Inverse of :func:`dft_all_antennas`."""
    X = spectrum.data / _phase_ramp(spectrum.bin_count)[None, :]
    return SnapshotMatrix(np.fft.ifft(np.roll(X, 1, axis=1), axis=1))


def _circular_distance(a, b, L):
    d = np.abs(np.asarray(a) - b) % L
    return np.minimum(d, L - d)


def detect_peaks(spectrum: SpectrumMatrix, num_peaks: int, min_bin_separation: int = 2):
    """Greedy selection of the strongest bins of the aggregate power spectrum.

    After each pick, bins within ``min_bin_separation`` (circular distance)
    of it are suppressed.  Returns 1-based bins sorted by descending power,
    ties to the lower bin.
    """
    if num_peaks < 1 or min_bin_separation < 1:
        raise ValueError("num_peaks and min_bin_separation must be >= 1")
    power = spectrum.aggregate_power()
    L = power.size
    available = power > POWER_FLOOR * power.max() if power.max() > 0 else np.zeros(L, bool)
    # stable sort on -power: ties resolve to lower index
    order = np.argsort(-power, kind="stable")
    chosen = []
    for idx in order:
        if len(chosen) == num_peaks:
            break
        if not available[idx]:
            continue
        chosen.append(int(idx) + 1)
        available &= _circular_distance(np.arange(L), idx, L) > min_bin_separation
    if len(chosen) < num_peaks:
        raise ValueError(
            f"only {len(chosen)} spectral peaks survive suppression "
            f"(asked for {num_peaks}, separation {min_bin_separation})")
    return chosen


def accumulate_peaks(spectrum: SpectrumMatrix, bins) -> PeakMeasurement:
    """Sum the spectrum columns at ``bins`` into one measurement vector."""
    bins = [int(b) for b in bins]
    if not bins:
        raise ValueError("need at least one bin")
    if len(set(bins)) != len(bins):
        raise ValueError(f"duplicate bins in {bins}")
    vector = np.zeros(spectrum.data.shape[0], dtype=complex)
    for b in bins:
        vector = vector + spectrum.column(b)
    power = float(np.sum(spectrum.aggregate_power()[np.array(bins) - 1]))
    return PeakMeasurement(vector, tuple(bins), power)
