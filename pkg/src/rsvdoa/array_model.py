"""Uniform linear array model with per-antenna amplitude-phase errors.

Received data follow ``x(l) = Gamma A s(l) + n(l)`` for snapshots
``l = 1..L``, where ``Gamma = diag(g * exp(1j*phi))`` and the first antenna
is the reference (``g[0] = 1``, ``phi[0] = 0``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ErrorModel:
    """Per-antenna gains ``g`` (unitless) and phases ``phi`` (radians)."""

    gains: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=float)
        p = np.asarray(self.phases, dtype=float)
        if g.ndim != 1 or g.shape != p.shape:
            raise ValueError("gains and phases must be 1-D vectors of equal length")
        if g[0] != 1.0 or p[0] != 0.0:
            raise ValueError("first antenna is the reference: need g[0] == 1, phi[0] == 0")
        if np.any(g <= 0):
            raise ValueError("all gains must be positive")
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "phases", p)

    @classmethod
    def identity(cls, num_antennas: int) -> "ErrorModel":
        return cls(np.ones(num_antennas), np.zeros(num_antennas))

    @classmethod
    def random(cls, num_antennas: int, rng: np.random.Generator,
               gain_mean: float = 1.0, gain_std: float = 0.1,
               phase_std_deg: float = 10.0) -> "ErrorModel":
        """Draw ``g_m ~ N(gain_mean, gain_std^2)``, ``phi_m ~ N(0, phase_std^2)``
        for antennas 2..M; antenna 1 stays the reference."""
        g = np.ones(num_antennas)
        p = np.zeros(num_antennas)
        g[1:] = rng.normal(gain_mean, gain_std, num_antennas - 1)
        p[1:] = np.deg2rad(rng.normal(0.0, phase_std_deg, num_antennas - 1))
        return cls(g, p)

    @property
    def diagonal(self) -> np.ndarray:
        """Diagonal of ``Gamma``."""
        return self.gains * np.exp(1j * self.phases)

    def __len__(self):
        return self.gains.size


@dataclass(frozen=True)
class ArrayConfig:
    num_antennas: int
    carrier_wavelength: float = 1.0
    spacing: float | None = None
    errors: ErrorModel | None = None

    def __post_init__(self):
        if self.num_antennas < 2:
            raise ValueError("need at least two antennas")
        if self.carrier_wavelength <= 0:
            raise ValueError("carrier wavelength must be positive")
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.carrier_wavelength / 2)
        if self.spacing <= 0:
            raise ValueError("element spacing must be positive")
        if self.errors is None:
            object.__setattr__(self, "errors", ErrorModel.identity(self.num_antennas))
        if len(self.errors) != self.num_antennas:
            raise ValueError("error model length does not match num_antennas")

    def with_errors(self, errors: ErrorModel) -> "ArrayConfig":
        return ArrayConfig(self.num_antennas, self.carrier_wavelength, self.spacing, errors)


@dataclass(frozen=True)
class SourceSpec:
    """Narrowband sources.

    ``bins`` are DFT bin indices in ``[1, L]``; each source is the tone
    ``amplitude * exp(2j*pi*bin*l/L)``.  Coherent sources share one bin.
    """

    angles: np.ndarray
    bins: np.ndarray
    amplitudes: np.ndarray = None
    coherent: bool = True

    def __post_init__(self):
        angles = np.atleast_1d(np.asarray(self.angles, dtype=float))
        bins = np.atleast_1d(np.asarray(self.bins, dtype=int))
        if bins.size == 1 and angles.size > 1:
            bins = np.repeat(bins, angles.size)
        amps = (np.ones(angles.size, dtype=complex) if self.amplitudes is None
                else np.atleast_1d(np.asarray(self.amplitudes, dtype=complex)))
        if not (angles.shape == bins.shape == amps.shape):
            raise ValueError("angles, bins and amplitudes must have the same length")
        if angles.size < 1:
            raise ValueError("need at least one source")
        if np.any(np.abs(angles) >= np.pi / 2):
            raise ValueError("source angles must lie in (-pi/2, pi/2)")
        if np.any(bins < 1):
            raise ValueError("frequency bins are 1-based")
        if self.coherent and np.unique(bins).size != 1:
            raise ValueError("coherent sources must share one frequency bin")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "bins", bins)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def num_sources(self) -> int:
        return self.angles.size


@dataclass(frozen=True)
class SnapshotMatrix:
    """``M x L`` complex data, row = antenna, column = snapshot."""

    data: np.ndarray
    noise_power: float = field(default=0.0)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 2:
            raise ValueError("snapshot data must be a 2-D matrix")
        object.__setattr__(self, "data", data)

    @property
    def num_antennas(self) -> int:
        return self.data.shape[0]

    @property
    def num_snapshots(self) -> int:
        return self.data.shape[1]


def _check_angle(theta):
    if not np.all(np.abs(theta) < np.pi / 2):
        raise ValueError(f"look direction must lie in (-pi/2, pi/2), got {theta!r}")


def steering_matrix(config: ArrayConfig, angles) -> np.ndarray:
    """Ideal steering vectors for ``angles`` stacked as columns (``M x K``).

    Accepts the closed interval ``[-pi/2, pi/2]`` so grid endpoints can be
    evaluated; :func:`steering_vector` is the validated single-angle entry.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if np.any(np.abs(angles) > np.pi / 2):
        raise ValueError("angles must lie in [-pi/2, pi/2]")
    m = np.arange(config.num_antennas)[:, None]
    phase = 2 * np.pi * config.spacing / config.carrier_wavelength * np.sin(angles)[None, :]
    return np.exp(1j * m * phase)


def steering_vector(config: ArrayConfig, theta: float) -> np.ndarray:
    _check_angle(theta)
    return steering_matrix(config, theta)[:, 0]


def corrupted_steering_matrix(config: ArrayConfig, angles) -> np.ndarray:
    """``Gamma @ steering_matrix(config, angles)``."""
    return config.errors.diagonal[:, None] * steering_matrix(config, angles)


def corrupted_steering_vector(config: ArrayConfig, theta: float) -> np.ndarray:
    _check_angle(theta)
    return corrupted_steering_matrix(config, theta)[:, 0]


def source_waveforms(sources: SourceSpec, num_snapshots: int) -> np.ndarray:
    """``J x L`` matrix of source envelopes at snapshots ``l = 1..L``."""
    ell = np.arange(1, num_snapshots + 1)
    tones = np.exp(2j * np.pi * np.outer(sources.bins, ell) / num_snapshots)
    return sources.amplitudes[:, None] * tones


def noise_power_for_snr(sources: SourceSpec, snr_db: float) -> float:
    """Noise power ``sigma^2`` giving ``10 log10(E||s||^2 / sigma^2) = snr_db``.

    ``E||s||^2`` is the summed power of all sources, i.e. ``sum |amp_j|^2``
    for constant-envelope tones.
    """
    if np.isposinf(snr_db):
        return 0.0
    signal_power = float(np.sum(np.abs(sources.amplitudes) ** 2))
    return signal_power / 10 ** (snr_db / 10)


def complex_noise(rng: np.random.Generator, shape, power: float) -> np.ndarray:
    """Circular complex Gaussian samples with variance ``power``."""
    if power == 0:
        return np.zeros(shape, dtype=complex)
    scale = np.sqrt(power / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synthesize_snapshots(config: ArrayConfig, sources: SourceSpec, num_snapshots: int,
                         snr_db: float, seed=None, *, noise: np.ndarray | None = None
                         ) -> SnapshotMatrix:
    """Simulate ``L`` snapshots of ``B s(l) + n(l)``.

    Parameters
    ----------
    config : ArrayConfig
    sources : SourceSpec
    num_snapshots : int
        ``L``; every source bin must be in ``[1, L]``.
    snr_db : float
        ``+inf`` disables noise.
    seed : int or sequence of int or numpy Generator
        Seeds the noise draw.  Same seed, same matrix.
    noise : ndarray, optional
        Unit-power ``M x L`` noise to scale instead of drawing fresh samples,
        so paired simulations can share one noise realisation.
    """
    if num_snapshots < 1:
        raise ValueError("need at least one snapshot")
    if sources.num_sources >= config.num_antennas:
        raise ValueError("number of sources must be smaller than number of antennas")
    if np.any(sources.bins > num_snapshots):
        raise ValueError(f"frequency bin outside the {num_snapshots}-point DFT range")
    B = corrupted_steering_matrix(config, sources.angles)
    clean = B @ source_waveforms(sources, num_snapshots)
    power = noise_power_for_snr(sources, snr_db)
    shape = (config.num_antennas, num_snapshots)
    if power > 0:
        if noise is None:
            rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
            noise = complex_noise(rng, shape, 1.0)
        clean = clean + np.sqrt(power) * noise
    return SnapshotMatrix(clean, power)
