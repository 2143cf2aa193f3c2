"""Experiment configuration: INI file + CLI overrides.

Every key lives in one section; see ``SCHEMA`` (also printed in the README).
Lists are comma separated.  Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
import logging
import math
from dataclasses import dataclass

log = logging.getLogger(__name__)

METHODS = ("rsv-sr", "ml", "wsf", "music")
VARIANTS = ("calibrated", "nominal", "error-free")
AXES = ("snr", "snapshots", "alpha", "fixed")


def _floats(text):
    return tuple(float(t) for t in str(text).split(",") if t.strip())


def _ints(text):
    return tuple(int(t) for t in str(text).split(",") if t.strip())


def _strs(text):
    return tuple(t.strip() for t in str(text).split(",") if t.strip())


def _bool(text):
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    return None if str(text).strip().lower() in ("", "none", "auto") else int(text)


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none", "auto") else float(text)


def _opt_str(text):
    return None if str(text).strip().lower() in ("", "none") else str(text).strip()


@dataclass
class ExperimentConfig:
    # [array]
    num_antennas: int = 8
    wavelength: float = 1.0
    spacing: float | None = None
    # [errors]
    gain_mean: float = 1.0
    gain_std: float = 0.1
    phase_std_deg: float = 10.0
    fixed_errors: bool = False
    # [sources]
    angles_deg: tuple = (-10.0, 32.0)
    bins: tuple = (10,)
    coherent: bool = True
    # [grid]
    grid_size: int = 900
    # [sweep]
    aux_bin: int = 5
    sweep_snapshots: int = 512
    sweep_snr_db: float = 30.0
    sweep_repeats: int = 1
    cache_dir: str | None = None
    # [solver]
    alpha: float = 0.05
    tol: float = 1e-8
    max_iters: int = 5000
    index_separation: int | None = None
    bin_separation: int = 2
    known_frequency: bool = True
    # [benchmarks]
    coarse_step_deg: float = 1.0
    refine_step_deg: float = 0.01
    # [experiment]
    axis: str = "snr"
    values: tuple = (0.0, 4.0, 10.0, 20.0)
    snr_db: float = 20.0
    snapshots: int = 512
    resolution_deg: float | None = None
    trials: int = 500
    base_seed: int = 0
    workers: int = 1
    estimators: tuple = ("rsv-sr:calibrated", "ml:calibrated", "wsf:calibrated")

    def __post_init__(self):
        self.validate()

    # -- derived -------------------------------------------------------
    @property
    def num_sources(self) -> int:
        return len(self.angles_deg)

    @property
    def source_bins(self) -> tuple:
        if len(self.bins) == 1:
            return tuple(self.bins) * self.num_sources
        return tuple(self.bins)

    @property
    def separation_deg(self) -> float:
        """Smallest gap between true angles (inf for one source)."""
        a = sorted(self.angles_deg)
        return min((b - c for b, c in zip(a[1:], a[:-1])), default=math.inf)

    @property
    def resolution_threshold_deg(self) -> float:
        """Half the angular separation unless set explicitly."""
        if self.resolution_deg is not None:
            return self.resolution_deg
        return self.separation_deg / 2

    def validate(self) -> None:
        if self.num_antennas < 2:
            raise ValueError("num_antennas must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not self.estimators:
            raise ValueError("estimator list is empty")
        for est in self.estimators:
            method, _, variant = est.partition(":")
            if method not in METHODS or variant not in VARIANTS:
                raise ValueError(f"unknown estimator {est!r}; use <method>:<variant> with "
                                 f"method in {METHODS} and variant in {VARIANTS}")
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if self.axis != "fixed" and not self.values:
            raise ValueError(f"axis {self.axis!r} needs at least one value")
        if self.axis == "alpha" and any(v <= 0 for v in self.values):
            raise ValueError("alpha values must be positive")
        if not 1 <= self.num_sources < self.num_antennas:
            raise ValueError("need 1 <= number of sources < num_antennas")
        if len(self.bins) not in (1, self.num_sources):
            raise ValueError("give one bin or one bin per source")
        if self.coherent and len(set(self.source_bins)) != 1:
            raise ValueError("coherent sources must share one bin")
        if any(abs(a) >= 90 for a in self.angles_deg):
            raise ValueError("source angles must lie in (-90, 90) degrees")
        if len(set(self.angles_deg)) != len(self.angles_deg):
            raise ValueError("source angles must be distinct")
        for L in self.snapshot_counts():
            if max(self.source_bins) > L:
                raise ValueError(f"source bin {max(self.source_bins)} exceeds L={L}")
            if L & (L - 1):
                log.warning("snapshot count %d is not a power of two", L)
        if not 1 <= self.aux_bin <= self.sweep_snapshots:
            raise ValueError("aux_bin outside the sweep DFT range")
        if self.alpha <= 0 or self.tol <= 0 or self.max_iters < 1:
            raise ValueError("solver parameters must be positive")

    def snapshot_counts(self):
        if self.axis == "snapshots":
            return [int(v) for v in self.values]
        return [int(self.snapshots)]

    def points(self):
        """``(snr_db, snapshots)`` for each axis value."""
        if self.axis == "snr":
            return [(float(v), int(self.snapshots)) for v in self.values]
        if self.axis == "snapshots":
            return [(float(self.snr_db), int(v)) for v in self.values]
        if self.axis == "alpha":
            return [(float(self.snr_db), int(self.snapshots))] * len(self.values)
        return [(float(self.snr_db), int(self.snapshots))]

    def at_point(self, p: int) -> "ExperimentConfig":
        """The config seen by axis point ``p`` (differs only on the alpha axis)."""
        if self.axis == "alpha":
            return self.replace(alpha=float(self.values[p]))
        return self

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in dataclasses.fields(self)}


#: key -> (section, parser)
SCHEMA = {
    "num_antennas": ("array", int),
    "wavelength": ("array", float),
    "spacing": ("array", _opt_float),
    "gain_mean": ("errors", float),
    "gain_std": ("errors", float),
    "phase_std_deg": ("errors", float),
    "fixed_errors": ("errors", _bool),
    "angles_deg": ("sources", _floats),
    "bins": ("sources", _ints),
    "coherent": ("sources", _bool),
    "grid_size": ("grid", int),
    "aux_bin": ("sweep", int),
    "sweep_snapshots": ("sweep", int),
    "sweep_snr_db": ("sweep", float),
    "sweep_repeats": ("sweep", int),
    "cache_dir": ("sweep", _opt_str),
    "alpha": ("solver", float),
    "tol": ("solver", float),
    "max_iters": ("solver", int),
    "index_separation": ("solver", _opt_int),
    "bin_separation": ("solver", int),
    "known_frequency": ("solver", _bool),
    "coarse_step_deg": ("benchmarks", float),
    "refine_step_deg": ("benchmarks", float),
    "axis": ("experiment", str),
    "values": ("experiment", _floats),
    "snr_db": ("experiment", float),
    "snapshots": ("experiment", int),
    "resolution_deg": ("experiment", _opt_float),
    "trials": ("experiment", int),
    "base_seed": ("experiment", int),
    "workers": ("experiment", int),
    "estimators": ("experiment", _strs),
}


def parse_value(key: str, text):
    if key not in SCHEMA:
        raise KeyError(f"unknown config key {key!r}")
    return SCHEMA[key][1](text)


def load_config(path=None, overrides: dict | None = None, base: ExperimentConfig | None = None
                ) -> ExperimentConfig:
    """Read an INI file onto ``base`` (defaults) and apply raw-string overrides."""
    values = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        with open(path) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            for key, text in parser.items(section):
                if key not in SCHEMA:
                    raise KeyError(f"unknown config key {key!r} in [{section}]")
                if SCHEMA[key][0] != section:
                    raise KeyError(f"key {key!r} belongs in [{SCHEMA[key][0]}], not [{section}]")
                values[key] = parse_value(key, text)
    for key, text in (overrides or {}).items():
        values[key] = parse_value(key, text) if isinstance(text, str) else text
    return dataclasses.replace(base or ExperimentConfig(), **values)


def dump_config(config: ExperimentConfig) -> str:
    """Render ``config`` back to INI text."""
    parser = configparser.ConfigParser(interpolation=None)
    for key, (section, _) in SCHEMA.items():
        if not parser.has_section(section):
            parser.add_section(section)
        v = getattr(config, key)
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        parser.set(section, key, "" if v is None else str(v))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


# Reference setups of the four published experiments.
PRESETS = {
    "spectrum": dict(angles_deg=(-40.0, 20.0), axis="fixed", snr_db=20.0, snapshots=128,
                     trials=1, estimators=("rsv-sr:calibrated", "ml:calibrated",
                                           "wsf:calibrated", "music:calibrated")),
    "rmse-vs-snr": dict(angles_deg=(-10.0, 32.0), axis="snr", snapshots=512,
                        values=(-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)),
    "rmse-vs-snapshots": dict(angles_deg=(-10.0, 32.0), axis="snapshots", snr_db=10.0,
                              values=(32.0, 64.0, 128.0, 256.0, 512.0)),
    "resolution-vs-snr": dict(angles_deg=(15.0, 20.0), axis="snr", snapshots=512,
                              values=(-12.0, -10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 10.0)),
    "alpha-sensitivity": dict(angles_deg=(15.0, 20.0), axis="alpha", snr_db=0.0, snapshots=512,
                              values=(0.01, 0.02, 0.05, 0.1, 0.2, 0.5),
                              estimators=("rsv-sr:calibrated",)),
}


def preset(name: str) -> ExperimentConfig:
    return ExperimentConfig(**PRESETS[name])
