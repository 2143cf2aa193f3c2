"""Monte Carlo trials, metrics and CSV output for the published experiments.

Seeding: trial ``k`` uses ``seed = base_seed + k`` and three independent
streams derived from it, ``default_rng([seed, 0])`` for the error matrix,
``[seed, 1]`` for the calibration sweep and ``[seed, 2]`` for the
received-data noise.  The same unit-power noise realisation is reused at
every point of an SNR axis.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..array_model import (ArrayConfig, ErrorModel, SourceSpec, complex_noise,
                           synthesize_snapshots)
from ..benchmarks import (BasisSteering, NominalSteering, ml_estimate, ml_spectrum,
                          music_estimate, music_spectrum, sample_covariance, wsf_estimate,
                          wsf_spectrum)
from ..calibration import AngularGrid, RsvBasis, calibrate, nominal_basis
from ..frequency import accumulate_peaks, detect_peaks, dft_all_antennas
from ..sparse import MuPolicy, estimate_doa
from .config import ExperimentConfig
from .matrixio import read_basis, write_basis

log = logging.getLogger(__name__)


@dataclass
class TrialResult:
    trial: int
    point: int
    snr_db: float
    snapshots: int
    estimator: str
    estimates_deg: tuple
    truth_deg: tuple
    sq_errors: tuple
    resolved: bool
    tag: str = ""
    diagnostics: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def failed(self) -> bool:
        return bool(self.tag)


@dataclass
class TrialContext:
    """Per-trial state shared by every axis point: error draw and bases."""

    array: ArrayConfig
    ideal: ArrayConfig
    basis: RsvBasis
    nominal: RsvBasis


def trial_seed(config: ExperimentConfig, k: int) -> int:
    return config.base_seed + k


def _basis_cache_path(config: ExperimentConfig, error_seed: int) -> Path:
    key = json.dumps([config.num_antennas, config.grid_size, error_seed, config.sweep_snr_db,
                      config.sweep_snapshots, config.aux_bin, config.sweep_repeats,
                      config.gain_mean, config.gain_std, config.phase_std_deg,
                      config.wavelength, config.spacing])
    digest = hashlib.sha256(key.encode()).hexdigest()[:12]
    name = (f"basis_M{config.num_antennas}_N{config.grid_size}_seed{error_seed}"
            f"_snr{config.sweep_snr_db:g}_{digest}.rsvb")
    return Path(config.cache_dir) / name


def prepare_trial(config: ExperimentConfig, k: int) -> TrialContext:
    """Draw trial ``k``'s error matrix and build (or load) its RSV basis."""
    error_seed = config.base_seed if config.fixed_errors else trial_seed(config, k)
    M = config.num_antennas
    errors = ErrorModel.random(M, np.random.default_rng([error_seed, 0]), config.gain_mean,
                               config.gain_std, config.phase_std_deg)
    ideal = ArrayConfig(M, config.wavelength, config.spacing)
    array = ideal.with_errors(errors)
    grid = AngularGrid(config.grid_size)
    basis = None
    cache = _basis_cache_path(config, error_seed) if config.cache_dir else None
    if cache is not None and cache.exists():
        basis = read_basis(cache)
    if basis is None:
        basis = calibrate(array, grid, config.aux_bin, config.sweep_snapshots,
                          config.sweep_snr_db, np.random.default_rng([error_seed, 1]),
                          config.sweep_repeats)
        if cache is not None:
            cache.parent.mkdir(parents=True, exist_ok=True)
            write_basis(cache, basis)
    return TrialContext(array, ideal, basis, nominal_basis(ideal, grid))


def source_spec(config: ExperimentConfig) -> SourceSpec:
    return SourceSpec(np.deg2rad(config.angles_deg), config.source_bins,
                      coherent=config.coherent)


def peak_measurement(config: ExperimentConfig, data):
    spectrum = dft_all_antennas(data)
    distinct = sorted(set(config.source_bins))
    if config.known_frequency:
        bins = distinct
    else:
        bins = detect_peaks(spectrum, len(distinct), config.bin_separation)
    return accumulate_peaks(spectrum, bins)


def _estimate(config, method, variant, data, ctx: TrialContext):
    J = config.num_sources
    if variant == "calibrated":
        basis, model = ctx.basis, BasisSteering(ctx.basis)
    else:
        basis, model = ctx.nominal, NominalSteering(ctx.ideal)
    if method == "rsv-sr":
        return estimate_doa(basis, peak_measurement(config, data), J, MuPolicy(config.alpha),
                            config.tol, config.max_iters, config.index_separation)
    cov = sample_covariance(data)
    if method == "ml":
        return ml_estimate(cov, model, J, config.coarse_step_deg, config.refine_step_deg)
    if method == "wsf":
        return wsf_estimate(cov, model, J, config.coarse_step_deg, config.refine_step_deg)
    return music_estimate(cov, model, J, basis.grid, config.index_separation)


def run_trial(config: ExperimentConfig, k: int, point: int = 0,
              context: TrialContext | None = None) -> list:
    """Run every configured estimator on trial ``k`` at axis point ``point``.

    Estimator failures are recorded (``resolved=False``, ``tag`` set),
    never raised.
    """
    ctx = context or prepare_trial(config, k)
    snr_db, L = config.points()[point]
    sources = source_spec(config)
    unit_noise = complex_noise(np.random.default_rng([trial_seed(config, k), 2]),
                               (config.num_antennas, L), 1.0)
    data = {
        "errors": synthesize_snapshots(ctx.array, sources, L, snr_db, noise=unit_noise),
        "ideal": synthesize_snapshots(ctx.ideal, sources, L, snr_db, noise=unit_noise),
    }
    truth = np.sort(np.asarray(config.angles_deg, dtype=float))
    threshold = config.resolution_threshold_deg
    results = []
    for name in config.estimators:
        method, _, variant = name.partition(":")
        snapshots = data["ideal" if variant == "error-free" else "errors"]
        t0 = time.perf_counter()
        tag, diag, estimates = "", {}, np.full(truth.size, np.nan)
        try:
            est = _estimate(config.at_point(point), method, variant, snapshots, ctx)
            estimates = np.sort(est.degrees)
            diag = {k_: v for k_, v in est.diagnostics.items() if k_ != "solution"}
            if diag.get("degenerate"):
                tag = "degenerate-subspace"
        except (ValueError, np.linalg.LinAlgError) as exc:
            tag = type(exc).__name__ + ": " + str(exc)
        wall = time.perf_counter() - t0
        err = estimates - truth
        resolved = not tag and bool(np.all(np.abs(err) < threshold))
        results.append(TrialResult(k, point, snr_db, L, name, tuple(estimates), tuple(truth),
                                   tuple(err ** 2), resolved, tag, diag, wall))
    return results


def rmse(results, expected_trials: int | None = None) -> float:
    """Root mean square DOA error in degrees over all trials and sources."""
    results = list(results)
    if expected_trials is not None and len(results) != expected_trials:
        raise ValueError(f"expected {expected_trials} trials, got {len(results)}")
    if not results:
        raise ValueError("no trials to average")
    sq = np.array([r.sq_errors for r in results], dtype=float)
    if np.isnan(sq).any():
        raise ValueError(f"{int(np.isnan(sq).any(axis=1).sum())} trials lack estimates")
    return float(np.sqrt(sq.sum() / sq.size))


def resolution_probability(results) -> float:
    results = list(results)
    if not results:
        raise ValueError("no trials")
    return 100.0 * sum(r.resolved for r in results) / len(results)


def _trial_unit(config: ExperimentConfig, k: int) -> list:
    ctx = prepare_trial(config, k)
    out = []
    for p in range(len(config.points())):
        out.extend(run_trial(config, k, p, ctx))
    return out


def run_trials(config: ExperimentConfig, workers: int | None = None) -> list:
    """All trials at all axis points, ordered by (trial, point, estimator)."""
    workers = workers or config.workers
    ks = range(config.trials)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_trial_unit, [config] * config.trials, ks))
    else:
        chunks = [_trial_unit(config, k) for k in ks]
    order = {name: i for i, name in enumerate(config.estimators)}
    results = [r for chunk in chunks for r in chunk]
    results.sort(key=lambda r: (r.trial, r.point, order[r.estimator]))
    return results


def summarize(config: ExperimentConfig, results) -> list:
    """One row per (axis point, estimator)."""
    rows = []
    for p, (snr_db, L) in enumerate(config.points()):
        for name in config.estimators:
            sel = [r for r in results if r.point == p and r.estimator == name]
            ok = [r for r in sel if not r.failed]
            rows.append({
                "point": p, "snr_db": snr_db, "snapshots": L,
                "alpha": config.at_point(p).alpha, "estimator": name,
                "rmse_deg": rmse(ok, len(ok)) if ok else math.nan,
                "resolution_pct": resolution_probability(sel) if sel else math.nan,
                "trials": len(sel), "failures": len(sel) - len(ok),
                "mean_wall_time": float(np.mean([r.wall_time for r in sel])) if sel else math.nan,
            })
    return rows


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _axis_column(config):
    return {"snr": "snr_db", "snapshots": "snapshots", "alpha": "alpha",
            "fixed": "point"}[config.axis]


def write_summary(path, config, rows) -> None:
    axis = _axis_column(config)
    header = [axis, "estimator", "rmse_deg", "resolution_pct", "trials", "failures"]
    write_csv(path, header, [[r[axis], r["estimator"], r["rmse_deg"], r["resolution_pct"],
                              r["trials"], r["failures"]] for r in rows])


def write_trials(path, results) -> None:
    header = ["trial", "point", "snr_db", "snapshots", "estimator", "estimates_deg", "truth_deg",
              "sq_error_deg2", "resolved", "tag", "iterations", "primal_residual",
              "dual_residual", "converged", "polished"]
    rows = []
    for r in results:
        d = r.diagnostics
        rows.append([r.trial, r.point, r.snr_db, r.snapshots, r.estimator,
                     " ".join(_fmt(x) for x in r.estimates_deg),
                     " ".join(_fmt(x) for x in r.truth_deg),
                     " ".join(_fmt(x) for x in r.sq_errors), r.resolved, r.tag,
                     d.get("iterations", ""), d.get("primal_residual", ""),
                     d.get("dual_residual", ""), d.get("converged", ""),
                     d.get("polished", "")])
    write_csv(path, header, rows)


def spectra(config: ExperimentConfig, k: int = 0) -> tuple:
    """Grid angles (deg) and peak-normalised pseudospectra of every estimator."""
    ctx = prepare_trial(config, k)
    snr_db, L = config.points()[0]
    sources = source_spec(config)
    unit_noise = complex_noise(np.random.default_rng([trial_seed(config, k), 2]),
                               (config.num_antennas, L), 1.0)
    grid = ctx.basis.grid
    J = config.num_sources
    columns = {}
    for name in config.estimators:
        method, _, variant = name.partition(":")
        arr = ctx.ideal if variant == "error-free" else ctx.array
        data = synthesize_snapshots(arr, sources, L, snr_db, noise=unit_noise)
        calibrated = variant == "calibrated"
        basis = ctx.basis if calibrated else ctx.nominal
        model = BasisSteering(ctx.basis) if calibrated else NominalSteering(ctx.ideal)
        if method == "rsv-sr":
            est = estimate_doa(basis, peak_measurement(config, data), J,
                               MuPolicy(config.alpha), config.tol, config.max_iters,
                               config.index_separation)
            p = np.abs(est.diagnostics["solution"].spectrum)
        else:
            cov = sample_covariance(data)
            if method == "ml":
                p = ml_spectrum(cov, model, grid.angles)
            elif method == "wsf":
                p = wsf_spectrum(cov, model, J, grid.angles)
            else:
                p = music_spectrum(cov, model, J, grid.angles)
        peak = np.max(p)
        columns[name] = p / peak if peak > 0 else p
    return grid.degrees, columns


def _manifest(path, config, kind, extra) -> None:
    doc = {"kind": kind, "version": __version__, "base_seed": config.base_seed,
           "trials": config.trials, "config": config.to_dict()}
    doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, default=str) + "\n")


def run_experiment(config: ExperimentConfig, out_dir, kind: str | None = None) -> dict:
    """Run one experiment and write its CSV artifacts into ``out_dir``.

    Returns a dict of written paths.  Wall-clock timings go to the JSON
    manifest only, so the CSVs are byte-identical across reruns.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = kind or ("spectrum" if config.axis == "fixed" else f"rmse-vs-{config.axis}")
    paths = {"manifest": out / f"{kind}_manifest.json"}
    t0 = time.perf_counter()
    if kind == "spectrum":
        angles, cols = spectra(config)
        paths["spectrum"] = out / "spectrum.csv"
        names = list(cols)
        write_csv(paths["spectrum"], ["angle_deg"] + names,
                  [[a] + [cols[n][i] for n in names] for i, a in enumerate(angles)])
        _manifest(paths["manifest"], config, kind,
                  {"wall_time_s": time.perf_counter() - t0})
        return paths

    results, status = [], "complete"
    try:
        results = run_trials(config)
    except BaseException as exc:  # flush whatever exists, then re-raise
        status = f"aborted: {type(exc).__name__}: {exc}"
        raise
    finally:
        rows = summarize(config, results) if results else []
        paths["summary"] = out / f"{kind}.csv"
        paths["trials"] = out / f"{kind}_trials.csv"
        write_summary(paths["summary"], config, rows)
        write_trials(paths["trials"], results)
        failures = {}
        for r in results:
            if r.failed:
                failures.setdefault(r.estimator, []).append(r.tag)
        _manifest(paths["manifest"], config, kind, {
            "status": status,
            "wall_time_s": time.perf_counter() - t0,
            "mean_wall_time_s": {f"{r['estimator']}@{r['snr_db']:g}dB/L{r['snapshots']}":
                                 r["mean_wall_time"] for r in rows},
            "failure_summary": {k_: {"count": len(v), "first": v[0]}
                                for k_, v in failures.items()},
        })
    return paths
