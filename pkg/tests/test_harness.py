import csv
import json
import math

import numpy as np
import pytest

from rsvdoa.array_model import ArrayConfig, SnapshotMatrix
from rsvdoa.calibration import AngularGrid, RsvBasis, calibrate
from rsvdoa.harness.cli import main
from rsvdoa.harness.config import ExperimentConfig, dump_config, load_config, preset
from rsvdoa.harness.experiment import (TrialResult, prepare_trial, resolution_probability, rmse,
                                       run_experiment, run_trial, run_trials, summarize)
from rsvdoa.harness.matrixio import (FormatError, read_basis, read_snapshots, write_basis,
                                     write_snapshots)


def _result(sq, resolved=True, tag=""):
    return TrialResult(0, 0, 0.0, 1, "x", (), (), tuple(sq), resolved, tag)


def _small(**kw):
    base = dict(grid_size=180, trials=3, sweep_snapshots=64, values=(0.0, 20.0),
                snapshots=128, estimators=("rsv-sr:calibrated", "wsf:calibrated"))
    base.update(kw)
    return ExperimentConfig(**base)


# metrics

def test_rmse_perfect():
    assert rmse([_result([0.0, 0.0])] * 5) == 0.0


def test_rmse_constant_offset():
    assert rmse([_result([4.0, 4.0])] * 3) == pytest.approx(2.0)


def test_rmse_mixed():
    # errors (1, 3) deg in one trial: sqrt((1 + 9) / 2)
    assert rmse([_result([1.0, 9.0])]) == pytest.approx(math.sqrt(5), abs=1e-4)


def test_rmse_contract():
    with pytest.raises(ValueError):
        rmse([_result([0.0, 0.0])], expected_trials=2)
    with pytest.raises(ValueError):
        rmse([_result([np.nan, 0.0])])


def test_resolution_probability_examples():
    assert resolution_probability([_result([0], True)] * 4) == 100.0
    assert resolution_probability([_result([0], False)] * 4) == 0.0
    mixed = [_result([0], True)] * 478 + [_result([0], False)] * 22
    assert resolution_probability(mixed) == pytest.approx(95.6)


# config

def test_defaults_valid_and_points():
    cfg = ExperimentConfig()
    assert cfg.num_sources == 2
    assert cfg.resolution_threshold_deg == pytest.approx(21.0)
    assert cfg.points() == [(0.0, 512), (4.0, 512), (10.0, 512), (20.0, 512)]
    snaps = preset("rmse-vs-snapshots")
    assert [L for _, L in snaps.points()] == [32, 64, 128, 256, 512]
    assert preset("resolution-vs-snr").resolution_threshold_deg == pytest.approx(2.5)


def test_ini_round_trip(tmp_path):
    cfg = preset("resolution-vs-snr").replace(trials=7, alpha=0.1)
    path = tmp_path / "c.ini"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_ini_overrides_and_errors(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[sources]\nangles_deg = 1, 2\n[experiment]\ntrials = 4\n")
    cfg = load_config(path, {"trials": "9"})
    assert cfg.angles_deg == (1.0, 2.0) and cfg.trials == 9
    path.write_text("[array]\ntrials = 4\n")
    with pytest.raises(KeyError):
        load_config(path)
    path.write_text("[array]\nbogus = 4\n")
    with pytest.raises(KeyError):
        load_config(path)


@pytest.mark.parametrize("bad", [
    dict(estimators=()),
    dict(estimators=("lasso:calibrated",)),
    dict(estimators=("ml:partial",)),
    dict(trials=0),
    dict(angles_deg=(10.0, 10.0)),
    dict(axis="snapshots", values=(0.5,)),
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        ExperimentConfig(**bad)


# binary files

def test_snapshot_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    x = SnapshotMatrix(rng.standard_normal((5, 33)) + 1j * rng.standard_normal((5, 33)))
    write_snapshots(tmp_path / "s.rsvs", x)
    back = read_snapshots(tmp_path / "s.rsvs")
    assert back.data.tobytes() == x.data.astype("<c16").tobytes()


def test_basis_round_trip_bit_exact(tmp_path):
    basis = calibrate(ArrayConfig(6), AngularGrid(45), 3, 32, 10.0, seed=1)
    write_basis(tmp_path / "b.rsvb", basis)
    back = read_basis(tmp_path / "b.rsvb")
    assert back.normalized and back.grid.N == 45
    assert back.matrix.tobytes() == basis.matrix.tobytes()


def test_format_errors(tmp_path):
    x = SnapshotMatrix(np.ones((2, 4), complex))
    p = tmp_path / "s.rsvs"
    write_snapshots(p, x)
    raw = p.read_bytes()
    for broken in (b"XXXX" + raw[4:], raw[:-8], raw + b"\0"):
        p.write_bytes(broken)
        with pytest.raises(FormatError):
            read_snapshots(p)
    write_snapshots(p, x)
    with pytest.raises(FormatError):
        read_basis(p)
    basis = RsvBasis(np.ones((2, 4), complex), AngularGrid(4), normalized=True)
    write_basis(tmp_path / "b.rsvb", basis)
    with pytest.raises(FormatError):
        read_snapshots(tmp_path / "b.rsvb")


# trials

def test_noiseless_on_grid_trial_exact():
    cfg = _small(values=(math.inf,), angles_deg=(-40.0, 20.0), sweep_snr_db=math.inf)
    (res,) = [r for r in run_trial(cfg, 0) if r.estimator == "rsv-sr:calibrated"]
    assert res.sq_errors == (0.0, 0.0)
    assert res.resolved and not res.failed


def test_degenerate_wsf_is_tagged():
    cfg = _small(values=(math.inf,), estimators=("wsf:calibrated",), sweep_snr_db=math.inf)
    (res,) = run_trial(cfg, 0)
    assert res.tag == "degenerate-subspace"
    assert not res.resolved


def test_failure_recorded_not_raised():
    # a suppression radius wider than the source gap leaves one peak
    cfg = _small(estimators=("rsv-sr:calibrated",), values=(20.0,), index_separation=200)
    (res,) = run_trial(cfg, 0)
    assert res.failed and not res.resolved
    assert "ValueError" in res.tag


def test_summary_counts_failures():
    cfg = _small(estimators=("rsv-sr:calibrated",), values=(20.0,), index_separation=200)
    (row,) = summarize(cfg, run_trials(cfg))
    assert row["failures"] == 3 and row["resolution_pct"] == 0.0
    assert math.isnan(row["rmse_deg"])


def test_error_free_variant_ignores_errors():
    cfg = _small(values=(math.inf,), estimators=("rsv-sr:error-free",), angles_deg=(-40.0, 20.0),
                 phase_std_deg=30.0)
    (res,) = run_trial(cfg, 0)
    assert res.sq_errors == (0.0, 0.0)


def test_unknown_frequency_detection():
    cfg = _small(values=(20.0,), estimators=("rsv-sr:calibrated",), known_frequency=False)
    (res,) = run_trial(cfg, 0)
    assert res.resolved


def test_parallel_matches_serial():
    cfg = _small(trials=4)
    a = run_trials(cfg, workers=1)
    b = run_trials(cfg, workers=2)
    assert [(r.trial, r.point, r.estimator, r.estimates_deg) for r in a] == \
           [(r.trial, r.point, r.estimator, r.estimates_deg) for r in b]


def test_basis_cache(tmp_path):
    cfg = _small(cache_dir=str(tmp_path / "cache"))
    first = prepare_trial(cfg, 1)
    files = list((tmp_path / "cache").iterdir())
    assert len(files) == 1
    again = prepare_trial(cfg, 1)
    np.testing.assert_array_equal(first.basis.matrix, again.basis.matrix)
    assert prepare_trial(cfg.replace(cache_dir=None), 1).basis.matrix.tobytes() == \
        first.basis.matrix.tobytes()


# artifacts

def test_experiment_outputs_deterministic(tmp_path):
    cfg = _small(trials=2)
    a = run_experiment(cfg, tmp_path / "a", "rmse-vs-snr")
    b = run_experiment(cfg, tmp_path / "b", "rmse-vs-snr")
    for key in ("summary", "trials"):
        assert a[key].read_bytes() == b[key].read_bytes()
    with open(a["summary"], newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["snr_db", "estimator", "rmse_deg", "resolution_pct", "trials",
                       "failures"]
    assert len(rows) == 1 + 2 * 2
    manifest = json.loads(a["manifest"].read_text())
    assert manifest["config"]["trials"] == 2 and manifest["status"] == "complete"


def test_spectrum_csv_peaks(tmp_path):
    cfg = preset("spectrum").replace(estimators=("rsv-sr:calibrated", "music:calibrated"))
    paths = run_experiment(cfg, tmp_path)
    with open(paths["spectrum"], newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["angle_deg", "rsv-sr:calibrated", "music:calibrated"]
    body = np.array(rows[1:], dtype=float)
    assert body.shape == (900, 3)
    mag = body[:, 1]
    assert mag.max() == 1.0
    top = np.sort(body[np.argsort(-mag)[:2], 0])
    np.testing.assert_allclose(top, [-40, 20], atol=1.0)


# CLI

def test_cli_calibrate_simulate_solve(tmp_path, capsys):
    common = ["--out", str(tmp_path), "--set", "grid_size=180", "--set", "sweep_snapshots=64",
              "--set", "snapshots=128", "--set", "snr_db=30", "--set", "angles_deg=-40,20",
              "--set", "axis=fixed"]
    assert main(["calibrate", *common]) == 0
    assert main(["simulate", *common]) == 0
    out_csv = tmp_path / "est.csv"
    assert main(["solve", str(tmp_path / "snapshots_trial0.rsvs"),
                 str(tmp_path / "basis_trial0.rsvb"), "-J", "2",
                 "--out-csv", str(out_csv)]) == 0
    with open(out_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    np.testing.assert_allclose(sorted(float(r["angle_deg"]) for r in rows), [-40, 20], atol=1.0)
    assert "converged" in capsys.readouterr().out


def test_cli_experiment(tmp_path):
    rc = main(["rmse-vs-snr", "--out", str(tmp_path), "--trials", "2",
               "--estimators", "rsv-sr:calibrated", "--set", "values=10,20",
               "--set", "grid_size=180"])
    assert rc == 0
    assert (tmp_path / "rmse-vs-snr.csv").exists()
    assert (tmp_path / "rmse-vs-snr_manifest.json").exists()


def test_cli_show_config_and_errors(tmp_path, capsys):
    assert main(["show-config", "--preset", "resolution-vs-snr", "--trials", "5"]) == 0
    text = capsys.readouterr().out
    assert "angles_deg = 15.0, 20.0" in text and "trials = 5" in text
    assert main(["show-config", "--set", "nonsense=1"]) == 2
    assert main(["solve", str(tmp_path / "nope"), str(tmp_path / "nope"), "-J", "1"]) == 2


def test_cli_selftest(capsys):
    assert main(["selftest"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_alpha_axis(tmp_path):
    cfg = preset("alpha-sensitivity").replace(grid_size=180, trials=2, values=(0.02, 1.0))
    assert cfg.at_point(1).alpha == 1.0 and cfg.points() == [(0.0, 512)] * 2
    paths = run_experiment(cfg, tmp_path, "alpha-sensitivity")
    with open(paths["summary"], newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "alpha"
    assert [r[0] for r in rows[1:]] == ["0.02", "1"]
    with pytest.raises(ValueError):
        cfg.replace(values=(0.0,))
