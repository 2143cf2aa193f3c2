"""Command line entry point: ``rsvdoa <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..array_model import complex_noise, synthesize_snapshots
from ..frequency import accumulate_peaks, detect_peaks, dft_all_antennas
from ..sparse import MuPolicy, estimate_doa
from .config import PRESETS, ExperimentConfig, dump_config, load_config, preset
from .experiment import prepare_trial, run_experiment, source_spec, trial_seed, write_csv
from .matrixio import read_basis, read_snapshots, write_basis, write_snapshots

EXPERIMENTS = tuple(PRESETS)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI experiment config")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed", type=int, help="base seed (trial k uses seed + k)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials K")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--estimators", help="comma list of <method>:<variant>")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")


def build_config(args, base: ExperimentConfig | None = None) -> ExperimentConfig:
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value
    for key, attr in (("base_seed", "seed"), ("trials", "trials"), ("workers", "workers"),
                      ("estimators", "estimators")):
        v = getattr(args, attr, None)
        if v is not None:
            overrides[key] = str(v)
    return load_config(args.config, overrides, base)


def _cmd_experiment(args) -> int:
    config = build_config(args, preset(args.command))
    paths = run_experiment(config, args.out, args.command)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _cmd_calibrate(args) -> int:
    config = build_config(args)
    ctx = prepare_trial(config, args.trial)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"basis_trial{args.trial}.rsvb"
    write_basis(path, ctx.basis)
    print(f"basis: {path}  ({ctx.basis.matrix.shape[0]} x {ctx.basis.matrix.shape[1]})")
    return 0


def _cmd_simulate(args) -> int:
    config = build_config(args)
    ctx = prepare_trial(config, args.trial)
    snr_db, L = config.points()[0]
    noise = complex_noise(np.random.default_rng([trial_seed(config, args.trial), 2]),
                          (config.num_antennas, L), 1.0)
    data = synthesize_snapshots(ctx.array, source_spec(config), L, snr_db, noise=noise)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / f"snapshots_trial{args.trial}.rsvs"
    write_snapshots(path, data)
    print(f"snapshots: {path}  ({config.num_antennas} x {L}, {snr_db:g} dB)")
    return 0


def _cmd_solve(args) -> int:
    data = read_snapshots(args.snapshots)
    basis = read_basis(args.basis)
    spectrum = dft_all_antennas(data)
    bins = args.bins or detect_peaks(spectrum, args.num_bins, args.bin_separation)
    est = estimate_doa(basis, accumulate_peaks(spectrum, bins), args.sources,
                       MuPolicy(args.alpha), args.tol, args.max_iters)
    rows = [[i, a, m] for i, a, m in zip(est.indices, est.degrees, est.magnitudes)]
    if args.out_csv:
        write_csv(args.out_csv, ["grid_index", "angle_deg", "magnitude"], rows)
    for i, a, m in rows:
        print(f"index {i:5d}  angle {a:+9.4f} deg  |S| {m:.6g}")
    d = est.diagnostics
    print(f"bins {list(bins)}  mu {d['mu']:.6g}  iterations {d['iterations']}  "
          f"converged {d['converged']}")
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return 0 if run_selftest(seed=args.seed or 0, verbose=True) else 1


def _cmd_show_config(args) -> int:
    base = preset(args.preset) if args.preset else None
    sys.stdout.write(dump_config(build_config(args, base)))
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsvdoa", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _common(p)
        p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("calibrate", help="build and write the RSV basis of one trial")
    _common(p)
    p.add_argument("--trial", type=int, default=0)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("simulate", help="write one trial's snapshot matrix")
    _common(p)
    p.add_argument("--trial", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("solve", help="estimate DOAs from a snapshot file and a basis file")
    p.add_argument("snapshots", type=Path)
    p.add_argument("basis", type=Path)
    p.add_argument("--sources", "-J", type=int, required=True)
    p.add_argument("--bins", type=lambda s: [int(x) for x in s.split(",")],
                   help="known source bins (1-based); detected when omitted")
    p.add_argument("--num-bins", type=int, default=1, help="distinct bins to detect")
    p.add_argument("--bin-separation", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--out-csv", type=Path)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("selftest", help="solver-vs-oracle and DFT consistency checks")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_selftest)

    p = sub.add_parser("show-config", help="print the effective config as INI")
    _common(p)
    p.add_argument("--preset", choices=EXPERIMENTS)
    p.set_defaults(func=_cmd_show_config)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
