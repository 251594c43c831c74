"""Command-line front end.

Subcommands: ``simulate`` (Monte Carlo experiment -> CDF CSVs +
manifest), ``estimate-psf`` (recorded sketches -> PSF + objective-trace
CSVs), ``decontaminate`` (sketches + mask -> estimated channel dump),
``bench`` (per-iteration timing sweeps).  Exit codes: 0 success, 2
usage/config error, 3 numerical failure.  The output directory can be
overridden with the PILOTDECON_OUT environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import bench_dictionary, sweep
from .cellsim import run_experiment
from .channel import SamplingPattern
from .clustering import MaskPair
from .config import ConfigError, load_config
from .decontam import AdmmConfig, admm_interpolate
from .fileio import (
    FormatError,
    read_mask_csv,
    read_sketches,
    write_channels,
    write_csv,
    write_manifest,
    write_psf_csv,
    write_trace_csv,
)
from .grid import Dictionary
from .recovery import NumericalError, SolverConfig, solve_psf

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _out_dir(args: argparse.Namespace) -> Path:
    out = os.environ.get("PILOTDECON_OUT", args.out)
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        cfg, raw = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)
    t0 = time.perf_counter()
    try:
        result = run_experiment(cfg, seed=args.seed, threads=args.threads)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    table = result.cdf_table()
    csv_path = out / f"cdf_{cfg.experiment.name}.csv"
    write_csv(
        csv_path,
        ("rate_bits_s_hz", "cdf_contaminated", "cdf_decontaminated"),
        [tuple(map(float, row)) for row in table],
    )
    write_manifest(
        out / f"manifest_{cfg.experiment.name}.json",
        raw,
        args.seed,
        [csv_path.name],
        time.perf_counter() - t0,
        __version__,
    )
    if result.failures:
        print(f"{result.failures} trial(s) failed and were excluded", file=sys.stderr)
    print(f"wrote {csv_path}")
    return EXIT_OK


def _cmd_estimate_psf(args: argparse.Namespace) -> int:
    try:
        bundle = read_sketches(args.sketches)
    except (FormatError, OSError) as exc:
        print(f"cannot read sketches: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)
    grid = bundle.grid(args.angle_oversampling, args.delay_oversampling)
    dictionary = Dictionary(grid, bundle.num_antennas, bundle.num_subcarriers)
    cfg = SolverConfig(
        max_iterations=args.max_iterations, objective_tolerance=args.tolerance
    )
    try:
        solution = solve_psf(bundle.window, dictionary, cfg)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    stem = Path(args.sketches).stem
    psf_path = out / f"{stem}_psf.csv"
    write_psf_csv(psf_path, solution.weights, grid)
    # diagnostic bound column: O(1/k^2) envelope anchored at the final iterate
    trace = solution.objective_trace
    gap0 = float(np.sum(np.abs(solution.coefficients) ** 2))
    ks = np.arange(len(trace))
    bounds = trace[-1] + 4.0 * solution.beta * gap0 / np.maximum(ks, 1) ** 2
    trace_path = out / f"{stem}_trace.csv"
    write_trace_csv(trace_path, trace, bounds)
    print(f"wrote {psf_path} and {trace_path}")
    return EXIT_OK


def _cmd_decontaminate(args: argparse.Namespace) -> int:
    try:
        bundle = read_sketches(args.sketches)
    except (FormatError, OSError) as exc:
        print(f"cannot read sketches: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    grid = bundle.grid(args.angle_oversampling, args.delay_oversampling)
    dictionary = Dictionary(grid, bundle.num_antennas, bundle.num_subcarriers)
    try:
        signal, interference = read_mask_csv(
            args.mask, (grid.num_angles, grid.num_delays)
        )
    except (FormatError, OSError, ValueError, IndexError) as exc:
        print(f"cannot read mask: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    masks = MaskPair(signal, interference)
    cfg = AdmmConfig(step=args.step, max_iterations=args.max_iterations)
    out = _out_dir(args)
    estimates = []
    try:
        for c, pattern in enumerate(bundle.window.patterns):
            x = bundle.window.sketches[:, c].reshape(
                pattern.num_antennas, pattern.num_subcarriers, order="F"
            )
            # sketches are stored noise-normalized; undo for estimation
            result = admm_interpolate(x * bundle.window.sigma, pattern, masks, dictionary, cfg)
            estimates.append(result.p)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    path = out / f"{Path(args.sketches).stem}_decontaminated.bin"
    write_channels(path, estimates)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    sizes = [2**k for k in range(args.min_log2, args.max_log2 + 1)]
    if args.component == "dictionary":
        err, per_apply = bench_dictionary()
        print(f"dictionary dense-vs-transform max rel err {err:.3e} ({per_apply*1e6:.1f} us/apply)")
        return EXIT_OK
    if args.component not in ("solver", "admm"):
        print(f"unknown component {args.component!r}", file=sys.stderr)
        return EXIT_CONFIG
    report = sweep(args.component, sizes)
    path = out / f"bench_{args.component}.csv"
    write_csv(
        path,
        ("G", "seconds_per_iteration"),
        [(int(g), float(t)) for g, t in zip(report.sizes, report.seconds)],
    )
    print(f"fitted log-log slope {report.slope:.3f}")
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pilotdecon",
        description="Wideband massive-MIMO pilot decontamination toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    sim.add_argument("--config", required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=".")
    sim.add_argument("--threads", type=int, default=1)
    sim.set_defaults(func=_cmd_simulate)

    est = sub.add_parser("estimate-psf", help="estimate a PSF from recorded sketches")
    est.add_argument("--sketches", required=True)
    est.add_argument("--out", default=".")
    est.add_argument("--angle-oversampling", type=int, default=2)
    est.add_argument("--delay-oversampling", type=int, default=2)
    est.add_argument("--max-iterations", type=int, default=500)
    est.add_argument("--tolerance", type=float, default=1e-6)
    est.set_defaults(func=_cmd_estimate_psf)

    dec = sub.add_parser("decontaminate", help="masked interpolation of recorded sketches")
    dec.add_argument("--sketches", required=True)
    dec.add_argument("--mask", required=True)
    dec.add_argument("--out", default=".")
    dec.add_argument("--angle-oversampling", type=int, default=2)
    dec.add_argument("--delay-oversampling", type=int, default=2)
    dec.add_argument("--step", type=float, default=1.0)
    dec.add_argument("--max-iterations", type=int, default=500)
    dec.set_defaults(func=_cmd_decontaminate)

    ben = sub.add_parser("bench", help="time transform kernels over grid sizes")
    ben.add_argument("--component", required=True, choices=["solver", "admm", "dictionary"])
    ben.add_argument("--out", default=".")
    ben.add_argument("--min-log2", type=int, default=10)
    ben.add_argument("--max-log2", type=int, default=16)
    ben.set_defaults(func=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
