"""Command-line interface: synth, estimate, crb, audit, bench, report.

Exit codes: 0 success, 1 usage error, 2 numerical failure (with a
machine-readable JSON error on stderr).  File outputs are written
atomically (temp file + rename).  Frequencies are given on the command
line in cycles per sample (the fraction-of-sample-rate convention) and
converted to rad/s internally.
"""

from __future__ import annotations

import argparse
import json

from dataclasses import replace
import math
import os
import sys
import tempfile

from . import bench as bench_mod
from . import bounds, estimators, signals, spectrum
from .errors import NumericalError

OUT_DIR_ENV = "CISUM_OUT_DIR"


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; the CLI contract
    reserves 2 for numerical failures, so remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(1)


def _atomic_write(path: str, writer) -> None:
    """writer(tmp_path) then rename into place."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-cisum-")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _atomic_write_text(path: str, text: str) -> None:
    def writer(tmp):
        with open(tmp, "w") as fh:
            fh.write(text)
    _atomic_write(path, writer)


def _csv_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="seed for any randomness in this subcommand")
    p.add_argument("--json", action="store_true",
                   help="emit machine-readable JSON on stdout")
    p.add_argument("--out", default=None,
                   help="write the primary output to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cisum",
                     description="cisoid sum-parameter estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="synthesize a signal")
    p.add_argument("--k", type=int, default=None,
                   help="component count (checked against --amp/--freq lists)")
    p.add_argument("--amp", default=None,
                   help="comma-separated linear amplitudes")
    p.add_argument("--freq", default=None,
                   help="comma-separated frequencies in cycles per sample")
    p.add_argument("--phase", default=None,
                   help="comma-separated phases in radians")
    p.add_argument("--random", action="store_true",
                   help="draw a random scenario instead of explicit components")
    p.add_argument("--freq-range", default="0.05,0.45",
                   help="random mode: low,high band in cycles per sample")
    p.add_argument("--dyn-db", type=float, default=40.0,
                   help="random mode: log-normal amplitude dynamic range "
                        "(the +-2 sigma spread of 20*log10(a), in dB)")
    p.add_argument("--snr-db", type=float, default=None,
                   help="random mode: target SNR; scales P_sig with sigma2=1")
    p.add_argument("--min-sep", type=float, default=None,
                   help="random mode: normalized frequency gap floor "
                        "(default 4/N)")
    p.add_argument("--raw", action="store_true",
                   help="random mode: disable the separation floor")
    p.add_argument("--n", type=int, required=True, help="sample count")
    p.add_argument("--ts", type=float, default=1.0,
                   help="sampling interval in seconds")
    p.add_argument("--sigma2", type=float, default=0.0,
                   help="total complex noise variance (0 = noiseless)")
    p.add_argument("--spectrum", default=None,
                   help="also write a periodogram CSV to this path")
    p.add_argument("--window", default="rectangular",
                   choices=["rectangular", "blackman_harris_4"])
    p.add_argument("--zero-pad", type=int, default=1, choices=[1, 2, 4, 8])
    p.add_argument("--ground-truth", action="store_true",
                   help="print the exact sum-parameters as JSON")
    _add_common(p)

    p = sub.add_parser("estimate", help="estimate sum-parameters from CSV")
    p.add_argument("--input", required=True, help="signal CSV (n,re,im)")
    p.add_argument("--method", required=True,
                   choices=["egem", "ipfft", "rootmusic"])
    p.add_argument("--order", type=int, default=None,
                   help="model order (required for rootmusic)")
    p.add_argument("--max-peaks", type=int, default=64)
    p.add_argument("--max-iter", type=int, default=8)
    p.add_argument("--noise-sigma2", type=float, default=None,
                   help="known noise variance (otherwise estimated)")
    p.add_argument("--trace", default=None,
                   help="write per-iteration snapshots to this CSV")
    _add_common(p)

    p = sub.add_parser("crb", help="closed-form bound table")
    p.add_argument("--p-sig", type=float, required=True)
    p.add_argument("--sigma2", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ts", type=float, default=1.0)
    _add_common(p)

    p = sub.add_parser("audit", help="closed-form vs numerical-oracle audit")
    p.add_argument("--ensemble", default=None,
                   help="ensemble JSON file (as written by synth --json)")
    p.add_argument("--random", action="store_true",
                   help="audit a random scenario")
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--freq-range", default="0.05,0.45")
    p.add_argument("--dyn-db", type=float, default=40.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--ts", type=float, default=1.0)
    _add_common(p)

    p = sub.add_parser("bench", help="run the Monte-Carlo benchmark")
    p.add_argument("--config", default=None,
                   help="experiment JSON (default: built-in desk-scale grid)")
    p.add_argument("--out-dir", default=None,
                   help=f"output directory (default ${OUT_DIR_ENV} or .)")
    p.add_argument("--trials", type=int, default=None,
                   help="override the config trial count")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock column in trials.csv "
                        "(breaks bitwise reproducibility)")
    p.add_argument("--raw", action="store_true",
                   help="disable the minimum-separation floor")
    _add_common(p)

    p = sub.add_parser("report", help="rebuild the claims table from a summary")
    p.add_argument("--summary", required=True, help="summary.csv path")
    _add_common(p)

    return parser


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    ts = args.ts
    if args.seed is None:
        args.seed = 0
    if args.random:
        if args.snr_db is None:
            raise ValueError("--random needs --snr-db")
        lo, hi = _csv_floats(args.freq_range)
        min_sep = 0.0 if args.raw else args.min_sep
        cfg = signals.ScenarioConfig(
            k=args.k or 12, freq_range=(lo, hi),
            amp_dynamic_range_db=args.dyn_db, n=args.n, snr_db=args.snr_db,
            seed=args.seed, min_separation=min_sep, ts=ts)
        ensemble = signals.random_ensemble(cfg)
    else:
        if args.amp is None or args.freq is None:
            raise ValueError("need --amp and --freq (or --random)")
        amps = _csv_floats(args.amp)
        freqs = _csv_floats(args.freq)
        phases = _csv_floats(args.phase) if args.phase else [0.0] * len(amps)
        if args.k is not None and args.k != len(amps):
            raise ValueError(f"--k {args.k} does not match {len(amps)} amplitudes")
        if not len(amps) == len(freqs) == len(phases):
            raise ValueError("--amp/--freq/--phase lengths differ")
        ensemble = signals.CisoidEnsemble(
            tuple(signals.Cisoid(a, 2.0 * math.pi * f / ts, p)
                  for a, f, p in zip(amps, freqs, phases)), ts)

    signal = signals.synthesize(ensemble, args.n,
                                signals.NoiseModel(args.sigma2), args.seed)
    theta = signals.ground_truth_sum_params(ensemble)

    if args.out:
        _atomic_write(args.out, lambda tmp: signals.write_signal_csv(
            signal, tmp, seed=args.seed, sigma2=args.sigma2))
    if args.spectrum:
        pg = spectrum.periodogram(signal, args.window, args.zero_pad)
        _atomic_write(args.spectrum,
                      lambda tmp: spectrum.write_periodogram_csv(pg, tmp))
    if args.ground_truth:
        print(signals.sum_params_to_json(theta))
    elif args.json:
        print(json.dumps({
            "ensemble": json.loads(signals.ensemble_to_json(ensemble)),
            "sum_params": json.loads(signals.sum_params_to_json(theta)),
            "n": args.n, "sigma2": args.sigma2, "seed": args.seed,
        }, indent=2))
    return 0


def _result_doc(method: str, result) -> dict:
    return {
        "method": method,
        "theta_hat": json.loads(signals.sum_params_to_json(result.theta_hat)),
        "p_hat": result.p_hat,
        "sigma2_hat": result.sigma2_hat,
        "iterations": result.iterations,
        "converged": result.converged,
    }


def _cmd_estimate(args) -> int:
    signal, _ = signals.read_signal_csv(args.input)
    if args.method == "egem":
        cfg = estimators.EgemConfig(max_iter=args.max_iter,
                                    noise_sigma2=args.noise_sigma2,
                                    max_peaks=args.max_peaks,
                                    trace=args.trace is not None)
        result = estimators.egem_estimate(signal, cfg)
    elif args.method == "ipfft":
        result = estimators.zoom_ipfft_estimate(signal,
                                                max_peaks=args.max_peaks)
    else:
        if args.order is None:
            raise ValueError("--method rootmusic needs --order")
        result = estimators.root_music_estimate(signal, args.order)

    text = json.dumps(_result_doc(args.method, result), indent=2)
    print(text)
    if args.out:
        _atomic_write_text(args.out, text + "\n")
    if args.trace and result.per_iteration_trace is not None:
        lines = ["iteration,omega_hat,re_phi_hat,im_phi_hat,sigma_sum_hat"]
        for i, (om, phi, sig) in enumerate(result.per_iteration_trace, 1):
            lines.append(f"{i},{float(om)!r},{float(phi.real)!r},{float(phi.imag)!r},{float(sig)!r}")
        _atomic_write_text(args.trace, "\n".join(lines) + "\n")
    return 0


def _cmd_crb(args) -> int:
    sigma_b = bounds.crb_sigma_closed(args.sigma2, args.p_sig)
    omega_b = bounds.crb_omega_closed(args.sigma2, args.p_sig, args.ts, args.n)
    phi_b = bounds.crb_phi_closed(args.sigma2, args.p_sig, args.n)
    phi_a = bounds.crb_phi_closed_approx(args.sigma2, args.p_sig, args.n)
    doc = {"crb_sigma": sigma_b, "crb_omega": omega_b,
           "crb_phi": phi_b, "crb_phi_approx": phi_a}
    if args.json:
        text = json.dumps(doc, indent=2)
        print(text)
    else:
        text = "\n".join([
            "closed-form bounds (variance)",
            f"  {'CRB(Sigma)':<18} {sigma_b:.6e}",
            f"  {'CRB(Omega)':<18} {omega_b:.6e}",
            f"  {'CRB(Phi) exact':<18} {phi_b:.6e}",
            f"  {'CRB(Phi) approx':<18} {phi_a:.6e}",
        ])
        print(text)
    if args.out:
        _atomic_write_text(args.out, json.dumps(doc, indent=2) + "\n")
    return 0


def _cmd_audit(args) -> int:
    if args.seed is None:
        args.seed = 0
    if args.ensemble:
        with open(args.ensemble) as fh:
            ensemble = signals.ensemble_from_json(fh.read())
        sigma2 = args.sigma2
    else:
        lo, hi = _csv_floats(args.freq_range)
        cfg = signals.ScenarioConfig(
            k=args.k, freq_range=(lo, hi), amp_dynamic_range_db=args.dyn_db,
            n=args.n, snr_db=args.snr_db, seed=args.seed, ts=args.ts)
        ensemble = signals.random_ensemble(cfg)
        sigma2 = 1.0
    report = bounds.crb_audit(ensemble, sigma2, args.n)
    if args.json:
        print(report.to_json())
    else:
        sep = ("inf" if report.separation_metric is None
               else f"{report.separation_metric:.3f}")
        lines = [
            "bound audit (closed form / numerical oracle)",
            f"  {'parameter':<12} {'closed':>14} {'numerical':>14} "
            f"{'ratio':>12} flag",
            f"  {'sigma_sum':<12} {report.closed_form.crb_sigma:>14.6e} "
            f"{report.numerical[0, 0]:>14.6e} "
            f"{report.ratios['sigma_sum']:>12.4e} "
            f"{'*' if report.flagged['sigma_sum'] else ''}",
            f"  {'omega_sum':<12} {report.closed_form.crb_omega:>14.6e} "
            f"{report.numerical[1, 1]:>14.6e} "
            f"{report.ratios['omega_sum']:>12.4e} "
            f"{'*' if report.flagged['omega_sum'] else ''}",
            f"  {'phi_sum':<12} {report.closed_form.crb_phi:>14.6e} "
            f"{report.numerical[2, 2] + report.numerical[3, 3]:>14.6e} "
            f"{report.ratios['phi_sum']:>12.4e} "
            f"{'*' if report.flagged['phi_sum'] else ''}",
            f"  separation metric: {sep}   rank: {report.rank}   "
            f"condition: {report.condition_number:.3e}",
            "  (* ratio outside [0.95, 1.05]; see README on conventions)",
        ]
        print("\n".join(lines))
    if args.out:
        _atomic_write_text(args.out, report.to_json() + "\n")
    return 0


def _cmd_bench(args) -> int:
    if args.config is not None:
        with open(args.config) as fh:
            config = bench_mod.ExperimentConfig.from_json(fh.read())
    else:
        config = bench_mod.default_experiment_config()
    if args.trials is not None:
        config = replace(config, trials=args.trials)
    if args.seed is not None:
        config = replace(config, base_seed=args.seed)
    if args.raw:
        config = replace(config, scenario=replace(config.scenario,
                                                  min_separation=0.0))

    out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV, ".")
    os.makedirs(out_dir, exist_ok=True)
    records, summary = bench_mod.run_experiment(config, jobs=args.jobs)
    report = bench_mod.paper_table_repro(summary)

    _atomic_write(os.path.join(out_dir, "trials.csv"),
                  lambda tmp: bench_mod.write_trials_csv(
                      records, tmp, include_elapsed=args.timings))
    _atomic_write(os.path.join(out_dir, "summary.csv"),
                  lambda tmp: bench_mod.write_summary_csv(summary, tmp))
    _atomic_write_text(os.path.join(out_dir, "claims.txt"),
                       report.to_text())
    if args.json:
        print(json.dumps({"out_dir": out_dir,
                          "trials": len(records),
                          "cells": len(config.n_values) * len(config.snr_grid_db)},
                         indent=2))
    else:
        print(f"wrote trials.csv, summary.csv, claims.txt to {out_dir}")
    return 0


def _cmd_report(args) -> int:
    summary = bench_mod.read_summary_csv(args.summary)
    report = bench_mod.paper_table_repro(summary)
    text = report.to_text()
    print(text, end="")
    if args.out:
        _atomic_write_text(args.out, text)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "estimate": _cmd_estimate,
    "crb": _cmd_crb,
    "audit": _cmd_audit,
    "bench": _cmd_bench,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (FileNotFoundError, ValueError) as exc:
        sys.stderr.write(f"cisum {args.command}: error: {exc}\n")
        return 1
    except NumericalError as exc:
        sys.stderr.write(json.dumps({
            "error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
