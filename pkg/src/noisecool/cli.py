"""Command-line interface: ``noisecool <command> [options]``.

Frequencies, bandwidths and detunings on the command line are in Hz;
fluxes in photons/s. Every command writes its delimited output (CSV or
JSON) to ``--out`` (stdout when omitted) and, where a figure makes sense,
an SVG/PNG next to it.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import analytics, harness, noisegen, plotting, spectra
from .dynamics import run_ensemble, run_trajectory
from .errors import NoisecoolError
from .params import (TWO_PI, CoherentDrive, NoiseDrive, SimConfig, load_cfg,
                     load_params, require_valid)

log = logging.getLogger("noisecool")

DEFAULT_CFG = "desk"


def _cfg(source) -> SimConfig:
    return load_cfg(source or DEFAULT_CFG)


def _grid(spec: str, scale: float = 1.0) -> list[float]:
    """``lo:hi:n`` (log-spaced) or a comma-separated list."""
    if ":" in spec:
        lo, hi, n = spec.split(":")
        return list(np.geomspace(float(lo), float(hi), int(n)) * scale)
    return [float(v) * scale for v in spec.split(",")]


def _flux(args, params) -> float:
    if getattr(args, "n_bar0", None) is not None:
        return float(analytics.flux_for_photons(args.n_bar0, params))
    if args.flux is None:
        raise NoisecoolError("give --flux or --n-bar0", code="INVALID_ARGUMENT")
    return float(args.flux)


def _figure_path(out, suffix):
    if out is None:
        return None
    out = Path(out)
    return out.with_name(out.stem + suffix)


def _write_text(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _write_record(record: dict, fmt: str, out):
    if fmt == "csv":
        lines = [",".join(record), ",".join(_cell(v) for v in record.values())]
        _write_text("\n".join(lines) + "\n", out)
    else:
        _write_text(json.dumps(record, indent=1, default=_jsonable) + "\n", out)


def _cell(v):
    return repr(v) if isinstance(v, float) else str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if hasattr(v, "value"):
        return v.value
    return str(v)


# --- commands -----------------------------------------------------------

def cmd_predict(args, params):
    flux = _flux(args, params)
    if args.coherent:
        drive = CoherentDrive(flux, TWO_PI * args.detuning_hz)
    else:
        drive = NoiseDrive(flux, TWO_PI * args.sigma_hz, TWO_PI * args.center_hz)
    require_valid(params, drive)
    pred = analytics.predict(params, drive)
    rec = {"flux": flux, **pred.to_dict()}
    _write_record(rec, args.format, args.out)
    return 0


def cmd_gen_noise(args, params):
    flux = _flux(args, params)
    drive = NoiseDrive(flux, TWO_PI * args.sigma_hz, TWO_PI * args.center_hz, args.seed)
    dt = args.dt if args.dt else TWO_PI / (20 * (abs(drive.center_detuning) + drive.sigma))
    env = noisegen.synth_box_noise(drive, args.duration, dt)
    out = args.out or "noise.bin"
    noisegen.write_envelope(env, out)
    tau = noisegen.autocorrelation_time(env)
    rec = {"path": str(out), "samples": len(env.samples), "dt": dt, "flux_nominal": flux,
           "mean_power": env.mean_power(), "correlation_time": tau.tau, "flag": tau.flag}
    sys.stdout.write(json.dumps(rec, indent=1) + "\n")
    return 0


def cmd_psd_check(args, params):
    env = noisegen.read_envelope(args.envelope)
    drive = NoiseDrive(env.flux_nominal, TWO_PI * args.sigma_hz, TWO_PI * args.center_hz)
    q = noisegen.box_quality(env, drive, args.segment)
    spec = noisegen.psd_welch(env, args.segment)
    rec = q._asdict()
    rec["passed"] = bool(q.flatness <= 0.01 and q.rejection_db >= 60 and abs(q.flux_ratio - 1) <= 0.03
                         and q.excess_kurtosis < 0.1)
    if args.out:
        noisegen.write_spectrum_csv(spec, _figure_path(args.out, "_psd.csv"))
        plotting.plot_noise_psd(spec, drive.sigma, drive.flux, _figure_path(args.out, "_psd.svg"),
                                center=drive.center_detuning)
    _write_record(rec, args.format, args.out)
    return 0 if rec["passed"] else 1


def _sim_drive(args, params):
    flux = _flux(args, params)
    if args.coherent:
        return CoherentDrive(flux, TWO_PI * args.detuning_hz, args.seed)
    return NoiseDrive(flux, TWO_PI * args.sigma_hz, TWO_PI * args.center_hz, args.seed)


def cmd_simulate(args, params):
    cfg = _cfg(args.cfg)
    drive = _sim_drive(args, params)
    if args.ensemble:
        cfg = cfg.replace(n_traj=args.ensemble)
        ens = run_ensemble(params, drive, cfg, seed=args.seed, workers=args.workers)
        rec = ens.to_dict()
        pred = analytics.predict(params, drive)
        rec.update({"n_m_pred": pred.n_m, "gamma_opt_pred": pred.gamma_opt, "regime": pred.regime.value})
        try:
            spec = spectra.mechanical_spectrum(ens.trajectories)
            fit = spectra.fit_lorentzian(spec)
            rec["fit"] = fit.to_dict()
            rec["n_m_spectral"] = spectra.occupancy_from_spectrum(spec, fit, ens.n_m_stderr)
            if args.out:
                spectra_path = _figure_path(args.out, "_spectrum.csv")
                noisegen.write_spectrum_csv(spec, spectra_path)
                plotting.plot_spectrum(spec, fit, _figure_path(args.out, "_spectrum.svg"))
        except NoisecoolError as exc:
            rec["spectrum_error"] = exc.code
        _write_text(json.dumps(rec, indent=1, default=_jsonable) + "\n", args.out)
        return 0
    traj = run_trajectory(params, drive, cfg, args.seed)
    cols = ["t_s", "re_alpha", "im_alpha", "re_d", "im_d", "re_b", "im_b", "occupancy"]
    own = args.out is not None
    fh = open(args.out, "w", newline="") if own else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(cols)
        occ = traj.occupancy_series
        for k in range(len(traj.times)):
            a, d, b = traj.alpha[k], traj.d[k], traj.b[k]
            w.writerow([repr(float(v)) for v in
                        (traj.times[k], a.real, a.imag, d.real, d.imag, b.real, b.imag, occ[k])])
    finally:
        if own:
            fh.close()
    if own:
        plotting.plot_trajectory(traj, _figure_path(args.out, ".svg"))
    log.info("time-averaged occupancy %.4g", traj.occupancy)
    return 0


def _emit_table(table, args):
    out = args.out
    if out is None:
        fmt = "json" if args.format == "json" else "csv"
        with tempfile.TemporaryDirectory() as tmp:
            path = harness.emit(table, fmt, Path(tmp) / ("sweep." + fmt))
            sys.stdout.write(path.read_text())
        return
    fmt = args.format
    harness.emit(table, fmt, out)
    if fmt != "svg-plot":
        harness.emit(table, "svg-plot", Path(out).with_suffix(".svg"))


def _heating(args):
    return harness.heating_map_from_csv(args.heating_map) if args.heating_map else None


def cmd_sweep_power(args, params):
    if args.n_bar0_grid:
        grid = [float(analytics.flux_for_photons(n, params)) for n in _grid(args.n_bar0_grid)]
    else:
        grid = _grid(args.flux_grid)
    table = harness.sweep_power(params, TWO_PI * args.sigma_hz, grid, _cfg(args.cfg), args.seed,
                                simulate=not args.no_sim, n_th_map=_heating(args),
                                workers=args.workers)
    _emit_table(table, args)
    return 0 if table.ok else 1


def cmd_sweep_bandwidth(args, params):
    flux = _flux(args, params)
    grid = _grid(args.sigma_grid_hz, TWO_PI)
    table = harness.sweep_bandwidth(params, flux, grid, _cfg(args.cfg), args.seed,
                                    simulate=not args.no_sim, n_th_map=_heating(args),
                                    workers=args.workers)
    _emit_table(table, args)
    return 0 if table.ok else 1


def cmd_fit_spectrum(args, params):
    spec = noisegen.read_spectrum_csv(args.spectrum)
    fit = spectra.fit_lorentzian(spec)
    rec = fit.to_dict()
    try:
        rec["fwhm_numeric"] = spectra.fwhm_numeric(spec)
    except NoisecoolError as exc:
        rec["fwhm_numeric"] = None
        rec["fwhm_error"] = exc.code
    if args.out:
        plotting.plot_spectrum(spec, fit, _figure_path(args.out, ".svg"))
    _write_record(rec, args.format if args.format != "svg-plot" else "json", args.out)
    return 0 if fit.converged else 1


# --- parser -------------------------------------------------------------

def _add_drive(p, noise=True, coherent=False):
    p.add_argument("--flux", type=float, help="incoming photon flux (photons/s)")
    p.add_argument("--n-bar0", type=float, help="target intracavity photon number (sets the flux)")
    if noise:
        p.add_argument("--sigma-hz", type=float, default=200e3, help="noise bandwidth sigma/2pi (Hz)")
        p.add_argument("--center-hz", type=float, default=0.0, help="band-centre offset from the red sideband (Hz)")
    if coherent:
        p.add_argument("--coherent", action="store_true", help="constant tone instead of noise")
        p.add_argument("--detuning-hz", type=float, default=0.0, help="tone offset from the red sideband (Hz)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", default="desk", help="parameter JSON, or 'desk' / 'paper'")
    common.add_argument("--cfg", default=DEFAULT_CFG, help="simulation config JSON, or 'desk'")
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--out", help="output path (stdout if omitted)")
    common.add_argument("--format", choices=["csv", "json", "svg-plot"], default="json")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="noisecool", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", parents=[common], help="closed-form damping and occupancy")
    _add_drive(p, coherent=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("gen-noise", parents=[common], help="synthesize a box-noise envelope file")
    _add_drive(p)
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--dt", type=float, help="sample interval (s); default resolves the band 10x")
    p.set_defaults(func=cmd_gen_noise)

    p = sub.add_parser("psd-check", parents=[common], help="flatness, rejection and Gaussianity of an envelope")
    p.add_argument("envelope")
    p.add_argument("--sigma-hz", type=float, required=True)
    p.add_argument("--center-hz", type=float, default=0.0)
    p.add_argument("--segment", type=int, default=1024)
    p.set_defaults(func=cmd_psd_check)

    p = sub.add_parser("simulate", parents=[common], help="one trajectory (CSV) or an ensemble (JSON)")
    _add_drive(p, coherent=True)
    p.add_argument("--ensemble", type=int, metavar="K", help="run K trajectories and report JSON")
    p.set_defaults(func=cmd_simulate)

    for name, func in (("sweep-power", cmd_sweep_power), ("sweep-bandwidth", cmd_sweep_bandwidth)):
        p = sub.add_parser(name, parents=[common], help=f"{name.split('-')[1]} sweep table and figure")
        p.add_argument("--no-sim", action="store_true", help="analytic columns only")
        p.add_argument("--heating-map", help="CSV of flux,n_th for bath heating")
        if name == "sweep-power":
            p.add_argument("--sigma-hz", type=float, default=200e3)
            g = p.add_mutually_exclusive_group(required=True)
            g.add_argument("--flux-grid", help="lo:hi:n (log) or comma list, photons/s")
            g.add_argument("--n-bar0-grid", help="lo:hi:n (log) or comma list of photon numbers")
        else:
            _add_drive(p, noise=False)
            p.add_argument("--sigma-grid-hz", required=True, help="lo:hi:n (log) or comma list, Hz")
        p.set_defaults(func=func)

    p = sub.add_parser("fit-spectrum", parents=[common], help="Lorentzian fit of a spectrum CSV")
    p.add_argument("spectrum")
    p.set_defaults(func=cmd_fit_spectrum)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        params = load_params(args.params)
        return args.func(args, params)
    except NoisecoolError as exc:
        sys.stderr.write(f"error [{exc.code}]: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
