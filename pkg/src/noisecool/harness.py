"""Power and bandwidth sweeps with analytic overlays, plus table I/O."""
from __future__ import annotations

import concurrent.futures
import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .analytics import predict
from .dynamics import run_ensemble
from .errors import EmptyTable, InvalidArgument, NoisecoolError
from .params import TWO_PI, NoiseDrive, SimConfig, SystemParams, derive_seed, renormalize_for_probe
from .spectra import (LineFit, effective_linewidths, fit_lorentzian, fwhm_numeric, mechanical_spectrum,
                      occupancy_from_spectrum)

NAN = float("nan")
LINEWIDTH_DISAGREE = 0.10


@dataclass
class SweepRow:
    """One grid point. Simulation columns are NaN when the simulation is skipped or fails."""

    flux: float
    n_bar0: float
    sigma: float
    gamma_opt_pred: float
    gamma_eff_pred: float
    gamma_eff_pred_qn: float
    gamma_eff_pred_adiabatic: float
    n_m_pred: float
    n_m_pred_qn: float
    n_m_pred_adiabatic: float
    regime: str
    n_th: float
    seed: int
    n_m_sim: float = NAN
    n_m_stderr: float = NAN
    n_m_spectral: float = NAN
    gamma_eff_sim: float = NAN
    gamma_eff_fit: float = NAN
    gamma_eff_fwhm: float = NAN
    gamma_eff_source: str = "none"
    fit_residual_norm: float = NAN
    fit_converged: bool = False
    linewidth_flag: bool = False
    status: str = "ok"


_FIELD_TYPES = {f.name: f.type for f in fields(SweepRow)}


@dataclass
class SweepTable:
    kind: str
    rows: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def ok(self) -> bool:
        return all(r.status == "ok" for r in self.rows)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def _check_grid(grid, name):
    g = [float(v) for v in grid]
    if not g:
        raise InvalidArgument(f"{name} is empty")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise InvalidArgument(f"{name} must be strictly ascending")
    return g


def _predicted_row(params: SystemParams, drive: NoiseDrive, n_th: float, seed: int) -> SweepRow:
    pred = predict(params, drive)
    return SweepRow(
        flux=drive.flux, n_bar0=pred.n_bar0, sigma=drive.sigma,
        gamma_opt_pred=pred.gamma_opt, gamma_eff_pred=pred.gamma_eff,
        gamma_eff_pred_qn=pred.gamma_eff_qn, gamma_eff_pred_adiabatic=pred.gamma_eff_adiabatic,
        n_m_pred=pred.n_m, n_m_pred_qn=pred.n_m_qn, n_m_pred_adiabatic=pred.n_m_adiabatic,
        regime=pred.regime.value, n_th=n_th, seed=seed,
    )


def _simulate_row(row: SweepRow, params, drive, cfg, segment_length):
    try:
        ens = run_ensemble(params, drive, cfg, seed=row.seed)
    except NoisecoolError as exc:
        row.status = exc.code or "ERROR"
        return row
    row.n_m_sim = ens.n_m_mean
    row.n_m_stderr = ens.n_m_stderr
    try:
        spec = mechanical_spectrum(ens.trajectories, segment_length)
    except NoisecoolError as exc:
        row.status = exc.code or "ERROR"
        return row
    fit = fit_lorentzian(spec)
    row.fit_converged = fit.converged
    row.fit_residual_norm = fit.residual_norm
    if fit.converged:
        row.gamma_eff_fit = fit.fwhm
    try:
        row.gamma_eff_fwhm = fwhm_numeric(spec)
    except NoisecoolError:
        pass
    try:
        row.n_m_spectral = occupancy_from_spectrum(spec, fit, stderr=ens.n_m_stderr)
    except NoisecoolError as exc:
        row.status = exc.code or "ERROR"
    if not (fit.converged or math.isfinite(row.gamma_eff_fwhm)):
        row.status = "UNDER_RESOLVED"
    return row


def _row_job(args):
    index, params, drive, cfg, master, simulate, n_th_map, segment_length = args
    seed = derive_seed(master, index)
    n_th = float(n_th_map(drive.flux)) if n_th_map is not None else params.n_th
    p = params.replace(n_th=n_th)
    drive = drive.replace(seed=seed)
    try:
        row = _predicted_row(p, drive, n_th, seed)
    except NoisecoolError as exc:
        row = SweepRow(drive.flux, NAN, drive.sigma, NAN, NAN, NAN, NAN, NAN, NAN, NAN,
                       "NONE", n_th, seed, status=exc.code or "ERROR")
        return row
    if simulate:
        row = _simulate_row(row, p, drive, cfg, segment_length)
    return row


def _select_linewidths(rows):
    sim = [r for r in rows if math.isfinite(r.n_m_sim)]
    if not sim:
        return
    fits = [LineFit(0.0, r.gamma_eff_fit, 0.0, 0.0, r.fit_residual_norm, r.fit_converged) for r in sim]
    for r, (width, source) in zip(sim, effective_linewidths(fits, [r.gamma_eff_fwhm for r in sim])):
        r.gamma_eff_sim = float(width)
        r.gamma_eff_source = source if math.isfinite(width) else "none"
        if math.isfinite(r.gamma_eff_fit) and math.isfinite(r.gamma_eff_fwhm):
            r.linewidth_flag = abs(r.gamma_eff_fit - r.gamma_eff_fwhm) > LINEWIDTH_DISAGREE * r.gamma_eff_fwhm


def _run_rows(jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_row_job, jobs))
    return [_row_job(j) for j in jobs]


def sweep_power(params: SystemParams, sigma: float, flux_grid: Sequence[float], cfg: SimConfig,
                seed: int = 0, simulate: bool = True,
                n_th_map: Optional[Callable[[float], float]] = None,
                segment_length: Optional[int] = None, workers: int = 1,
                center_detuning: float = 0.0) -> SweepTable:
    """One row per flux at fixed bandwidth.

    Row ``i`` uses seed ``derive_seed(seed, i)``, so the table does not
    depend on ``workers``. ``n_th_map`` optionally sets the bath occupancy
    per flux, modelling drive-induced heating. Per-row failures are
    recorded in ``status`` and the sweep continues.
    """
    grid = _check_grid(flux_grid, "flux_grid")
    jobs = [(i, params, NoiseDrive(F, sigma, center_detuning), cfg, seed, simulate, n_th_map,
             segment_length) for i, F in enumerate(grid)]
    rows = _run_rows(jobs, workers)
    _select_linewidths(rows)
    rows.sort(key=lambda r: r.flux)
    return SweepTable("power", rows, {"sigma": sigma, "seed": seed, "simulate": simulate})


def sweep_bandwidth(params: SystemParams, flux: float, sigma_grid: Sequence[float], cfg: SimConfig,
                    seed: int = 0, simulate: bool = True,
                    n_th_map: Optional[Callable[[float], float]] = None,
                    segment_length: Optional[int] = None, workers: int = 1,
                    require_span: bool = True) -> SweepTable:
    """One row per bandwidth at fixed flux.

    With simulation enabled the grid must reach below the narrow-band
    optical damping and above ``kappa`` unless ``require_span`` is False.
    ``meta`` records the bandwidths minimizing the predicted and the
    simulated occupancy.
    """
    grid = _check_grid(sigma_grid, "sigma_grid")
    if simulate and require_span:
        p = renormalize_for_probe(params)
        g_narrow = predict(p, NoiseDrive(flux, grid[0])).gamma_opt
        if not (grid[0] < g_narrow and grid[-1] > p.kappa):
            raise InvalidArgument("sigma_grid must span from below gamma_opt to above kappa",
                                  code="GRID_TOO_NARROW")
    jobs = [(i, params, NoiseDrive(flux, s), cfg, seed, simulate, n_th_map, segment_length)
            for i, s in enumerate(grid)]
    rows = _run_rows(jobs, workers)
    _select_linewidths(rows)
    rows.sort(key=lambda r: r.sigma)
    meta = {"flux": flux, "seed": seed, "simulate": simulate,
            "sigma_min_pred": _argmin_sigma(rows, "n_m_pred"),
            "sigma_min_sim": _argmin_sigma(rows, "n_m_sim")}
    return SweepTable("bandwidth", rows, meta)


def _argmin_sigma(rows, name):
    vals = np.array([getattr(r, name) for r in rows], dtype=float)
    if not np.isfinite(vals).any():
        return NAN
    return rows[int(np.nanargmin(vals))].sigma


# --- output -------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(name, text):
    t = _FIELD_TYPES[name]
    if t in ("float", float):
        return float(text)
    if t in ("int", int):
        return int(text)
    if t in ("bool", bool):
        return text == "true"
    return text


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else repr(v)
    return v


def emit(table: SweepTable, fmt: str, path) -> Path:
    """Write ``table`` as ``csv``, ``json`` or ``svg-plot`` and return the path.

    CSV and JSON round-trip exactly through :func:`read_table`. Metadata
    goes to ``#`` comment lines in CSV.
    """
    if table is None or len(table) == 0:
        raise EmptyTable("cannot emit an empty table")
    path = Path(path)
    names = [f.name for f in fields(SweepRow)]
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                fh.write(f"# kind={table.kind}\n")
                for k, v in table.meta.items():
                    fh.write(f"# {k}={_fmt(v)}\n")
                w = csv.writer(fh)
                w.writerow(names)
                for r in table.rows:
                    w.writerow([_fmt(getattr(r, n)) for n in names])
        elif fmt == "json":
            doc = {"kind": table.kind, "meta": {k: _json_safe(v) for k, v in table.meta.items()},
                   "rows": [{k: _json_safe(v) for k, v in asdict(r).items()} for r in table.rows]}
            path.write_text(json.dumps(doc, indent=1))
        elif fmt == "svg-plot":
            from .plotting import plot_sweep

            if table.kind == "bandwidth":
                plot_sweep(table.rows, "sigma", r"$\sigma/2\pi$ (Hz)", path, "svg", 1 / TWO_PI)
            else:
                plot_sweep(table.rows, "n_bar0", r"$\bar n_0$", path, "svg")
        else:
            raise InvalidArgument(f"unknown format {fmt!r}; use csv, json or svg-plot")
    except OSError as exc:
        raise NoisecoolError(f"cannot write {path}: {exc}", code="IO_ERROR") from exc
    return path


def read_table(path) -> SweepTable:
    """Parse a table written by :func:`emit` in csv or json format."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        rows = []
        for d in doc["rows"]:
            vals = {k: (NAN if v is None else (float(v) if isinstance(v, str) and _FIELD_TYPES[k] in ("float", float) else v))
                    for k, v in d.items()}
            rows.append(SweepRow(**vals))
        meta = {k: (NAN if v is None else v) for k, v in doc["meta"].items()}
        return SweepTable(doc["kind"], rows, meta)
    lines = text.splitlines()
    meta, kind = {}, ""
    body = []
    for line in lines:
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            if k == "kind":
                kind = v
            else:
                meta[k] = _meta_value(v)
        else:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    rows = [SweepRow(**{n: _parse(n, v) for n, v in zip(header, rec)}) for rec in reader if rec]
    return SweepTable(kind, rows, meta)


def _meta_value(text):
    if text in ("true", "false"):
        return text == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def heating_map_from_csv(path) -> Callable[[float], float]:
    """``n_th(flux)`` by linear interpolation of a ``flux,n_th`` CSV (clamped at the ends)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except ValueError as exc:
        raise InvalidArgument(f"{path}: expected numeric flux,n_th rows") from exc
    order = np.argsort(data[:, 0])
    return HeatingMap(data[order, 0], data[order, 1])


@dataclass
class HeatingMap:
    """Piecewise-linear ``n_th(flux)``; picklable, so usable with worker pools."""

    flux: np.ndarray
    n_th: np.ndarray

    def __call__(self, F):
        return float(np.interp(F, self.flux, self.n_th))
