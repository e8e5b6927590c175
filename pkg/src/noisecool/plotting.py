"""Figure helpers. Figures are built on ``matplotlib.figure.Figure`` so no
global pyplot state is touched and rendering works headless."""
from __future__ import annotations

import math

import numpy as np
from matplotlib.figure import Figure

from .params import TWO_PI

GOLDEN = (math.sqrt(5) - 1) / 2

RC = {
    "font.size": 9,
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.4,
    "lines.markersize": 4,
    "legend.frameon": False,
    "svg.fonttype": "none",
    "svg.hashsalt": "noisecool",
}

# prediction families and the colours used for them in every figure
FAMILY_STYLE = {
    "pred_qn": dict(color="tab:blue", ls="-", label="quantum-noise prediction"),
    "pred_adiabatic": dict(color="tab:orange", ls="--", label="adiabatic prediction"),
    "pred_selected": dict(color="0.3", ls=":", label="regime-selected prediction"),
}


def new_figure(width=6.5, height=None, ncols=1, nrows=1):
    """Figure with ``ncols x nrows`` axes, golden-ratio height per row by default."""
    import matplotlib

    matplotlib.rcParams.update(RC)
    if height is None:
        height = width / ncols * GOLDEN * nrows
    fig = Figure(figsize=(width, height), facecolor="w")
    axes = fig.subplots(nrows, ncols, squeeze=False)
    for ax in axes.flat:
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
    return fig, axes


def save(fig, path, fmt=None):
    fig.tight_layout()
    fig.savefig(path, format=fmt, metadata={"Date": None} if _is_svg(path, fmt) else None)


def _is_svg(path, fmt):
    return (fmt or str(path).rsplit(".", 1)[-1]).lower() == "svg"


def _positive(values):
    v = np.asarray(values, dtype=float)
    return np.where(v > 0, v, np.nan)


def plot_sweep(rows, x_field, x_label, path, fmt=None, x_scale=1.0):
    """Two log-log panels: occupancy and effective linewidth against ``x_field``.

    Every artist carries a ``gid`` so the SVG groups are addressable:
    ``occupancy-pred_qn``, ``occupancy-sim``, ``linewidth-pred_qn`` and so on.
    """
    x = np.array([getattr(r, x_field) for r in rows], dtype=float) * x_scale
    fig, axes = new_figure(ncols=2)
    ax_n, ax_g = axes[0]
    curves_n = {
        "pred_qn": [r.n_m_pred_qn for r in rows],
        "pred_adiabatic": [r.n_m_pred_adiabatic for r in rows],
        "pred_selected": [r.n_m_pred for r in rows],
    }
    curves_g = {
        "pred_qn": [r.gamma_eff_pred_qn / TWO_PI for r in rows],
        "pred_adiabatic": [r.gamma_eff_pred_adiabatic / TWO_PI for r in rows],
        "pred_selected": [r.gamma_eff_pred / TWO_PI for r in rows],
    }
    for panel, ax, curves in (("occupancy", ax_n, curves_n), ("linewidth", ax_g, curves_g)):
        for fam, y in curves.items():
            (line,) = ax.plot(x, _positive(y), **FAMILY_STYLE[fam])
            line.set_gid(f"{panel}-{fam}")
    sim_n = np.array([r.n_m_sim for r in rows], dtype=float)
    err_n = np.array([r.n_m_stderr for r in rows], dtype=float)
    sim_g = np.array([r.gamma_eff_sim for r in rows], dtype=float) / TWO_PI
    if np.isfinite(sim_n).any():
        eb = ax_n.errorbar(x, _positive(sim_n), yerr=np.nan_to_num(err_n), fmt="o", color="k",
                           capsize=2, label="simulation")
        data_line, caps, bars = eb.lines
        data_line.set_gid("occupancy-sim")
        for k, art in enumerate(list(caps) + list(bars)):
            art.set_gid(f"occupancy-sim-errorbar{k}")
    if np.isfinite(sim_g).any():
        (pts,) = ax_g.plot(x, _positive(sim_g), "o", color="k", label="simulation")
        pts.set_gid("linewidth-sim")
    for ax in (ax_n, ax_g):
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(x_label)
    ax_n.set_ylabel("phonon occupancy $n_m$")
    ax_g.set_ylabel(r"$\gamma_\mathrm{eff}/2\pi$ (Hz)")
    ax_n.legend(fontsize=7)
    save(fig, path, fmt)
    return fig


def plot_spectrum(spec, fit, path, fmt=None, model=None):
    """Mechanical PSD with the fitted Lorentzian (frequency in kHz)."""
    from .spectra import lorentzian

    f_khz = spec.freqs / TWO_PI / 1e3
    fig, axes = new_figure(width=4.5)
    ax = axes[0, 0]
    ax.semilogy(f_khz, _positive(spec.psd), color="k", lw=0.8, label="estimate", gid="spectrum")
    if fit is not None and fit.fwhm > 0:
        y = lorentzian(spec.freqs, fit.center, fit.fwhm, fit.area, fit.baseline)
        ax.semilogy(f_khz, _positive(y), color="tab:red", label="Lorentzian fit", gid="fit")
        half = 3 * fit.fwhm / TWO_PI / 1e3
        ax.set_xlim(fit.center / TWO_PI / 1e3 - half, fit.center / TWO_PI / 1e3 + half)
    if model is not None:
        ax.semilogy(f_khz, _positive(model), color="tab:blue", ls="--", label="model", gid="model")
    ax.set_xlabel("frequency (kHz)")
    ax.set_ylabel("PSD (1/Hz)")
    ax.legend(fontsize=7)
    save(fig, path, fmt)
    return fig


def plot_noise_psd(spec, sigma, flux, path, fmt=None, center=0.0):
    """Envelope PSD in dB relative to the ideal in-band level."""
    level = TWO_PI * flux / sigma
    f_khz = spec.freqs / TWO_PI / 1e3
    fig, axes = new_figure(width=4.5)
    ax = axes[0, 0]
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(spec.psd / level)
    ax.plot(f_khz, db, color="k", lw=0.8, gid="psd")
    for edge in (center - sigma / 2, center + sigma / 2):
        ax.axvline(edge / TWO_PI / 1e3, color="tab:red", ls=":", lw=0.8)
    ax.set_xlabel("frequency offset (kHz)")
    ax.set_ylabel("PSD / ideal in-band level (dB)")
    ax.set_ylim(max(np.nanmin(db[np.isfinite(db)]) if np.isfinite(db).any() else -100, -200), 5)
    save(fig, path, fmt)
    return fig


def plot_trajectory(traj, path, fmt=None):
    """Occupancy and intracavity photon number against time."""
    fig, axes = new_figure(width=4.5, nrows=2, height=4.5)
    t_ms = traj.times * 1e3
    axes[0, 0].plot(t_ms, traj.occupancy_series, color="k", lw=0.5, gid="occupancy")
    axes[0, 0].axhline(traj.occupancy, color="tab:red", ls="--", lw=0.8)
    axes[0, 0].set_ylabel(r"$|b|^2 - 1/2$")
    axes[1, 0].plot(t_ms, np.abs(traj.alpha) ** 2, color="tab:blue", lw=0.5, gid="photons")
    axes[1, 0].set_ylabel(r"$|\bar\alpha|^2$")
    axes[1, 0].set_xlabel("time (ms)")
    for ax in axes.flat:
        ax.axvline(traj.times[min(traj.burn_index, len(traj.times) - 1)] * 1e3, color="0.6", lw=0.6)
    save(fig, path, fmt)
    return fig
