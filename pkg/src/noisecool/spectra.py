"""Mechanical spectra, lineshape fits and spectral thermometry."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import AmbiguousPeak, InvalidArgument, NormalizationFault, UnderResolved
from .noisegen import SpectrumEstimate, welch_density
from .params import TWO_PI

MIN_SEGMENTS = 2
MAX_FIT_ITER = 200
FIT_XTOL = 1e-6


@dataclass
class LineFit:
    """Baseline plus Lorentzian. ``area`` is per d(omega)/2pi, in the PSD's power units."""

    center: float
    fwhm: float
    area: float
    baseline: float
    residual_norm: float
    converged: bool

    @property
    def height(self) -> float:
        return 4 * self.area / self.fwhm if self.fwhm > 0 else 0.0

    def to_dict(self):
        return asdict(self)


def lorentzian(omega, center, fwhm, area, baseline=0.0):
    """Lorentzian with ``sum(L) dw/2pi == area`` over the real line."""
    return baseline + area * fwhm / ((omega - center) ** 2 + fwhm**2 / 4)


def mechanical_spectrum(trajectories: Sequence, segment_length: Optional[int] = None,
                        overlap_fraction: float = 0.5, window: str = "hann") -> SpectrumEstimate:
    """Ensemble- and segment-averaged PSD of ``b`` after burn-in.

    Normalized so that ``sum(psd) dw/2pi`` estimates ``<|b|^2> = n_m + 1/2``.
    The default segment is the largest power of two giving at least four
    segments per trajectory.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise InvalidArgument("no trajectories")
    dts = {round(t.sample_dt, 18) for t in trajectories}
    if len(dts) != 1:
        raise InvalidArgument("trajectories must share one sample interval")
    series = [np.asarray(t.b[t.post_burn()]) for t in trajectories]
    n = min(len(s) for s in series)
    if segment_length is None:
        segment_length = 1 << max(int(math.log2(max(n // 4, 1))), 0)
    if n < MIN_SEGMENTS * segment_length // 2 + segment_length // 2 or segment_length < 8:
        raise InvalidArgument(f"too few post-burn-in samples ({n}) for segments of {segment_length}")
    stack = np.stack([s[:n] for s in series])
    dt = trajectories[0].sample_dt
    w, p, n_seg = welch_density(stack, dt, segment_length, overlap_fraction, window)
    enbw = 1.5 if window == "hann" else 1.0
    return SpectrumEstimate(w, p.mean(axis=0), n_seg * len(series),
                            enbw * TWO_PI / (segment_length * dt))


def _halfmax_crossings(y, peak):
    half = y[peak] / 2
    i = peak
    while i > 0 and y[i] >= half:
        i -= 1
    j = peak
    while j < len(y) - 1 and y[j] >= half:
        j += 1
    if y[i] >= half or y[j] >= half:
        return None
    left = i + (half - y[i]) / (y[i + 1] - y[i])
    right = j - 1 + (y[j - 1] - half) / (y[j - 1] - y[j])
    return left, right


def fwhm_numeric(spec: SpectrumEstimate) -> float:
    """Full width at half maximum after subtracting the median as baseline.

    Crossings are located by linear interpolation between grid points.
    Raises :class:`UnderResolved` below three bins and :class:`AmbiguousPeak`
    when a second, separated peak also reaches half maximum.
    """
    y = np.asarray(spec.psd, dtype=float) - np.median(spec.psd)
    peak = int(np.argmax(y))
    if not y[peak] > 0:
        raise UnderResolved("no peak above the median baseline")
    cross = _halfmax_crossings(y, peak)
    if cross is None:
        raise UnderResolved("half-maximum crossings fall outside the grid")
    left, right = cross
    width_bins = right - left
    outside = np.ones(len(y), dtype=bool)
    outside[int(math.floor(left)):int(math.ceil(right)) + 1] = False
    if np.any(outside & (y >= y[peak] / 2)):
        # a second region at half maximum counts only if a real dip separates it
        for idx in np.flatnonzero(outside & (y >= y[peak] / 2)):
            lo, hi = sorted((idx, peak))
            if np.min(y[lo:hi + 1]) < y[peak] / 4:
                raise AmbiguousPeak("more than one peak reaches half maximum")
    if width_bins < 3:
        raise UnderResolved(f"peak spans only {width_bins:.2f} bins")
    return float(width_bins * spec.bin_width)


def _initial_guess(w, y):
    base = float(np.median(y))
    yy = y - base
    peak = int(np.argmax(yy))
    height = float(yy[peak])
    cross = _halfmax_crossings(yy, peak) if height > 0 else None
    dw = w[1] - w[0]
    width = (cross[1] - cross[0]) * dw if cross else 3 * dw
    return float(w[peak]), max(width, dw), height, base


def fit_lorentzian(spec: SpectrumEstimate, init: Optional[LineFit] = None) -> LineFit:
    """Least-squares fit of baseline + Lorentzian. Never raises.

    The data are rescaled to unit peak height and unit initial width before
    fitting, so scaling the PSD scales area and baseline and leaves centre
    and width unchanged. ``converged`` requires the trust-region solver to
    stop on a relative parameter change below 1e-6 within 200 iterations
    and a positive, significant peak inside the grid that is no narrower
    than the resolution bandwidth.
    """
    w = np.asarray(spec.freqs, dtype=float)
    y = np.asarray(spec.psd, dtype=float)
    scale_y = float(np.max(np.abs(y)))
    if not np.isfinite(scale_y) or scale_y == 0 or len(w) < 5:
        return LineFit(float(w[len(w) // 2]) if len(w) else 0.0, 0.0, 0.0, 0.0, float("inf"), False)
    if init is not None and init.fwhm > 0:
        c0, width0 = init.center, init.fwhm
        h0, b0 = init.height, init.baseline
    else:
        c0, width0, h0, b0 = _initial_guess(w, y)
    x = (w - c0) / width0
    yn = y / scale_y
    p0 = np.array([h0 / scale_y, 0.0, 1.0, b0 / scale_y])

    def model(p):
        return p[3] + p[0] / (1 + (2 * (x - p[1]) / p[2]) ** 2)

    def resid(p):
        return model(p) - yn

    def jac(p):
        u = 2 * (x - p[1]) / p[2]
        den = 1 + u * u
        J = np.empty((len(x), 4))
        J[:, 0] = 1 / den
        J[:, 1] = p[0] * 2 * u * (2 / p[2]) / den**2
        J[:, 2] = p[0] * 2 * u * u / p[2] / den**2
        J[:, 3] = 1.0
        return J

    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            res = optimize.least_squares(resid, p0, jac=jac, method="trf", xtol=FIT_XTOL,
                                         ftol=None, gtol=None, max_nfev=MAX_FIT_ITER)
        p = res.x
        ok = res.status == 3
    except (ValueError, np.linalg.LinAlgError, FloatingPointError):
        p, ok = p0, False
    height = p[0] * scale_y
    fwhm = abs(p[2]) * width0
    center = c0 + p[1] * width0
    baseline = p[3] * scale_y
    r = resid(p)
    rms = float(np.sqrt(np.mean(r**2)))
    residual_norm = rms / p[0] if p[0] > 0 else float("inf")
    ok = bool(ok and np.isfinite(p).all() and p[0] > 0 and p[2] > 0
              and w[0] <= center <= w[-1] and fwhm < (w[-1] - w[0])
              and fwhm >= spec.resolution_bandwidth
              and p[0] > 5 * rms)
    area = max(height * fwhm / 4, 0.0)
    return LineFit(float(center), float(fwhm), float(area), float(baseline),
                   float(residual_norm), ok)


def edge_floor(spec: SpectrumEstimate, fraction: float = 0.05) -> float:
    """Mean PSD over the outermost ``fraction`` of bins on each side."""
    k = max(int(len(spec.psd) * fraction), 1)
    p = np.asarray(spec.psd, dtype=float)
    return float(np.mean(np.concatenate([p[:k], p[-k:]])))


def occupancy_from_spectrum(spec: SpectrumEstimate, fit: Optional[LineFit] = None,
                            stderr: float = 0.0) -> float:
    """Baseline-subtracted integrated area minus the 1/2 zero-point share.

    The baseline is the smaller of the fit baseline (the median if the fit
    did not converge) and the mean level at the band edges, clipped at
    zero. Taking the edge level as a cap matters for non-Lorentzian lines,
    whose broad wings a single-Lorentzian fit books as baseline. A result
    below ``-3 * stderr`` is a calibration error and raises
    :class:`NormalizationFault`.
    """
    if fit is not None and fit.converged:
        base = fit.baseline
    else:
        base = float(np.median(spec.psd))
    base = max(min(base, edge_floor(spec)), 0.0)
    area = float(np.sum(np.asarray(spec.psd) - base) * spec.bin_width / TWO_PI)
    n = area - 0.5
    if n < -3 * stderr:
        raise NormalizationFault(f"occupancy {n:.4g} is below zero by more than 3 standard errors")
    return n


def effective_linewidths(fits: Sequence[LineFit], fwhms: Sequence[float]) -> list[tuple[float, str]]:
    """Pick one linewidth per spectrum of a sweep.

    Uses the fitted width unless the fit failed or its residual norm exceeds
    twice the median across the sweep, in which case the numeric FWHM is
    taken. A converged fit is still used when the numeric FWHM is
    unavailable (NaN). Returns ``(width, source)`` pairs with source
    ``"fit"`` or ``"fwhm"``.
    """
    norms = np.array([f.residual_norm for f in fits if f.converged and np.isfinite(f.residual_norm)])
    limit = 2 * float(np.median(norms)) if norms.size else -np.inf
    out = []
    for f, fw in zip(fits, fwhms):
        if f.converged and (f.residual_norm <= limit or not math.isfinite(fw)):
            out.append((f.fwhm, "fit"))
        else:
            out.append((float(fw), "fwhm"))
    return out
