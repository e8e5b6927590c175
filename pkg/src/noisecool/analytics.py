"""Closed-form cooling predictions.

Covers the noise-induced damping for a box spectrum, the general damping
from a photon-number spectrum, the steady-state phonon number, the
coherent sideband-cooling reference and the adiabatic (slow-noise) limit.
All rates are angular (rad/s).
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import InvalidArgument
from .params import CoherentDrive, NoiseDrive, SystemParams, renormalize_for_probe

EULER_GAMMA = float(np.euler_gamma)

# regime boundaries on sigma / gamma_opt
ADIABATIC_BELOW = 0.1
QUANTUM_NOISE_ABOVE = 10.0

PsdFunction = Callable[[float], float]


class Regime(str, enum.Enum):
    QUANTUM_NOISE = "QUANTUM_NOISE"
    CROSSOVER = "CROSSOVER"
    ADIABATIC = "ADIABATIC"


@dataclass(frozen=True)
class Prediction:
    """Predicted steady state for one drive.

    ``n_m``/``gamma_eff`` follow the regime: the quantum-noise formulas in
    QUANTUM_NOISE and CROSSOVER, the exponential-mixture oracles in
    ADIABATIC. Both bracketing estimates are always filled in.
    """

    n_bar0: float
    gamma_opt: float
    gamma_eff: float
    n_m: float
    regime: Regime
    n_m_qn: float
    n_m_adiabatic: float
    gamma_eff_qn: float
    gamma_eff_adiabatic: float
    crossover: bool

    def to_dict(self):
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


class AdiabaticOccupancy(NamedTuple):
    exact: float
    asymptote: float
    flag: Optional[str]


class AdiabaticLinewidth(NamedTuple):
    fwhm_numeric: float
    asymptote: float
    flag: Optional[str]


def intracavity_photons(F0, params: SystemParams):
    """Time-averaged intracavity photon number for a drive at the red sideband.

    Uses the full cavity filter ``kappa_ext / (omega_m**2 + kappa**2/4)``;
    ``kappa * F0 / omega_m**2`` is its resolved-sideband limit.
    """
    return np.asarray(F0) * params.kappa_ext / (params.omega_m**2 + params.kappa**2 / 4)


def flux_for_photons(n_bar0, params: SystemParams):
    """Inverse of :func:`intracavity_photons`."""
    return np.asarray(n_bar0) * (params.omega_m**2 + params.kappa**2 / 4) / params.kappa_ext


def arctan_factor(sigma, kappa):
    """Bandwidth suppression ``(kappa/sigma) * arctan(sigma/kappa)``, in (0, 1]."""
    x = np.asarray(sigma, dtype=float) / kappa
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x < 1e-4, 1.0 - x**2 / 3, np.arctan(x) / np.where(x == 0, 1.0, x))
    return float(out) if out.ndim == 0 else out


def gamma_opt_box(F0, sigma, params: SystemParams):
    """Optical damping from box noise of width ``sigma`` centred on the red sideband."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise InvalidArgument("sigma must be > 0", code="SIGMA_NONPOSITIVE")
    narrow = 4 * params.g0**2 * np.asarray(F0) * params.kappa_ext_fraction / params.omega_m**2
    out = narrow * arctan_factor(sigma, params.kappa)
    return float(out) if np.ndim(out) == 0 else out


def flux_for_gamma_opt(gamma_opt, sigma, params: SystemParams):
    """Flux that makes :func:`gamma_opt_box` equal ``gamma_opt``."""
    unit = gamma_opt_box(1.0, sigma, params)
    return np.asarray(gamma_opt) / unit


def gamma_opt_from_psd(psd: PsdFunction, params: SystemParams) -> float:
    """Damping from the asymmetry of a photon-number spectrum.

    ``psd`` takes angular frequency relative to the cavity and returns the
    photon-number fluctuation density; the result ``g0**2 (S(wm) - S(-wm))``
    is negative when the spectrum heats.
    """
    return params.g0**2 * (float(psd(params.omega_m)) - float(psd(-params.omega_m)))


def coherent_photon_psd(n_bar, detuning, kappa) -> PsdFunction:
    """Photon-number spectrum of a coherent tone ``detuning`` below the cavity."""

    def psd(omega):
        return n_bar * kappa / ((omega - detuning) ** 2 + kappa**2 / 4)

    return psd


def box_photon_psd(F0, sigma, params: SystemParams, center_detuning=0.0,
                   drive_filter="exact", epsrel=1e-10) -> PsdFunction:
    """Photon-number spectrum of cavity-filtered box noise.

    Each drive component at ``omega_c - omega_m + center_detuning + nu``
    contributes a coherent-tone spectrum weighted by its intracavity
    photon density. ``drive_filter="exact"`` keeps the cavity Lorentzian
    for that weight; ``"flat"`` replaces it by ``kappa_ext/omega_m**2``, the
    approximation under which the arctan closed form holds. ``epsrel``
    controls the adaptive quadrature.
    """
    if sigma <= 0:
        raise InvalidArgument("sigma must be > 0", code="SIGMA_NONPOSITIVE")
    if drive_filter not in ("exact", "flat"):
        raise InvalidArgument(f"unknown drive_filter {drive_filter!r}")
    kappa, wm, c = params.kappa, params.omega_m, center_detuning
    density = F0 / sigma

    def weight(nu):
        if drive_filter == "flat":
            return params.kappa_ext / wm**2
        return params.kappa_ext / ((wm - c - nu) ** 2 + kappa**2 / 4)

    def psd(omega):
        # resonance of the scattered line sits at nu = omega - wm + c
        nu_peak = omega - wm + c

        def f(nu):
            return density * weight(nu) * kappa / ((nu - nu_peak) ** 2 + kappa**2 / 4)

        lo, hi = -sigma / 2, sigma / 2
        pts = [p for p in (nu_peak, nu_peak - kappa, nu_peak + kappa) if lo < p < hi]
        val, _ = integrate.quad(f, lo, hi, points=pts or None, epsrel=epsrel,
                                epsabs=0.0, limit=400)
        return val

    return psd


def phonon_number(gamma_opt, params: SystemParams):
    """Steady occupancy ``(gamma n_th + gamma_opt n_ba) / (gamma + gamma_opt)``."""
    g = np.asarray(gamma_opt, dtype=float)
    if np.any(g < 0):
        raise InvalidArgument("gamma_opt must be >= 0")
    out = (params.gamma * params.n_th + g * params.n_ba) / (params.gamma + g)
    return float(out) if out.ndim == 0 else out


def _mixture_quad(f, scale):
    """Integrate ``f(x) e^{-x}`` over x >= 0 when f varies on the scale ``scale``."""
    edges = [0.0]
    s = scale
    while s < 50:
        edges.append(s)
        s *= 10
    edges.append(50.0)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate.quad(lambda x: math.exp(-x) * f(x), a, b, epsabs=0.0,
                                epsrel=1e-12, limit=200)[0]
    total += integrate.quad(lambda x: math.exp(-x) * f(x), 50.0, np.inf)[0]
    return total


def adiabatic_occupancy(gamma_opt: float, params: SystemParams) -> AdiabaticOccupancy:
    """Time-averaged occupancy when the damping follows the noise envelope.

    The instantaneous damping ``gamma_opt * x`` is exponentially distributed
    (x ~ Exp(1)), so the exact value is the average of the steady-state
    occupancy over that distribution. The asymptote is the large
    ``gamma_opt/gamma`` form with Euler's constant; it is flagged
    ``INVALID_REGIME`` when ``gamma_opt <= gamma``.
    """
    if not gamma_opt > 0:
        raise InvalidArgument("gamma_opt must be > 0")
    g, nth, nba = params.gamma, params.n_th, params.n_ba
    cold = _mixture_quad(lambda x: g / (g + gamma_opt * x), g / gamma_opt)
    exact = nth * cold + nba * (1.0 - cold)
    cold_asym = (g / gamma_opt) * (math.log(gamma_opt / g) - EULER_GAMMA)
    asym = nth * cold_asym + nba * (1.0 - cold_asym)
    flag = None if gamma_opt > g else "INVALID_REGIME"
    return AdiabaticOccupancy(exact, asym, flag)


def mixture_spectrum(omega, gamma_opt: float, params: SystemParams, vacuum: float = 0.0):
    """Time-averaged mechanical spectrum in the adiabatic limit.

    Each damping level ``G = gamma + gamma_opt x`` contributes a Lorentzian of
    FWHM ``G`` and area ``n(x) + vacuum`` (per d(omega)/2pi), weighted by e^{-x}.
    """
    g = params.gamma

    def one(w):
        def f(x):
            G = g + gamma_opt * x
            n = (g * params.n_th + gamma_opt * x * params.n_ba) / G + vacuum
            return n * G / (w * w + G * G / 4)

        return _mixture_quad(f, g / max(gamma_opt, 1e-300))

    w = np.asarray(omega, dtype=float)
    out = np.vectorize(one)(np.abs(w))
    return float(out) if out.ndim == 0 else out


def adiabatic_linewidth(gamma_opt: float, params: SystemParams, vacuum: float = 0.0) -> AdiabaticLinewidth:
    """FWHM of the adiabatic mixture spectrum, plus the ``gamma ln(gamma_opt/gamma)`` asymptote.

    ``vacuum=0.5`` includes the symmetrized zero-point part, matching what
    a c-number simulation of ``b`` records.
    """
    if not gamma_opt > 0:
        raise InvalidArgument("gamma_opt must be > 0")
    g = params.gamma
    peak = mixture_spectrum(0.0, gamma_opt, params, vacuum)
    hi = g
    while mixture_spectrum(hi, gamma_opt, params, vacuum) > peak / 2:
        hi *= 2
    half = optimize.brentq(lambda w: mixture_spectrum(w, gamma_opt, params, vacuum) - peak / 2,
                           0.0, hi, xtol=1e-12 * hi, rtol=1e-12)
    flag = None if gamma_opt > g else "INVALID_REGIME"
    return AdiabaticLinewidth(2 * half, g * math.log(gamma_opt / g), flag)


def coherent_cooling(G: float, params: SystemParams) -> tuple[float, float]:
    """Sideband cooling by a coherent tone with linearized coupling ``G``."""
    if G < 0:
        raise InvalidArgument("G must be >= 0")
    Gamma = 4 * G**2 / params.kappa
    return Gamma, phonon_number(Gamma, params)


def classify(sigma: float, gamma_opt: float) -> Regime:
    if gamma_opt > 0 and sigma < ADIABATIC_BELOW * gamma_opt:
        return Regime.ADIABATIC
    if gamma_opt <= 0 or sigma > QUANTUM_NOISE_ABOVE * gamma_opt:
        return Regime.QUANTUM_NOISE
    return Regime.CROSSOVER


def predict(params: SystemParams, drive) -> Prediction:
    """Predict damping and occupancy for a noise or coherent drive.

    The probe renormalization is applied first (it is idempotent).
    """
    p = renormalize_for_probe(params)
    n_bar0 = float(intracavity_photons(drive.flux, p))
    if isinstance(drive, CoherentDrive):
        gopt, n_m = coherent_cooling(p.g0 * math.sqrt(n_bar0), p)
        return Prediction(n_bar0, gopt, p.gamma + gopt, n_m, Regime.QUANTUM_NOISE,
                          n_m, n_m, p.gamma + gopt, p.gamma + gopt, False)
    if not isinstance(drive, NoiseDrive):
        raise InvalidArgument(f"unsupported drive {drive!r}")
    gopt = gamma_opt_box(drive.flux, drive.sigma, p)
    n_qn = phonon_number(gopt, p)
    geff_qn = p.gamma + gopt
    if gopt > 0:
        n_ad = adiabatic_occupancy(gopt, p).exact
        geff_ad = adiabatic_linewidth(gopt, p).fwhm_numeric
    else:
        n_ad, geff_ad = p.n_th, p.gamma
    regime = classify(drive.sigma, gopt)
    if regime is Regime.ADIABATIC:
        n_m, geff = n_ad, geff_ad
    else:
        n_m, geff = n_qn, geff_qn
    return Prediction(n_bar0, gopt, geff, n_m, regime, n_qn, n_ad, geff_qn, geff_ad,
                      regime is Regime.CROSSOVER)
