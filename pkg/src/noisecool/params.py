"""Physical parameter types, unit conversions and validation.

All rates are held internally in angular units (rad/s). Files and the
command line use ordinary frequencies in Hz; conversion happens only in
:func:`load_params`, :func:`params_to_dict` and the CLI.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np
from scipy import constants

from .errors import InvalidArgument

TWO_PI = 2.0 * math.pi
SEED_MAX = 2**64 - 1

# resolved-sideband ratio below which the RWA model is not trusted
MIN_SIDEBAND_RATIO = 1.0
# dt * kappa upper bound for the integrator
MAX_DT_KAPPA = 0.1


@dataclass(frozen=True)
class SystemParams:
    """Cavity-oscillator rates (rad/s) and bath occupancies."""

    omega_m: float
    gamma: float
    kappa: float
    g0: float
    n_th: float
    kappa_ext_fraction: float = 1.0
    n_ba: float = 0.0
    probe_cooperativity: float = 0.0

    @property
    def kappa_ext(self) -> float:
        return self.kappa * self.kappa_ext_fraction

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class NoiseDrive:
    """Box-spectrum noise injected around the red sideband.

    ``flux`` is in photons/s, ``sigma`` and ``center_detuning`` in rad/s.
    ``center_detuning`` is measured from ``omega_c - omega_m``.
    """

    flux: float
    sigma: float
    center_detuning: float = 0.0
    seed: int = 0

    def replace(self, **changes) -> "NoiseDrive":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class CoherentDrive:
    """Single tone of ``flux`` photons/s, offset ``detuning`` from the red sideband."""

    flux: float
    detuning: float = 0.0
    seed: int = 0

    def replace(self, **changes) -> "CoherentDrive":
        return dataclasses.replace(self, **changes)


Drive = Union[NoiseDrive, CoherentDrive]


@dataclass(frozen=True)
class SimConfig:
    """Integration settings. Times in seconds.

    ``noise_repeat`` > 0 tiles a noise block of that duration instead of
    synthesizing the whole run at once (off by default).
    """

    dt: float
    t_total: float
    t_burn: float
    n_traj: int = 1
    sample_stride: int = 1
    noise_repeat: float = 0.0

    @property
    def n_steps(self) -> int:
        return int(round(self.t_total / self.dt))

    @property
    def n_burn(self) -> int:
        return int(round(self.t_burn / self.dt))

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


class Violation(NamedTuple):
    code: str
    message: str


def thermal_occupancy(temperature, omega_m):
    """Bose-Einstein occupancy of a mode at ``omega_m`` (rad/s), ``temperature`` (K)."""
    temperature = np.asarray(temperature, dtype=float)
    omega_m = np.asarray(omega_m, dtype=float)
    if np.any(temperature <= 0) or np.any(omega_m <= 0):
        raise InvalidArgument("temperature and omega_m must be positive")
    x = constants.hbar * omega_m / (constants.k * temperature)
    n = 1.0 / np.expm1(x)
    return float(n) if n.ndim == 0 else n


def renormalize_for_probe(params: SystemParams) -> SystemParams:
    """Fold the probe tone's sideband cooling into (gamma, n_th).

    gamma -> gamma (1 + C_d), n_th -> n_th / (1 + C_d); the heat load
    gamma * n_th is unchanged. The probe cooperativity of the result is 0,
    so applying this twice is harmless.
    """
    _raise_on(_param_violations(params))
    factor = 1.0 + params.probe_cooperativity
    return params.replace(
        gamma=params.gamma * factor,
        n_th=params.n_th / factor,
        probe_cooperativity=0.0,
    )


def _param_violations(p: SystemParams) -> list[Violation]:
    out = []
    for name in ("omega_m", "gamma", "kappa"):
        value = getattr(p, name)
        if not (np.isfinite(value) and value > 0):
            out.append(Violation(f"{name.upper()}_NONPOSITIVE", f"{name} must be > 0, got {value!r}"))
    if not (np.isfinite(p.g0) and p.g0 >= 0):
        out.append(Violation("G0_NEGATIVE", f"g0 must be >= 0, got {p.g0!r}"))
    if not (0 < p.kappa_ext_fraction <= 1):
        out.append(Violation("KAPPA_EXT_FRACTION_OUT_OF_RANGE",
                             f"kappa_ext_fraction must lie in (0, 1], got {p.kappa_ext_fraction!r}"))
    for name in ("n_th", "n_ba", "probe_cooperativity"):
        value = getattr(p, name)
        if not (np.isfinite(value) and value >= 0):
            out.append(Violation(f"{name.upper()}_NEGATIVE", f"{name} must be >= 0, got {value!r}"))
    if p.kappa > 0 and p.omega_m > 0 and not p.omega_m / p.kappa > MIN_SIDEBAND_RATIO:
        out.append(Violation("RESOLVED_SIDEBAND_VIOLATED",
                             f"omega_m/kappa = {p.omega_m / p.kappa:.3g} must exceed {MIN_SIDEBAND_RATIO}"))
    return out


def _drive_violations(drive: Drive, params: SystemParams | None) -> list[Violation]:
    out = []
    if not (np.isfinite(drive.flux) and drive.flux >= 0):
        out.append(Violation("FLUX_NEGATIVE", f"flux must be >= 0, got {drive.flux!r}"))
    if not (0 <= int(drive.seed) <= SEED_MAX):
        out.append(Violation("SEED_OUT_OF_RANGE", "seed must be an unsigned 64-bit integer"))
    if isinstance(drive, NoiseDrive):
        if not (np.isfinite(drive.sigma) and drive.sigma > 0):
            out.append(Violation("SIGMA_NONPOSITIVE", f"sigma must be > 0, got {drive.sigma!r}"))
        elif params is not None and abs(drive.center_detuning) + drive.sigma / 2 >= params.omega_m:
            out.append(Violation("BOX_LEAKS_BLUE_SIDEBAND",
                                 "|center_detuning| + sigma/2 must stay below omega_m"))
    return out


def _cfg_violations(cfg: SimConfig, params: SystemParams | None, drive: Drive | None) -> list[Violation]:
    out = []
    if not (np.isfinite(cfg.dt) and cfg.dt > 0):
        out.append(Violation("DT_NONPOSITIVE", f"dt must be > 0, got {cfg.dt!r}"))
        return out
    if not cfg.t_total > 0:
        out.append(Violation("T_TOTAL_NONPOSITIVE", "t_total must be > 0"))
    if not (0 <= cfg.t_burn < cfg.t_total):
        out.append(Violation("BURN_NOT_BEFORE_END", "need 0 <= t_burn < t_total"))
    if int(cfg.n_traj) < 1:
        out.append(Violation("N_TRAJ_INVALID", "n_traj must be >= 1"))
    if int(cfg.sample_stride) < 1:
        out.append(Violation("STRIDE_INVALID", "sample_stride must be >= 1"))
    if cfg.noise_repeat < 0:
        out.append(Violation("NOISE_REPEAT_NEGATIVE", "noise_repeat must be >= 0"))
    if params is not None and params.kappa > 0 and cfg.dt * params.kappa > MAX_DT_KAPPA * (1 + 1e-12):
        out.append(Violation("DT_STABILITY", f"dt*kappa = {cfg.dt * params.kappa:.3g} exceeds {MAX_DT_KAPPA}"))
    if isinstance(drive, NoiseDrive) and drive.sigma > 0:
        # the integrator runs in the frame of the box centre, so only sigma matters here
        if not cfg.dt < TWO_PI / (10 * drive.sigma):
            out.append(Violation("DT_UNDERSAMPLES_BAND", "dt must be < 2*pi/(10*sigma)"))
        span = cfg.noise_repeat if cfg.noise_repeat > 0 else cfg.t_total
        if span * drive.sigma / TWO_PI < 10:
            out.append(Violation("NOISE_TOO_SHORT",
                                 "noise block must hold >= 10 coherence cells (duration*sigma/2pi >= 10)"))
    return out


def validate(params: SystemParams | None = None, drive: Drive | None = None,
             cfg: SimConfig | None = None) -> list[Violation]:
    """Return every violated invariant; an empty list means valid. Never raises."""
    out = []
    if params is not None:
        out += _param_violations(params)
    if drive is not None:
        out += _drive_violations(drive, params)
    if cfg is not None:
        out += _cfg_violations(cfg, params, drive)
    return out


def _raise_on(violations):
    if violations:
        raise InvalidArgument("; ".join(f"{v.code}: {v.message}" for v in violations),
                              code=violations[0].code)


def require_valid(params=None, drive=None, cfg=None):
    """Raise :class:`InvalidArgument` listing every violation, if any."""
    _raise_on(validate(params, drive, cfg))


def derive_seed(master: int, index: int) -> int:
    """Independent 64-bit child seed for stream ``index`` of ``master``."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# --- JSON boundary (Hz, mK, photons/s) ----------------------------------

_RATE_KEYS = ("omega_m", "gamma", "kappa", "g0")


def params_from_dict(d: dict) -> SystemParams:
    d = dict(d)
    d.pop("comment", None)
    kw = {k: TWO_PI * float(d.pop(k)) for k in _RATE_KEYS}
    if "temperature_mK" in d:
        t = float(d.pop("temperature_mK")) * 1e-3
        if "n_th" in d:
            raise InvalidArgument("give either n_th or temperature_mK, not both")
        kw["n_th"] = thermal_occupancy(t, kw["omega_m"])
    else:
        kw["n_th"] = float(d.pop("n_th"))
    for key in ("kappa_ext_fraction", "n_ba", "probe_cooperativity"):
        if key in d:
            kw[key] = float(d.pop(key))
    if d:
        raise InvalidArgument(f"unknown parameter keys: {sorted(d)}")
    return SystemParams(**kw)


def params_to_dict(p: SystemParams) -> dict:
    d = dataclasses.asdict(p)
    for k in _RATE_KEYS:
        d[k] = d[k] / TWO_PI
    return d


def load_params(source: str | Path | None = None) -> SystemParams:
    """Load a parameter file. ``"paper"`` and ``"desk"`` name the bundled sets."""
    if source is None or str(source) in ("paper", "desk"):
        name = f"{source or 'paper'}_params.json"
        text = resources.files("noisecool.data").joinpath(name).read_text()
    else:
        text = Path(source).read_text()
    return params_from_dict(json.loads(text))


def cfg_from_dict(d: dict) -> SimConfig:
    d = {k: v for k, v in d.items() if k != "comment"}
    return SimConfig(
        dt=float(d["dt"]), t_total=float(d["t_total"]), t_burn=float(d.get("t_burn", 0.0)),
        n_traj=int(d.get("n_traj", 1)), sample_stride=int(d.get("sample_stride", 1)),
        noise_repeat=float(d.get("noise_repeat", 0.0)),
    )


def load_cfg(source: str | Path) -> SimConfig:
    """Load a simulation config. ``"desk"`` names the bundled one."""
    if str(source) == "desk":
        text = resources.files("noisecool.data").joinpath("desk_sim.json").read_text()
    else:
        text = Path(source).read_text()
    return cfg_from_dict(json.loads(text))


def paper_params() -> SystemParams:
    return load_params("paper")


def desk_params() -> SystemParams:
    return load_params("desk")
