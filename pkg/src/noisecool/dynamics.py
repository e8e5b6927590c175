"""Stochastic integration of the noise-driven, linearized optomechanical equations.

The model lives in the frame of the drive band centre (``omega_c - omega_m``
plus any centre offset) for the classical envelope ``alpha`` and in the
cavity/mechanical rotating frames for the fluctuations ``d`` and ``b``.
Only the beam-splitter (red-sideband) coupling is kept::

    d alpha/dt = -(i Delta + kappa/2) alpha + sqrt(kappa_ext) xi(t)
    d d/dt     = -(kappa/2) d - i g0 alpha b + sqrt(kappa) eta_c
    d b/dt     = -(gamma/2) b - i g0 conj(alpha) d + sqrt(gamma) eta_m

with Delta = omega_m - center_detuning. ``d`` and ``b`` are symmetrized
c-numbers: vacuum has <|d|^2> = 1/2 and the occupancy is <|b|^2> - 1/2.
"""
from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
import scipy.fft

from . import _kernels
from .analytics import arctan_factor
from .errors import Diverged, InvalidArgument
from .noisegen import synth_box_noise
from .params import (CoherentDrive, NoiseDrive, SimConfig, SystemParams, derive_seed,
                     renormalize_for_probe, require_valid)


class StateVector(NamedTuple):
    alpha: complex
    d: complex
    b: complex


@dataclass
class Trajectory:
    """Strided samples of one run.

    ``occupancy`` and ``mean_photons`` average every post-burn-in step;
    ``occupancy_series`` holds ``|b|^2 - 1/2`` at the sample times only.
    """

    times: np.ndarray
    alpha: np.ndarray
    d: np.ndarray
    b: np.ndarray
    burn_index: int
    occupancy: float
    mean_photons: float
    seed: int
    sample_dt: float

    @property
    def occupancy_series(self) -> np.ndarray:
        return np.abs(self.b) ** 2 - 0.5

    @property
    def states(self) -> list[StateVector]:
        return [StateVector(*s) for s in zip(self.alpha, self.d, self.b)]

    def post_burn(self) -> slice:
        return slice(self.burn_index, None)


@dataclass
class EnsembleResult:
    n_m_mean: float
    n_m_stderr: float
    gamma_opt_empirical: float
    mean_photons: float
    n_traj: int
    occupancies: np.ndarray
    photons: np.ndarray
    trajectories: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "n_m_mean": self.n_m_mean,
            "n_m_stderr": self.n_m_stderr,
            "gamma_opt_empirical": self.gamma_opt_empirical,
            "mean_photons": self.mean_photons,
            "n_traj": self.n_traj,
        }


def _coefficients(params: SystemParams, dt: float, detuning: float) -> np.ndarray:
    lam_a = 1j * detuning + params.kappa / 2
    w0, w1 = _kernels.hold_weights(lam_a, dt)
    w0h, w1h = _kernels.hold_weights(lam_a, dt / 2)
    root_ext = math.sqrt(params.kappa_ext)
    e_c = math.exp(-params.kappa * dt / 2)
    e_m = math.exp(-params.gamma * dt / 2)
    return np.array([
        np.exp(-lam_a * dt),
        root_ext * w0,
        root_ext * w1,
        e_c,
        _kernels.phi1(params.kappa / 2, dt),
        e_m,
        _kernels.phi1(params.gamma / 2, dt),
        params.g0,
        # exact Ornstein-Uhlenbeck increments for the vacuum and thermal baths
        math.sqrt(0.5 * (1 - e_c**2)),
        math.sqrt((params.n_th + 0.5) * (1 - e_m**2)),
        np.exp(-lam_a * dt / 2),
        root_ext * w0h,
        root_ext * w1h,
    ], dtype=complex)


def step_exponential_euler(state: StateVector, params: SystemParams, dt: float,
                           xi=(0j, 0j), eta_c=0j, eta_m=0j, detuning=None) -> StateVector:
    """Advance one step; exposed for testing the compiled stepper.

    Linear decay and rotation are exact exponentials; the drive is treated
    as linear across the step (``xi = (xi_start, xi_end)``); the
    optomechanical coupling enters at first order, ``d`` seeing alpha at
    mid-step and ``b`` seeing the freshly updated ``alpha`` and ``d``. ``eta_c``/``eta_m`` are unit complex normals.
    """
    det = params.omega_m if detuning is None else detuning
    c = _coefficients(params, dt, det)
    return StateVector(*_kernels.step(complex(state.alpha), complex(state.d), complex(state.b),
                                      complex(xi[0]), complex(xi[1]), complex(eta_c),
                                      complex(eta_m), c))


def drive_waveform(drive, cfg: SimConfig, seed: int) -> np.ndarray:
    """Drive samples xi_0 .. xi_N on the integration grid (N = cfg.n_steps)."""
    n = cfg.n_steps
    if isinstance(drive, CoherentDrive):
        t = np.arange(n + 1) * cfg.dt
        return math.sqrt(drive.flux) * np.exp(-1j * drive.detuning * t)
    if not isinstance(drive, NoiseDrive):
        raise InvalidArgument(f"unsupported drive {drive!r}")
    centred = drive.replace(center_detuning=0.0, seed=seed)
    if cfg.noise_repeat > 0:
        block = synth_box_noise(centred, cfg.noise_repeat, cfg.dt).samples
        reps = (n + 1) // block.size + 1
        return np.tile(block, reps)[: n + 1]
    # synthesize on a slightly longer, FFT-friendly grid and keep the first n+1 samples
    m = scipy.fft.next_fast_len(n + 1)
    return synth_box_noise(centred, m * cfg.dt, cfg.dt).samples[: n + 1]


def _drive_detuning(params, drive):
    if isinstance(drive, NoiseDrive):
        return params.omega_m - drive.center_detuning
    return params.omega_m


def run_trajectory(params: SystemParams, drive, cfg: SimConfig, seed: int) -> Trajectory:
    """Integrate one trajectory.

    The drive waveform and the bath noise use independent seeds derived
    from ``seed``. ``b`` starts in a thermal state at ``n_th`` and ``d`` in
    vacuum; ``alpha`` starts at zero and its transient lies inside the
    burn-in. The probe renormalization is applied here (it is idempotent).
    """
    require_valid(params, drive, cfg)
    p = renormalize_for_probe(params)
    seed = int(seed)
    xi = drive_waveform(drive, cfg, derive_seed(seed, 0))
    bath = np.uint64(derive_seed(seed, 1))
    key_c = np.uint64(_kernels.channel_key(bath, _kernels.CH_CAVITY))
    key_m = np.uint64(_kernels.channel_key(bath, _kernels.CH_MECH))
    key_0 = np.uint64(_kernels.channel_key(bath, _kernels.CH_INIT))
    d0 = math.sqrt(0.5) * _kernels.complex_normal(key_0, 0)
    b0 = math.sqrt(p.n_th + 0.5) * _kernels.complex_normal(key_0, 1)
    coef = _coefficients(p, cfg.dt, _drive_detuning(p, drive))

    n_steps, n_burn, stride = cfg.n_steps, cfg.n_burn, int(cfg.sample_stride)
    n_samples = n_steps // stride + 1
    out = [np.empty(n_samples, dtype=complex) for _ in range(3)]
    bad, sb, sa = _kernels.integrate(xi, coef, key_c, key_m, 0j, d0, b0, n_steps, n_burn,
                                     stride, *out)
    if bad >= 0:
        raise Diverged(f"state diverged at step {bad}", step=int(bad))
    count = n_steps - n_burn + 1
    times = np.arange(n_samples) * stride * cfg.dt
    burn_index = -(-n_burn // stride)
    return Trajectory(times, out[0], out[1], out[2], burn_index, sb / count - 0.5, sa / count,
                      seed, stride * cfg.dt)


def _run_one(args):
    return run_trajectory(*args)


def run_ensemble(params: SystemParams, drive, cfg: SimConfig, seed: Optional[int] = None,
                 seeds: Optional[Sequence[int]] = None, keep_trajectories: bool = True,
                 workers: int = 1) -> EnsembleResult:
    """Run ``cfg.n_traj`` independent trajectories and pool their occupancies.

    Trajectory ``i`` uses seed ``derive_seed(master, i)`` where the master is
    ``seed`` or, if omitted, ``drive.seed``; ``seeds`` overrides the list
    outright. Results do not depend on ``workers``.
    """
    if seeds is None:
        master = drive.seed if seed is None else seed
        seeds = [derive_seed(master, i) for i in range(cfg.n_traj)]
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise InvalidArgument("an ensemble needs at least 2 trajectories", code="N_TRAJ_INVALID")
    require_valid(params, drive, cfg)
    jobs = [(params, drive, cfg, s) for s in seeds]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            trajs = list(pool.map(_run_one, jobs))
    else:
        trajs = [_run_one(j) for j in jobs]
    occ = np.array([t.occupancy for t in trajs])
    photons = np.array([t.mean_photons for t in trajs])
    p = renormalize_for_probe(params)
    mean_photons = float(np.mean(photons))
    g_emp = 4 * p.g0**2 * mean_photons / p.kappa
    if isinstance(drive, NoiseDrive):
        g_emp *= arctan_factor(drive.sigma, p.kappa)
    return EnsembleResult(
        n_m_mean=float(np.mean(occ)),
        n_m_stderr=float(np.std(occ, ddof=1) / math.sqrt(len(occ))),
        gamma_opt_empirical=float(g_emp),
        mean_photons=mean_photons,
        n_traj=len(trajs),
        occupancies=occ,
        photons=photons,
        trajectories=trajs if keep_trajectories else [],
    )
