"""Band-limited complex noise synthesis and spectral estimation.

The drive envelope is synthesized in one shot on the run-length frequency
grid: every bin inside the box gets an independent circular Gaussian
amplitude, every other bin is exactly zero. The waveform is therefore
periodic over its duration.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from scipy import signal

from .errors import InvalidArgument, NoisecoolError
from .params import TWO_PI, NoiseDrive

ENVELOPE_MAGIC = b"NCENV001"
_HEADER = struct.Struct("<8sddQ")  # magic, dt, flux, count -> 32 bytes

# equivalent noise bandwidth in bins
_ENBW = {"rectangular": 1.0, "hann": 1.5}
_SCIPY_WINDOW = {"rectangular": "boxcar", "hann": "hann"}


@dataclass
class ComplexEnvelope:
    """Uniformly sampled complex waveform, samples in sqrt(photons/s)."""

    samples: np.ndarray
    dt: float
    flux_nominal: float = 0.0
    seed: int = 0

    @property
    def duration(self) -> float:
        return len(self.samples) * self.dt

    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass
class SpectrumEstimate:
    """Averaged PSD on an angular-frequency grid (ascending, rad/s).

    ``psd`` is a density per Hz, so ``sum(psd) * dw / 2pi`` is the mean
    square of the signal.
    """

    freqs: np.ndarray
    psd: np.ndarray
    n_segments: int
    resolution_bandwidth: float

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def total_power(self) -> float:
        return float(np.sum(self.psd) * self.bin_width / TWO_PI)

    def scaled(self, c: float) -> "SpectrumEstimate":
        return SpectrumEstimate(self.freqs.copy(), self.psd * c, self.n_segments,
                                self.resolution_bandwidth)


class CorrelationTime(NamedTuple):
    tau: float
    flag: Optional[str]


def box_mask(freqs, center, sigma):
    return np.abs(freqs - center) <= sigma / 2


def synth_box_noise(drive: NoiseDrive, duration: float, dt: float) -> ComplexEnvelope:
    """Complex Gaussian noise with a box spectrum of width ``drive.sigma``.

    The in-band amplitudes have equal variance, scaled so that the expected
    mean power equals ``drive.flux``; the one-sided density is then
    ``2 pi flux / sigma`` up to the bin-count rounding of the band edges.
    Deterministic for a given ``drive.seed``.
    """
    sigma, c = drive.sigma, drive.center_detuning
    if not sigma > 0:
        raise InvalidArgument("sigma must be > 0", code="SIGMA_NONPOSITIVE")
    if drive.flux < 0:
        raise InvalidArgument("flux must be >= 0", code="FLUX_NEGATIVE")
    if not dt > 0 or not duration > 0:
        raise InvalidArgument("dt and duration must be > 0")
    if not dt < TWO_PI / (10 * (abs(c) + sigma)):
        raise InvalidArgument("dt must be < 2*pi/(10*(|center_detuning| + sigma))",
                              code="DT_UNDERSAMPLES_BAND")
    if duration * sigma / TWO_PI < 10:
        raise InvalidArgument("duration*sigma/2pi must be >= 10 (too few coherence cells)",
                              code="NOISE_TOO_SHORT")
    n = int(round(duration / dt))
    freqs = TWO_PI * np.fft.fftfreq(n, dt)
    inband = np.flatnonzero(box_mask(freqs, c, sigma))
    if inband.size == 0:
        raise InvalidArgument("band contains no frequency bins", code="NOISE_TOO_SHORT")
    rng = np.random.default_rng(int(drive.seed))
    spectrum = np.zeros(n, dtype=complex)
    if drive.flux > 0:
        amp = math.sqrt(drive.flux / inband.size / 2)
        z = rng.standard_normal((2, inband.size))
        spectrum[inband] = amp * (z[0] + 1j * z[1])
    samples = np.fft.ifft(spectrum) * n
    return ComplexEnvelope(samples, dt, float(drive.flux), int(drive.seed))


def welch_density(x, dt, segment_length, overlap_fraction=0.5, window="hann"):
    """Two-sided Welch density of a complex series (or a batch along axis -1).

    Returns ascending angular frequencies, density per Hz and the number of
    segments per series.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    if window not in _SCIPY_WINDOW:
        raise InvalidArgument(f"window must be one of {sorted(_SCIPY_WINDOW)}")
    if not (2 <= segment_length <= n):
        raise InvalidArgument(f"segment_length must lie in [2, {n}], got {segment_length}")
    if not (0 <= overlap_fraction < 1):
        raise InvalidArgument("overlap_fraction must lie in [0, 1)")
    noverlap = int(round(overlap_fraction * segment_length))
    if noverlap >= segment_length:
        raise InvalidArgument("overlap leaves no step between segments")
    f, p = signal.welch(x, fs=1.0 / dt, window=_SCIPY_WINDOW[window], nperseg=segment_length,
                        noverlap=noverlap, detrend=False, return_onesided=False,
                        scaling="density", axis=-1)
    step = segment_length - noverlap
    n_seg = (n - noverlap) // step
    return TWO_PI * np.fft.fftshift(f), np.fft.fftshift(p, axes=-1), n_seg


def psd_welch(env: ComplexEnvelope, segment_length: int, overlap_fraction: float = 0.5,
              window: str = "hann") -> SpectrumEstimate:
    """Averaged-periodogram PSD of an envelope over its full frequency axis."""
    w, p, n_seg = welch_density(env.samples, env.dt, segment_length, overlap_fraction, window)
    rbw = _ENBW[window] * TWO_PI / (segment_length * env.dt)
    return SpectrumEstimate(w, p, n_seg, rbw)


def autocorrelation_time(env: ComplexEnvelope) -> CorrelationTime:
    """Lag at which ``|<xi*(t) xi(t+tau)>|`` first falls to 1/e of its zero-lag value.

    The envelope is treated as periodic, which is exact for synthesized
    noise. A waveform whose correlation never decays (e.g. a tone) returns
    its duration with the flag ``NON_DECAYING``.
    """
    x = np.asarray(env.samples)
    n = x.size
    spec = np.fft.fft(x)
    acf = np.abs(np.fft.ifft(np.abs(spec) ** 2))[: n // 2 + 1]
    if acf[0] == 0:
        return CorrelationTime(env.duration, "NON_DECAYING")
    acf = acf / acf[0]
    below = np.flatnonzero(acf < math.exp(-1))
    if below.size == 0:
        return CorrelationTime(env.duration, "NON_DECAYING")
    k = below[0]
    a0, a1 = acf[k - 1], acf[k]
    frac = (a0 - math.exp(-1)) / (a0 - a1)
    return CorrelationTime((k - 1 + frac) * env.dt, None)


# --- file formats -------------------------------------------------------

def write_envelope(env: ComplexEnvelope, path) -> None:
    """Write the 32-byte header then little-endian interleaved float64 (re, im)."""
    data = np.empty(2 * len(env.samples), dtype="<f8")
    data[0::2] = env.samples.real
    data[1::2] = env.samples.imag
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(ENVELOPE_MAGIC, env.dt, env.flux_nominal, len(env.samples)))
            fh.write(data.tobytes())
    except OSError as exc:
        raise NoisecoolError(f"cannot write envelope to {path}: {exc}", code="IO_ERROR") from exc


def read_envelope(path) -> ComplexEnvelope:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidArgument(f"{path}: file shorter than header", code="BAD_ENVELOPE")
    magic, dt, flux, count = _HEADER.unpack_from(raw)
    if magic != ENVELOPE_MAGIC:
        raise InvalidArgument(f"{path}: bad magic {magic!r}", code="BAD_ENVELOPE")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != 2 * count:
        raise InvalidArgument(f"{path}: expected {count} samples, found {data.size // 2}",
                              code="BAD_ENVELOPE")
    return ComplexEnvelope(data[0::2] + 1j * data[1::2], dt, flux)


def write_spectrum_csv(spec: SpectrumEstimate, path_or_file) -> None:
    """CSV with columns ``freq_hz, psd_per_hz``."""
    own = isinstance(path_or_file, (str, Path))
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "psd_per_hz"])
        for f, p in zip(spec.freqs / TWO_PI, spec.psd):
            w.writerow([repr(float(f)), repr(float(p))])
    finally:
        if own:
            fh.close()


def read_spectrum_csv(path) -> SpectrumEstimate:
    """Inverse of :func:`write_spectrum_csv`; also accepts a ``psd`` column name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3:
        raise InvalidArgument(f"{path}: need a header and at least two rows")
    f = np.array([float(r[0]) for r in rows[1:]])
    p = np.array([float(r[1]) for r in rows[1:]])
    order = np.argsort(f)
    f, p = f[order], p[order]
    w = TWO_PI * f
    return SpectrumEstimate(w, p, 1, float(w[1] - w[0]))


class BoxQuality(NamedTuple):
    flatness: float
    rejection_db: float
    flux_ratio: float
    excess_kurtosis: float
    n_subbands: int
    guard_bins: int


def box_quality(envelopes, drive: NoiseDrive, segment_length: int = 1024,
                n_subbands: int = 8, guard_bins: int = 8) -> BoxQuality:
    """Quality figures of synthesized box noise, pooled over one or more envelopes.

    ``flatness`` is the largest relative deviation from the ideal level
    ``2 pi flux / sigma`` among ``n_subbands`` equal slices of the band
    interior, each averaged over its bins. ``rejection_db`` compares the
    ideal level with the largest out-of-band value, skipping ``guard_bins``
    bins beyond each band edge where window leakage dominates.
    ``excess_kurtosis`` is the larger of the real and imaginary
    quadratures' excess kurtosis.
    """
    from scipy import stats

    if isinstance(envelopes, ComplexEnvelope):
        envelopes = [envelopes]
    specs = [psd_welch(e, segment_length, 0.5, "hann") for e in envelopes]
    w = specs[0].freqs
    psd = np.mean([s.psd for s in specs], axis=0)
    level = TWO_PI * drive.flux / drive.sigma
    dw = specs[0].bin_width
    off = np.abs(w - drive.center_detuning)
    interior = off <= drive.sigma / 2 - guard_bins * dw
    idx = np.flatnonzero(interior)
    if idx.size < n_subbands:
        raise InvalidArgument("band too narrow for the requested sub-bands and guard")
    means = [np.mean(psd[chunk]) for chunk in np.array_split(idx, n_subbands)]
    flat = float(np.max(np.abs(np.array(means) / level - 1)))
    outside = off > drive.sigma / 2 + guard_bins * dw
    worst = float(np.max(psd[outside])) if outside.any() else 0.0
    rej = float("inf") if worst <= 0 else float(10 * np.log10(level / worst))
    ratio = float(np.mean([e.mean_power() for e in envelopes]) / drive.flux)
    x = np.concatenate([e.samples for e in envelopes])
    kurt = max(abs(stats.kurtosis(x.real)), abs(stats.kurtosis(x.imag)))
    return BoxQuality(flat, rej, ratio, float(kurt), n_subbands, guard_bins)
