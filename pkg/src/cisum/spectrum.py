"""Frequency-domain primitives: windows, periodogram, noise floor, zoom.

The periodogram is calibrated so that circular white noise of total
variance sigma2 has expected bin power sigma2 for every window and
zero-padding factor (power = |DFT(w*x)|^2 / sum(w^2)).  The noise-floor
estimator relies on that absolute calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .signals import SampledSignal, wrap_phase

LN2 = math.log(2.0)

BH4_COEFFS = (0.35875, 0.48829, 0.14128, 0.01168)

_ZPF_CHOICES = (1, 2, 4, 8)


def blackman_harris_4(n: int) -> np.ndarray:
    """Symmetric 4-term Blackman-Harris window of length n (n >= 4)."""
    if n < 4:
        raise ValueError(f"window length must be >= 4, got {n}")
    a0, a1, a2, a3 = BH4_COEFFS
    m = np.arange(n)
    arg = 2.0 * math.pi * m / (n - 1)
    return (a0 - a1 * np.cos(arg) + a2 * np.cos(2 * arg)
            - a3 * np.cos(3 * arg))


def window_sequence(name: str, n: int) -> np.ndarray:
    if name == "rectangular":
        return np.ones(n)
    if name == "blackman_harris_4":
        return blackman_harris_4(n)
    raise ValueError(f"unknown window {name!r}")


@dataclass(frozen=True)
class WindowGains:
    """Coherent gain sum(w)/N and incoherent gain sum(w^2)/N."""

    coherent: float
    incoherent: float


def window_gains(w: np.ndarray) -> WindowGains:
    n = w.size
    return WindowGains(float(np.sum(w)) / n, float(np.sum(w * w)) / n)


@dataclass(frozen=True)
class Periodogram:
    """Noise-calibrated power spectrum on an ascending frequency grid."""

    power: np.ndarray
    bin_omega: np.ndarray
    window_gain: WindowGains
    window: str
    n: int
    zero_pad_factor: int
    ts: float

    @property
    def bins(self) -> int:
        return self.power.size


@dataclass(frozen=True)
class SpectralPeak:
    """One refined spectral line: frequency (rad/s), amplitude, phase."""

    omega_hat: float
    amp_hat: float
    phase_hat: float
    bin_index: int


def periodogram(signal: SampledSignal, window: str = "rectangular",
                zero_pad_factor: int = 1) -> Periodogram:
    """Windowed periodogram with expected noise bin power = sigma2.

    The grid is the full two-sided spectrum in ascending rad/s order,
    M = N * zero_pad_factor bins.
    """
    if zero_pad_factor not in _ZPF_CHOICES:
        raise ValueError(f"zero_pad_factor must be one of {_ZPF_CHOICES}")
    x = signal.samples
    n = x.size
    w = window_sequence(window, n)
    gains = window_gains(w)
    m = n * zero_pad_factor
    spec = np.fft.fft(w * x, m)
    power = np.abs(spec) ** 2 / (n * gains.incoherent)
    omega = 2.0 * math.pi * np.fft.fftfreq(m, d=signal.ts)
    order = np.fft.fftshift(np.arange(m))
    return Periodogram(power[order], omega[order], gains, window, n,
                       zero_pad_factor, signal.ts)


def write_periodogram_csv(pgram: Periodogram, path) -> None:
    lines = ["bin_omega,power"]
    for w, p in zip(pgram.bin_omega, pgram.power):
        lines.append(f"{float(w)!r},{float(p)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def noise_floor_estimate(pgram: Periodogram,
                         exclusion: tuple[float, float] | None = None,
                         include: str = "negative_half") -> float:
    """Median-of-tail noise variance estimate.

    The median of the included bins is divided by ln 2 (the median of an
    exponential distribution).  Included bins are, in order of precedence:
    everything outside the `exclusion` band (rad/s); the negative-frequency
    half-spectrum (signal-free in the benchmark scenarios, the default); or
    the lowest-power half of all bins (include="lowest_half", a fallback
    for signals that occupy both halves -- biased low when the signal fills
    more than half the band).
    """
    power = pgram.power
    if exclusion is not None:
        lo, hi = exclusion
        mask = (pgram.bin_omega < lo) | (pgram.bin_omega > hi)
        included = power[mask]
    elif include == "negative_half":
        included = power[pgram.bin_omega < 0]
    elif include == "lowest_half":
        included = np.sort(power)[:power.size // 2]
    else:
        raise ValueError(f"unknown include mode {include!r}")
    if included.size < 16:
        raise ValueError(
            f"need at least 16 bins outside the exclusion, got {included.size}")
    return float(np.median(included)) / LN2


def find_peak_bins(pgram: Periodogram, threshold: float,
                   max_peaks: int | None = None,
                   min_spacing_bins: int | None = None) -> list[int]:
    """Local maxima above a power threshold, strongest first.

    Maxima closer than min_spacing_bins to an already-accepted stronger
    maximum are suppressed (default: half the 4-term Blackman-Harris
    mainlobe, scaled by the zero-padding factor).
    """
    if min_spacing_bins is None:
        min_spacing_bins = 4 * pgram.zero_pad_factor
    p = pgram.power
    interior = (p[1:-1] > p[:-2]) & (p[1:-1] >= p[2:]) & (p[1:-1] >= threshold)
    candidates = np.nonzero(interior)[0] + 1
    order = candidates[np.argsort(p[candidates])[::-1]]
    accepted: list[int] = []
    for b in order:
        if max_peaks is not None and len(accepted) >= max_peaks:
            break
        if all(abs(b - a) >= min_spacing_bins for a in accepted):
            accepted.append(int(b))
    return accepted


def zoom_refine_peak(signal: SampledSignal, coarse_bin: int,
                     window: str = "blackman_harris_4",
                     zero_pad_factor: int = 1,
                     grid_points: int = 64,
                     pgram: Periodogram | None = None) -> SpectralPeak:
    """Refine one coarse spectral peak with a zoomed exact-length transform.

    A grid of `grid_points` transform evaluations spans +-1 coarse bin
    around the input bin; the grid argmax is polished by one parabolic
    interpolation on log power.  Amplitude and phase are read from the
    transform re-evaluated at the refined frequency, so no window-rolloff
    correction is needed (the window's coherent gain is divided out, and at
    the refined frequency the symmetric window contributes no phase).
    """
    if pgram is None:
        pgram = periodogram(signal, window, zero_pad_factor)
    p = pgram.power
    b = coarse_bin
    if b < 1 or b > p.size - 2 or p[b] < p[b - 1] or p[b] < p[b + 1]:
        raise ValueError(f"bin {coarse_bin} is not an interior local maximum")

    x = signal.samples
    w = window_sequence(window, x.size)
    xw = w * x
    bin_step = 2.0 * math.pi / (pgram.bins * signal.ts)
    center = pgram.bin_omega[b]
    grid = np.linspace(center - bin_step, center + bin_step, grid_points)
    z = _kernels.dtft_points(xw, signal.ts, grid)
    mag2 = np.abs(z) ** 2
    i = int(np.argmax(mag2))
    step = grid[1] - grid[0]
    omega_hat = grid[i]
    if 0 < i < grid_points - 1:
        la, lb, lg = np.log(mag2[i - 1:i + 2])
        denom = la - 2.0 * lb + lg
        if denom < 0:
            offset = 0.5 * (la - lg) / denom
            omega_hat += offset * step
    omega_hat = wrap_phase(omega_hat * signal.ts) / signal.ts

    z_hat = _kernels.dtft_points(xw, signal.ts, np.array([omega_hat]))[0]
    amp = abs(z_hat) / float(np.sum(w))
    phase = math.atan2(z_hat.imag, z_hat.real)
    return SpectralPeak(float(omega_hat), float(amp), float(phase), b)
