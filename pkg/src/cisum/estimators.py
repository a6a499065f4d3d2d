"""Sum-parameter estimators: the iterative global method plus two baselines.

All three estimators return an EstimationResult holding the estimated
sum-parameter vector, the total-power and noise-variance estimates, and
iteration metadata.  They are pure, deterministic functions of
(signal, configuration).

The global method (exposed to the CLI as ``egem``) never identifies
individual components for its frequency estimate.  It works from
noise-floor-subtracted spectral power moments: the zeroth moment estimates
the total power and the power-weighted centroid seeds an iterative
demodulate / low-pass / decimate refinement loop.  When the demodulated
signal is concentrated inside the low-pass passband (single tone or a
tight cluster), the frequency step is the phase slope of the lag-1
autocorrelation of the decimated baseband, which reaches the N^-3
frequency-information floor; otherwise the step re-centers the demodulated
spectrum's power centroid, which keeps the estimate unbiased for
wide-spread ensembles.  The amplitude-sum and phasor-sum estimates reuse
the spectral peak list (threshold + zoom refinement) shared with the
Zoom-IpFFT baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal.windows import kaiser

from . import _kernels
from .errors import EstimationError, IllConditionedMatrixError
from .signals import SampledSignal, SumParams, wrap_phase
from .spectrum import (Periodogram, find_peak_bins, noise_floor_estimate,
                       periodogram, zoom_refine_peak)

MOMENT_TAPER_BETA = 5.0
RELATIVE_PEAK_FLOOR = 1e-8


@dataclass(frozen=True)
class EgemConfig:
    """Tuning knobs for the iterative global estimator.

    freq_tol and lowpass_len default to 1e-9/ts and max(4, n//32) when
    left as None.  k_eff enters only the fallback amplitude-sum
    initialization sqrt(P*k_eff) used when no spectral peaks clear the
    detection threshold; its sanctioned range is [1.5, 3].
    """

    max_iter: int = 8
    freq_tol: float | None = None
    lowpass_len: int | None = None
    k_eff: float = 2.0
    noise_sigma2: float | None = None
    peak_threshold_db: float = 6.0
    concentration_limit: float = 0.005
    max_peaks: int = 64
    printed_sigma_init: bool = False
    trace: bool = False

    def __post_init__(self):
        if not 1 <= self.max_iter <= 100:
            raise ValueError("max_iter must be in [1, 100]")
        if self.freq_tol is not None and not self.freq_tol > 0:
            raise ValueError("freq_tol must be > 0")
        if not 1.5 <= self.k_eff <= 3.0:
            raise ValueError("k_eff must be in [1.5, 3]")
        if self.noise_sigma2 is not None and self.noise_sigma2 < 0:
            raise ValueError("noise_sigma2 must be >= 0")


@dataclass(frozen=True)
class EstimationResult:
    theta_hat: SumParams
    p_hat: float
    sigma2_hat: float
    iterations: int
    converged: bool
    per_iteration_trace: tuple | None = None


def _zero_result(sigma2_hat: float = 0.0) -> EstimationResult:
    return EstimationResult(SumParams(0.0, 0.0, 0j), 0.0, sigma2_hat, 0, False)


# ---------------------------------------------------------------------------
# shared peak machinery
# ---------------------------------------------------------------------------

def _peak_threshold(pgram: Periodogram, sigma2_hat: float,
                    threshold_db: float) -> float:
    """Detection threshold: sigma2 + threshold_db, with a -80 dB relative
    floor so that window sidelobes are never promoted to peaks when the
    noise floor is (near) zero."""
    return max(sigma2_hat * 10.0 ** (threshold_db / 10.0),
               float(pgram.power.max()) * RELATIVE_PEAK_FLOOR)


def _detect_and_refine(signal: SampledSignal, pgram: Periodogram,
                       sigma2_hat: float, threshold_db: float,
                       max_peaks: int):
    thr = _peak_threshold(pgram, sigma2_hat, threshold_db)
    bins = find_peak_bins(pgram, thr, max_peaks=max_peaks)
    return [zoom_refine_peak(signal, b, pgram.window, pgram.zero_pad_factor,
                             pgram=pgram)
            for b in bins]


def _theta_from_peaks(peaks) -> tuple[SumParams, float]:
    sig = sum(p.amp_hat for p in peaks)
    om = sum(p.amp_hat ** 2 * p.omega_hat for p in peaks)
    phi = sum(p.amp_hat ** 2 *
              complex(math.cos(p.phase_hat), math.sin(p.phase_hat))
              for p in peaks)
    p_hat = sum(p.amp_hat ** 2 for p in peaks)
    return SumParams(float(sig), float(om), complex(phi)), float(p_hat)


# ---------------------------------------------------------------------------
# EGEM
# ---------------------------------------------------------------------------

def _moment_spectrum(x: np.ndarray, ts: float):
    """Kaiser-tapered power spectrum calibrated to noise bin power sigma2.

    A beta=5 Kaiser taper keeps the signal-times-noise variance of the
    moments near the untapered optimum while its sidelobe tail is low
    enough that band-edge wrap-around bias stays below the noise floor of
    the benchmark grid (a rectangular taper fails at high SNR).
    """
    n = x.size
    w = kaiser(n, MOMENT_TAPER_BETA)
    p = np.abs(np.fft.fft(w * x)) ** 2 / float(np.sum(w * w))
    omega = 2.0 * math.pi * np.fft.fftfreq(n, d=ts)
    return omega, p


def egem_estimate(signal: SampledSignal,
                  config: EgemConfig | None = None) -> EstimationResult:
    """Iterative global estimation of the sum-parameter vector.

    O(N log N) per call independent of the number of components.  An
    all-zero input (or one indistinguishable from noise) returns a zero
    vector with converged=False.
    """
    config = config or EgemConfig()
    x = signal.samples
    n = signal.n
    ts = signal.ts
    if n < 16:
        raise ValueError(f"egem needs N >= 16, got {n}")
    if not np.any(x):
        return _zero_result()

    freq_tol = config.freq_tol if config.freq_tol is not None else 1e-9 / ts
    lowpass = (config.lowpass_len if config.lowpass_len is not None
               else max(4, n // 32))
    if lowpass < 1 or lowpass > n // 2:
        raise ValueError(f"lowpass_len {lowpass} out of range for N={n}")

    # the shared peak/floor periodogram; tiny records are zero-padded so the
    # negative-half noise floor still has enough bins to take a median over
    pgram = periodogram(signal, "blackman_harris_4", 1 if n >= 32 else 4)
    if config.noise_sigma2 is not None:
        sigma2_hat = config.noise_sigma2
    else:
        sigma2_hat = noise_floor_estimate(pgram)

    omega_bins, pmom = _moment_spectrum(x, ts)
    resid = pmom - sigma2_hat
    p_hat = max(float(resid.sum()) / n, 0.0)
    if p_hat == 0.0:
        return _zero_result(sigma2_hat)

    # line-2 style initialization: clipped power-weighted centroid over the
    # positive band, amplitude sum from raw periodogram peak bins
    clipped = np.maximum(resid, 0.0)
    pos = omega_bins > 0
    wsum = float(clipped[pos].sum())
    omega = (float((omega_bins[pos] * clipped[pos]).sum()) / wsum
             if wsum > 0 else 0.0)

    thr = _peak_threshold(pgram, sigma2_hat, config.peak_threshold_db)
    peak_bins = find_peak_bins(pgram, thr, max_peaks=config.max_peaks)
    gains = pgram.window_gain
    bin_amp = np.sqrt(pgram.power[peak_bins] * gains.incoherent
                      / (n * gains.coherent ** 2)) if peak_bins else np.array([])
    if config.printed_sigma_init:
        sigma_sum = math.sqrt(n * p_hat * config.k_eff)
    elif peak_bins:
        sigma_sum = float(bin_amp.sum())
    else:
        sigma_sum = math.sqrt(p_hat * config.k_eff)

    # concentration gate: fraction of power outside the low-pass passband
    band = math.pi / (lowpass * ts)
    nu = wrap_phase_array((omega_bins - omega) * ts) / ts
    out_power = float(resid[np.abs(nu) > band].sum()) / n
    concentrated = out_power < config.concentration_limit * p_hat

    trace = [] if config.trace else None
    converged = False
    iterations = 0
    phi_mid = 0.0
    for _ in range(config.max_iter):
        iterations += 1
        hlp = _kernels.demod_boxcar_decimate(x, omega, ts, lowpass)
        c = complex(np.mean(hlp))
        phi_mid = math.atan2(c.imag, c.real) + omega * ts * (n - 1) / 2.0
        if concentrated:
            r1 = _kernels.lag1_autocorr(hlp)
            step = math.atan2(r1.imag, r1.real) / (lowpass * ts)
        else:
            _, pdem = _moment_spectrum(x * np.exp(-1j * omega *
                                                  np.arange(n) * ts), ts)
            step = float((omega_bins * (pdem - sigma2_hat)).sum()) / n / p_hat
        omega += step
        if trace is not None:
            phi_now = p_hat * complex(math.cos(phi_mid - omega * ts * (n - 1) / 2),
                                      math.sin(phi_mid - omega * ts * (n - 1) / 2))
            trace.append((omega, phi_now, sigma_sum))
        if abs(step) < freq_tol:
            converged = True
            break

    # final refresh: zoom-refined peak list for the amplitude sum (and the
    # phasor sum when the spectrum is not single-cluster)
    peaks = [zoom_refine_peak(signal, b, "blackman_harris_4",
                              pgram.zero_pad_factor, pgram=pgram)
             for b in peak_bins]
    if peaks:
        sigma_sum = float(sum(p.amp_hat for p in peaks))
    phase0 = phi_mid - omega * ts * (n - 1) / 2.0
    if concentrated:
        phi_sum = p_hat * complex(math.cos(phase0), math.sin(phase0))
    elif peaks:
        phi_sum = complex(sum(p.amp_hat ** 2 *
                              complex(math.cos(p.phase_hat),
                                      math.sin(p.phase_hat)) for p in peaks))
    else:
        phi_sum = p_hat * complex(math.cos(phase0), math.sin(phase0))

    theta = SumParams(sigma_sum, omega * p_hat, phi_sum)
    return EstimationResult(theta, p_hat, sigma2_hat, iterations, converged,
                            tuple(trace) if trace is not None else None)


def wrap_phase_array(phi: np.ndarray) -> np.ndarray:
    return (phi + math.pi) % (2.0 * math.pi) - math.pi


# ---------------------------------------------------------------------------
# Zoom-IpFFT baseline
# ---------------------------------------------------------------------------

def zoom_ipfft_estimate(signal: SampledSignal, max_peaks: int = 64,
                        zero_pad_factor: int = 2,
                        threshold_db: float = 6.0) -> EstimationResult:
    """Zoom-interpolated FFT baseline with the 4-term Blackman-Harris window.

    Every local maximum of the windowed periodogram above the noise floor
    plus threshold_db (strongest first, at most max_peaks) is refined with
    the zoomed transform, and the sum-parameters are assembled directly
    from the refined peak list.
    """
    if signal.n < 64:
        raise ValueError(f"zoom-ipfft needs N >= 64, got {signal.n}")
    pgram = periodogram(signal, "blackman_harris_4", zero_pad_factor)
    sigma2_hat = noise_floor_estimate(pgram)
    if max_peaks <= 0:
        return _zero_result(sigma2_hat)
    peaks = _detect_and_refine(signal, pgram, sigma2_hat, threshold_db,
                               max_peaks)
    if not peaks:
        return _zero_result(sigma2_hat)
    theta, p_hat = _theta_from_peaks(peaks)
    return EstimationResult(theta, p_hat, sigma2_hat, 1, True)


# ---------------------------------------------------------------------------
# Root-MUSIC baseline
# ---------------------------------------------------------------------------

def _covariance_fb(x: np.ndarray, m: int) -> np.ndarray:
    """Forward-backward averaged sample covariance from sliding snapshots."""
    count = x.size - m + 1
    idx = np.arange(m)[:, None] + np.arange(count)[None, :]
    snaps = x[idx]
    r = snaps @ snaps.conj().T / count
    rev = r[::-1, ::-1].conj()
    return 0.5 * (r + rev)


def _polish_null_spectrum_min(u: np.ndarray, m: int, omega: float) -> float:
    """Newton-polish a unit-circle minimum of the null spectrum.

    f(w) = sum_l u_l exp(jlw) is the (real, nonnegative) noise-subspace
    quadratic form; its minima locate the signal frequencies.  Rooting the
    degree-2(m-1) polynomial is only accurate to ~1e-9 rad, which is not
    enough for the noiseless contracts downstream; a few Newton steps on
    f' converge to machine precision.
    """
    ls = np.arange(-(m - 1), m)
    cap = math.pi / (4 * m)
    for _ in range(4):
        ph = np.exp(1j * ls * omega)
        d1 = float(np.real(np.sum(u * 1j * ls * ph)))
        d2 = float(np.real(-np.sum(u * ls * ls * ph)))
        if d2 <= 0:
            break
        step = -d1 / d2
        step = max(-cap, min(cap, step))
        omega += step
        if abs(step) < 1e-15:
            break
    return omega


def root_music_frequencies(signal: SampledSignal, model_order: int,
                           subarray_len: int,
                           return_roots: bool = False):
    """Frequencies of the model_order roots nearest the unit circle.

    Forward-backward averaged covariance of dimension subarray_len,
    eigendecomposition, noise-subspace polynomial, roots inside the unit
    circle (each conjugate-reciprocal pair contributes its inside member),
    each polished by a Newton refinement of the null-spectrum minimum.
    """
    n = signal.n
    if not 1 <= model_order < subarray_len:
        raise ValueError("need 1 <= model_order < subarray_len")
    if subarray_len > n // 2:
        raise ValueError(f"subarray_len must be <= N/2 = {n // 2}")
    r = _covariance_fb(signal.samples, subarray_len)
    try:
        eigval, eigvec = np.linalg.eigh(r)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"degenerate eigenstructure: {exc}") from exc
    noise_dim = subarray_len - model_order
    un = eigvec[:, :noise_dim]
    c = un @ un.conj().T
    m = subarray_len
    coeffs = np.array([np.trace(c, offset=l) for l in range(m - 1, -m, -1)])
    roots = np.roots(coeffs)
    inside = roots[np.abs(roots) < 1.0]
    if inside.size < model_order:
        # numerically on/outside the circle; fall back to all roots,
        # deduplicating conjugate-reciprocal partners by keeping |z| <= 1
        order = np.argsort(np.abs(np.abs(roots) - 1.0))
        picked: list[complex] = []
        for z in roots[order]:
            if len(picked) >= model_order:
                break
            if abs(z) > 1.0:
                z = 1.0 / z.conjugate()
            if all(abs(z - q) > 1e-8 for q in picked):
                picked.append(z)
        chosen = np.array(picked)
    else:
        order = np.argsort(1.0 - np.abs(inside))
        chosen = inside[order[:model_order]]
    if chosen.size < model_order:
        raise EstimationError(
            f"found only {chosen.size} usable roots for order {model_order}")
    u = np.array([np.trace(c, offset=l) for l in range(-(m - 1), m)])
    polished = [_polish_null_spectrum_min(u, m, w)
                for w in np.angle(chosen)]
    freqs = np.sort(np.array(polished) / signal.ts)
    if return_roots:
        return freqs, chosen
    return freqs


def ls_amp_phase(signal: SampledSignal, freqs) -> list[tuple[float, float]]:
    """Least-squares complex amplitudes at the given frequencies.

    Solves x ~ sum_k c_k v(w_k) over the steering vectors
    v(w) = [1, exp(jw ts), ...] and returns (|c_k|, angle(c_k)) pairs.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    n = signal.n
    if freqs.size > n // 4:
        raise ValueError("too many frequencies for a stable fit (K > N/4)")
    if freqs.size > 1:
        gaps = np.abs(freqs[:, None] - freqs[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() <= 1e-6 / signal.ts:
            raise IllConditionedMatrixError(
                f"near-coincident frequencies (min gap {gaps.min():.3e} rad/s)")
    t = np.arange(n) * signal.ts
    v = np.exp(1j * np.outer(t, freqs))
    coef, _, rank, _ = np.linalg.lstsq(v, signal.samples, rcond=None)
    if rank < freqs.size:
        raise IllConditionedMatrixError(
            f"steering matrix rank {rank} < {freqs.size}")
    return [(float(abs(c)), float(np.angle(c))) for c in coef]


def root_music_estimate(signal: SampledSignal, model_order: int,
                        subarray_len: int | None = None) -> EstimationResult:
    """Root-MUSIC frequencies + least-squares amplitudes -> sum-parameters."""
    if subarray_len is None:
        subarray_len = min(signal.n // 3, 64)
    r = _covariance_fb(signal.samples, subarray_len)
    freqs = root_music_frequencies(signal, model_order, subarray_len)
    pairs = ls_amp_phase(signal, freqs)
    sig = sum(a for a, _ in pairs)
    om = sum(a * a * w for (a, _), w in zip(pairs, freqs))
    phi = sum(a * a * complex(math.cos(p), math.sin(p)) for a, p in pairs)
    p_hat = sum(a * a for a, _ in pairs)
    eigval = np.linalg.eigvalsh(r)
    sigma2_hat = float(np.mean(eigval[:subarray_len - model_order]))
    theta = SumParams(float(sig), float(om), complex(phi))
    return EstimationResult(theta, float(p_hat), sigma2_hat, 1, True)
