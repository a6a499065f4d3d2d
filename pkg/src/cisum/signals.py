"""Signal model: cisoid ensembles, sum-parameters, synthesis and scenarios.

The observation model is

    x(n) = sum_k a_k * exp(j*(w_k * n * Ts + phi_k)) + w(n),   n = 0..N-1,

with circular complex white Gaussian noise of total variance sigma2 (each
quadrature carries sigma2/2).  The global parameters of interest are the
amplitude sum, the power-weighted frequency sum and the power-weighted
complex phasor sum; all three are invariant under permutation of the
component list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InfeasibleScenarioError

TWO_PI = 2.0 * math.pi


def wrap_phase(phi: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (phi + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class Cisoid:
    """One complex-exponential component.

    amplitude is linear and strictly positive, omega is the angular
    frequency in rad/s, phase is wrapped into [-pi, pi) on construction.
    """

    amplitude: float
    omega: float
    phase: float

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")
        object.__setattr__(self, "phase", wrap_phase(float(self.phase)))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "omega", float(self.omega))


@dataclass(frozen=True)
class CisoidEnsemble:
    """Ordered component list plus the sampling interval ts (seconds).

    Every component must satisfy |omega * ts| < pi (complex Nyquist).
    """

    components: tuple[Cisoid, ...]
    ts: float

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise ValueError("ensemble needs at least one component")
        if not self.ts > 0:
            raise ValueError(f"ts must be > 0, got {self.ts}")
        for c in comps:
            if abs(c.omega * self.ts) >= math.pi:
                raise ValueError(
                    f"|omega*ts| must be < pi, got {c.omega * self.ts}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "ts", float(self.ts))

    @property
    def k(self) -> int:
        return len(self.components)

    def canonical(self) -> tuple[Cisoid, ...]:
        """Components sorted by (omega, amplitude, phase).

        Summations use this order so permuted ensembles produce bitwise
        identical results.
        """
        return tuple(sorted(self.components,
                            key=lambda c: (c.omega, c.amplitude, c.phase)))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(amplitudes, omegas, phases) in canonical order."""
        comps = self.canonical()
        amps = np.array([c.amplitude for c in comps], dtype=np.float64)
        omegas = np.array([c.omega for c in comps], dtype=np.float64)
        phases = np.array([c.phase for c in comps], dtype=np.float64)
        return amps, omegas, phases


@dataclass(frozen=True)
class SumParams:
    """The four-real-dimensional global parameter vector.

    sigma_sum = sum_k a_k, omega_sum = sum_k a_k^2 w_k,
    phi_sum = sum_k a_k^2 exp(j phi_k).
    """

    sigma_sum: float
    omega_sum: float
    phi_sum: complex

    def __post_init__(self):
        if self.sigma_sum < 0:
            raise ValueError("sigma_sum must be >= 0")

    def as_vector(self) -> np.ndarray:
        """[sigma_sum, omega_sum, Re(phi_sum), Im(phi_sum)]."""
        return np.array([self.sigma_sum, self.omega_sum,
                         self.phi_sum.real, self.phi_sum.imag])

    @classmethod
    def from_vector(cls, v) -> "SumParams":
        return cls(float(v[0]), float(v[1]), complex(v[2], v[3]))


@dataclass(frozen=True)
class SampledSignal:
    """Complex observation sequence with its sampling interval."""

    samples: np.ndarray
    ts: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("signal needs at least 2 samples")
        if not self.ts > 0:
            raise ValueError(f"ts must be > 0, got {self.ts}")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "ts", float(self.ts))

    @property
    def n(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class NoiseModel:
    """Circular complex white Gaussian noise of total variance sigma2."""

    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    """Random-scenario recipe for the benchmark protocol.

    freq_range is (low, high) in cycles per sample (the fraction-of-1/ts
    convention); min_separation is a normalized frequency-gap floor in the
    same units.  min_separation=None selects the default 4/n; 0 disables
    the floor.  The drawn ensemble is rescaled so that its total power
    equals 10**(snr_db/10), i.e. the companion noise model is sigma2 = 1.
    """

    k: int
    freq_range: tuple[float, float]
    amp_dynamic_range_db: float
    n: int
    snr_db: float
    seed: int
    min_separation: float | None = None
    ts: float = 1.0

    def __post_init__(self):
        low, high = self.freq_range
        if not (0 <= low < high <= 0.5):
            raise ValueError(f"freq_range must satisfy 0 <= low < high <= 0.5, "
                             f"got {self.freq_range}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.amp_dynamic_range_db < 0:
            raise ValueError("amp_dynamic_range_db must be >= 0")
        sep = self.resolved_separation()
        if sep > 0 and (high - low) / self.k <= sep:
            raise InfeasibleScenarioError(
                f"min_separation {sep} infeasible for k={self.k} in "
                f"band width {high - low}")
        object.__setattr__(self, "freq_range", (float(low), float(high)))

    def resolved_separation(self) -> float:
        """Separation floor actually applied (default 4/n)."""
        if self.min_separation is None:
            return 4.0 / self.n
        return float(self.min_separation)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def ground_truth_sum_params(ensemble: CisoidEnsemble) -> SumParams:
    """Exact sum-parameters of an ensemble, summed in canonical order."""
    sig = 0.0
    om = 0.0
    ph = 0j
    for c in ensemble.canonical():
        p = c.amplitude * c.amplitude
        sig += c.amplitude
        om += p * c.omega
        ph += p * complex(math.cos(c.phase), math.sin(c.phase))
    return SumParams(sig, om, ph)


def total_power(ensemble: CisoidEnsemble) -> float:
    """Total signal power sum_k a_k^2."""
    return float(sum(c.amplitude * c.amplitude for c in ensemble.canonical()))


def complex_noise(n: int, sigma2: float, seed: int) -> np.ndarray:
    """Seeded circular complex Gaussian noise of total variance sigma2.

    Two independent standard-normal draws per sample, each scaled by
    sqrt(sigma2/2).
    """
    rng = np.random.default_rng(seed)
    scale = math.sqrt(sigma2 / 2.0)
    re = rng.standard_normal(n)
    im = rng.standard_normal(n)
    return scale * (re + 1j * im)


def synthesize(ensemble: CisoidEnsemble, n: int, noise: NoiseModel,
               seed: int = 0) -> SampledSignal:
    """Synthesize n samples of the ensemble plus seeded noise.

    sigma2 = 0 produces the exact noiseless sum and never touches the RNG,
    so noiseless output is independent of the seed.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    amps, omegas, phases = ensemble.arrays()
    x = _kernels.synth_components(amps, omegas, phases, ensemble.ts, n)
    if noise.sigma2 > 0:
        x = x + complex_noise(n, noise.sigma2, seed)
    return SampledSignal(x, ensemble.ts)


def snr_db(ensemble: CisoidEnsemble, noise: NoiseModel) -> float:
    """10*log10(P_sig / sigma2); +inf for noiseless."""
    if noise.sigma2 == 0:
        return math.inf
    return 10.0 * math.log10(total_power(ensemble) / noise.sigma2)


def lognormal_amplitudes(k: int, dynamic_range_db: float,
                         rng: np.random.Generator) -> np.ndarray:
    """Raw log-normal amplitude draws with median 1.

    The dynamic range D dB is read as the +-2 sigma spread of
    20*log10(a), i.e. the log-std is s = D * ln(10) / 80 (for D = 40 this
    is ln(10)/2 ~ 1.1513).
    """
    s = dynamic_range_db * math.log(10.0) / 80.0
    return np.exp(s * rng.standard_normal(k))


def random_ensemble(config: ScenarioConfig) -> CisoidEnsemble:
    """Draw a random ensemble per the benchmark protocol.

    Frequencies are uniform over the band conditioned on all pairwise
    normalized gaps >= the separation floor (sampled exactly via sorted
    uniforms plus fixed offsets); phases are uniform over [-pi, pi);
    amplitudes are log-normal, then globally rescaled so that
    P_sig = 10**(snr_db/10) (noise convention sigma2 = 1).  Deterministic
    given the seed.
    """
    rng = np.random.default_rng(config.seed)
    low, high = config.freq_range
    k = config.k
    sep = config.resolved_separation()

    span = (high - low) - (k - 1) * sep
    if span < 0:
        raise InfeasibleScenarioError(
            f"min_separation {sep} infeasible for k={k} in band "
            f"width {high - low}")
    u = np.sort(rng.uniform(0.0, span, size=k))
    freqs = low + u + sep * np.arange(k)

    phases = rng.uniform(-math.pi, math.pi, size=k)
    amps = lognormal_amplitudes(k, config.amp_dynamic_range_db, rng)

    target_power = 10.0 ** (config.snr_db / 10.0)
    amps = amps * math.sqrt(target_power / float(np.sum(amps * amps)))

    comps = tuple(
        Cisoid(amplitude=a, omega=TWO_PI * f / config.ts, phase=p)
        for a, f, p in zip(amps, freqs, phases))
    return CisoidEnsemble(comps, config.ts)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def ensemble_to_json(ensemble: CisoidEnsemble) -> str:
    """JSON document with ts and the component list (omega in rad/s)."""
    doc = {
        "ts": ensemble.ts,
        "components": [
            {"amplitude": c.amplitude, "omega": c.omega, "phase": c.phase}
            for c in ensemble.components
        ],
    }
    return json.dumps(doc, indent=2)


def ensemble_from_json(text: str) -> CisoidEnsemble:
    doc = json.loads(text)
    comps = tuple(
        Cisoid(amplitude=c["amplitude"], omega=c["omega"], phase=c["phase"])
        for c in doc["components"])
    return CisoidEnsemble(comps, doc["ts"])


def sum_params_to_json(theta: SumParams) -> str:
    doc = {
        "sigma_sum": theta.sigma_sum,
        "omega_sum": theta.omega_sum,
        "phi_sum": [theta.phi_sum.real, theta.phi_sum.imag],
    }
    return json.dumps(doc, indent=2)


def sum_params_from_json(text: str) -> SumParams:
    doc = json.loads(text)
    re, im = doc["phi_sum"]
    return SumParams(doc["sigma_sum"], doc["omega_sum"], complex(re, im))


def write_signal_csv(signal: SampledSignal, path, *, seed: int | None = None,
                     sigma2: float | None = None) -> None:
    """Write a signal as CSV columns n,re,im with a metadata header comment."""
    meta = [f"ts={signal.ts!r}"]
    if seed is not None:
        meta.append(f"seed={seed}")
    if sigma2 is not None:
        meta.append(f"sigma2={sigma2!r}")
    lines = ["# " + " ".join(meta), "n,re,im"]
    for i, v in enumerate(signal.samples):
        lines.append(f"{i},{float(v.real)!r},{float(v.imag)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_signal_csv(path) -> tuple[SampledSignal, dict]:
    """Read a signal CSV; returns the signal and the header metadata dict."""
    meta: dict = {}
    re_parts: list[float] = []
    im_parts: list[float] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        meta[key] = val
                continue
            if line.startswith("n,"):
                continue
            _, re_s, im_s = line.split(",")
            re_parts.append(float(re_s))
            im_parts.append(float(im_s))
    ts = float(meta.get("ts", 1.0))
    samples = np.array(re_parts) + 1j * np.array(im_parts)
    return SampledSignal(samples, ts), meta
