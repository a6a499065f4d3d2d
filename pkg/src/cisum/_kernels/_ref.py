"""Pure-numpy reference implementations of the hot kernels.

These mirror the compiled versions in ``_fast.pyx`` operation-for-operation;
either backend must satisfy the same unit tests.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def synth_components(amps, omegas, phases, ts, n):
    """Sum of K cisoids a_k * exp(j(w_k * m * ts + phi_k)) over m = 0..n-1.

    Components are accumulated in the order given.
    """
    amps = np.asarray(amps, dtype=np.float64)
    omegas = np.asarray(omegas, dtype=np.float64)
    phases = np.asarray(phases, dtype=np.float64)
    t = np.arange(n, dtype=np.float64) * ts
    out = np.zeros(n, dtype=np.complex128)
    for a, w, p in zip(amps, omegas, phases):
        out += a * np.exp(1j * (w * t + p))
    return out


def demod_boxcar_decimate(x, omega, ts, block):
    """Demodulate by exp(-j*omega*m*ts), average over blocks, decimate.

    Returns one complex sample per full block of ``block`` inputs; a
    trailing partial block is dropped.
    """
    x = np.asarray(x, dtype=np.complex128)
    nblocks = x.size // block
    m = nblocks * block
    t = np.arange(m, dtype=np.float64) * ts
    h = x[:m] * np.exp(-1j * omega * t)
    return h.reshape(nblocks, block).sum(axis=1) / block


def dtft_points(x, ts, omegas):
    """Exact-length transform sum_m x[m] * exp(-j*w*m*ts) at each w."""
    x = np.asarray(x, dtype=np.complex128)
    omegas = np.asarray(omegas, dtype=np.float64)
    t = np.arange(x.size, dtype=np.float64) * ts
    return np.exp(-1j * np.outer(omegas, t)) @ x


def lag1_autocorr(z):
    """Complex lag-1 autocorrelation sum z[m+1] * conj(z[m])."""
    z = np.asarray(z, dtype=np.complex128)
    if z.size < 2:
        return 0j
    return complex(np.sum(z[1:] * np.conj(z[:-1])))
