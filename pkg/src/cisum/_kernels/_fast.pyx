# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the per-sample hot loops.

Same contracts as ``_ref.py``; selected at import time by the package.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

BACKEND = "compiled"


def synth_components(amps, omegas, phases, double ts, Py_ssize_t n):
    """Sum of K cisoids a_k * exp(j(w_k * m * ts + phi_k)) over m = 0..n-1."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(amps, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(omegas, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p = np.ascontiguousarray(phases, dtype=np.float64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.zeros(n, dtype=np.complex128)
    cdef Py_ssize_t k, m
    cdef double ang, t, ak, wk, pk
    for k in range(a.shape[0]):
        ak = a[k]
        wk = w[k]
        pk = p[k]
        for m in range(n):
            t = m * ts
            ang = wk * t + pk
            out[m] += ak * cos(ang) + 1j * (ak * sin(ang))
    return out


DEF REFRESH = 128


def demod_boxcar_decimate(x, double omega, double ts, Py_ssize_t block):
    """Demodulate by exp(-j*omega*m*ts), average over blocks, decimate.

    Uses a one-multiply phase recurrence, re-anchored from cos/sin every
    128 samples to keep rounding drift near machine precision.
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] xi = np.ascontiguousarray(x, dtype=np.complex128)
    cdef Py_ssize_t nblocks = xi.shape[0] // block
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(nblocks, dtype=np.complex128)
    cdef Py_ssize_t b, i, m
    cdef double ang
    cdef double complex acc, rot, step
    step = cos(-omega * ts) + 1j * sin(-omega * ts)
    rot = 1.0
    m = 0
    for b in range(nblocks):
        acc = 0
        for i in range(block):
            if m % REFRESH == 0:
                ang = -omega * (m * ts)
                rot = cos(ang) + 1j * sin(ang)
            acc += xi[m] * rot
            rot *= step
            m += 1
        out[b] = acc / block
    return out


def dtft_points(x, double ts, omegas):
    """Exact-length transform sum_m x[m] * exp(-j*w*m*ts) at each w.

    Same phase recurrence as demod_boxcar_decimate.
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] xi = np.ascontiguousarray(x, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(omegas, dtype=np.float64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(w.shape[0], dtype=np.complex128)
    cdef Py_ssize_t i, m, n
    cdef double ang, wi
    cdef double complex acc, rot, step
    n = xi.shape[0]
    for i in range(w.shape[0]):
        wi = w[i]
        step = cos(-wi * ts) + 1j * sin(-wi * ts)
        acc = 0
        rot = 1.0
        for m in range(n):
            if m % REFRESH == 0:
                ang = -wi * (m * ts)
                rot = cos(ang) + 1j * sin(ang)
            acc += xi[m] * rot
            rot *= step
        out[i] = acc
    return out


def lag1_autocorr(z):
    """Complex lag-1 autocorrelation sum z[m+1] * conj(z[m])."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zi = np.ascontiguousarray(z, dtype=np.complex128)
    cdef double complex acc = 0
    cdef Py_ssize_t m
    if zi.shape[0] < 2:
        return 0j
    for m in range(zi.shape[0] - 1):
        acc += zi[m + 1] * zi[m].conjugate()
    return complex(acc)
