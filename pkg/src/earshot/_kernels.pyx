# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: steered-power scan and fractional-delay mixing.

Both functions have drop-in numpy twins in ``_kernels_np``; the package picks
one implementation at import time (see ``_backend``).  Loops run single
threaded in a fixed order, so repeated calls with the same inputs produce the
same bytes.
"""

from libc.math cimport cos, floor, sin

import numpy as np


def steered_power(double[:, ::1] g_re, double[:, ::1] g_im,
                  double[:, ::1] tau, double[::1] omega):
    """Steered response r[b] = sum_{p,k} Re{G[p,k] * exp(i*omega[k]*tau[b,p])}.

    g_re, g_im : (pairs, bins) frame-summed cross-spectra, real and imag parts
    tau        : (azimuths, pairs) steering delay differences in seconds
    omega      : (bins,) angular frequencies 2*pi*f
    """
    cdef Py_ssize_t n_az = tau.shape[0]
    cdef Py_ssize_t n_pairs = g_re.shape[0]
    cdef Py_ssize_t n_bins = g_re.shape[1]
    out = np.zeros(n_az)
    cdef double[::1] r = out
    cdef Py_ssize_t b, p, k
    cdef double acc, ph, t
    for b in range(n_az):
        acc = 0.0
        for p in range(n_pairs):
            t = tau[b, p]
            for k in range(n_bins):
                ph = omega[k] * t
                acc += g_re[p, k] * cos(ph) - g_im[p, k] * sin(ph)
        r[b] = acc
    return out


def lerp_mix(double[::1] out, double[::1] sig, double[::1] delay,
             double[::1] amp, Py_ssize_t lead):
    """Accumulate a time-varying fractional delay of ``sig`` into ``out``.

    out[n] += amp[n] * sig(lead + n - delay[n]) with linear interpolation
    between samples.  ``lead`` is the number of warm-up samples prepended to
    ``sig`` so that early output samples can look back before t = 0.  Samples
    whose read position falls outside ``sig`` contribute nothing.
    """
    cdef Py_ssize_t n, lo
    cdef Py_ssize_t n_out = out.shape[0]
    cdef Py_ssize_t n_sig = sig.shape[0]
    cdef double pos, frac
    for n in range(n_out):
        if amp[n] == 0.0:
            continue
        pos = lead + n - delay[n]
        lo = <Py_ssize_t>floor(pos)
        if lo < 0 or lo + 1 >= n_sig:
            continue
        frac = pos - lo
        out[n] += amp[n] * (sig[lo] + frac * (sig[lo + 1] - sig[lo]))
