"""Numpy fallback for the compiled kernels in ``_kernels.pyx``.

Same contracts as the Cython versions.  ``lerp_mix`` evaluates the identical
per-sample expression and is bit-for-bit equal to the compiled kernel;
``steered_power`` reduces in a different order, so the two backends agree to
rounding (~1e-13 relative), not to the bit.
"""

import numpy as np

_AZ_BLOCK = 16


def steered_power(g_re, g_im, tau, omega):
    """Steered response r[b] = sum_{p,k} Re{G[p,k] * exp(i*omega[k]*tau[b,p])}."""
    n_az = tau.shape[0]
    out = np.empty(n_az)
    # Work in azimuth blocks to bound the (az, pairs, bins) phase tensor.
    for start in range(0, n_az, _AZ_BLOCK):
        stop = min(start + _AZ_BLOCK, n_az)
        phase = tau[start:stop, :, None] * omega[None, None, :]
        out[start:stop] = np.einsum("pk,bpk->b", g_re, np.cos(phase)) - np.einsum(
            "pk,bpk->b", g_im, np.sin(phase)
        )
    return out


def lerp_mix(out, sig, delay, amp, lead):
    """Accumulate a time-varying fractional delay of ``sig`` into ``out``."""
    pos = lead + np.arange(out.shape[0], dtype=np.float64) - delay
    lo = np.floor(pos).astype(np.int64)
    ok = (amp != 0.0) & (lo >= 0) & (lo + 1 < sig.shape[0])
    idx = lo[ok]
    frac = pos[ok] - idx
    out[ok] += amp[ok] * (sig[idx] + frac * (sig[idx + 1] - sig[idx]))
