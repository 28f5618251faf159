"""Far-field steered response power with phase transform weighting.

Azimuth convention: -90 degrees is hard left, 0 straight ahead, +90 hard
right; the steering unit vector is u = (sin a, 0, cos a) and a microphone at
position p hears a plane wave from direction a at relative delay -(u . p) / c.

The response sums Re{G_ij[t, k] * exp(+2i pi f_k (d_i - d_j))} over all
unordered microphone pairs, frames and retained bins, clamps each azimuth bin
at zero from below after the full summation, and normalizes by
pairs * frames * bins.  Frames are summed before the steering scan (the
steering term does not depend on t) and the remaining reduction runs in a
fixed loop order, so results are reproducible call to call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .audio import ArrayGeometry
from .stft import StftStack

PHAT_EPSILON = 1e-12


@dataclass(frozen=True)
class AzimuthGrid:
    """B equal-width bins partitioning [-90, +90] degrees."""

    n_bins: int = 30

    def __post_init__(self):
        if self.n_bins < 2:
            raise ValueError("need at least 2 azimuth bins")

    @property
    def bin_width(self) -> float:
        return 180.0 / self.n_bins

    @property
    def bin_centers(self) -> np.ndarray:
        b = np.arange(self.n_bins, dtype=np.float64)
        return -90.0 + (b + 0.5) * self.bin_width

    def bin_of(self, azimuth_deg: float) -> int:
        """Index of the bin containing the given azimuth, edges clamped."""
        if not -90.0 <= azimuth_deg <= 90.0:
            raise ValueError("azimuth outside [-90, 90]")
        b = int(np.floor((azimuth_deg + 90.0) / self.bin_width))
        return min(max(b, 0), self.n_bins - 1)


@dataclass
class DoaResponse:
    """Steered energy per azimuth bin."""

    energies: np.ndarray
    grid: AzimuthGrid

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=np.float64)
        if self.energies.shape != (self.grid.n_bins,):
            raise ValueError("energies length must match the grid")
        if not np.all(np.isfinite(self.energies)):
            raise ValueError("energies must be finite")


def steering_delays(geometry: ArrayGeometry, azimuth_deg: float) -> np.ndarray:
    """Relative arrival delay per microphone for a far-field plane wave."""
    a = np.deg2rad(azimuth_deg)
    u = np.array([np.sin(a), 0.0, np.cos(a)])
    return -(geometry.positions @ u) / geometry.speed_of_sound


def gcc_phat_cross(stack: StftStack, i: int, j: int, eps: float = PHAT_EPSILON) -> np.ndarray:
    """Phase-transform cross-spectrum of channels i and j, shaped (frames, bins).

    Each time-frequency cell is X_i * conj(X_j) divided by max(|.|, eps), so
    cells carry phase only and an all-zero frame stays exactly zero.
    """
    cross = stack.data[i] * np.conj(stack.data[j])
    return cross / np.maximum(np.abs(cross), eps)


def srp_phat(stack: StftStack, geometry: ArrayGeometry, grid: AzimuthGrid | None = None) -> DoaResponse:
    """Scan the azimuth grid with PHAT-weighted steered response power."""
    if grid is None:
        grid = AzimuthGrid()
    m = stack.channels
    if m < 2:
        raise ValueError("beamforming needs at least 2 channels")
    if geometry.n_mics != m:
        raise ValueError(
            f"geometry has {geometry.n_mics} microphones but the stack has {m} channels"
        )
    if stack.n_frames < 1 or stack.n_bins < 1:
        raise ValueError("empty spectrogram stack")

    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    g_sum = np.empty((len(pairs), stack.n_bins), dtype=np.complex128)
    for p, (i, j) in enumerate(pairs):
        g_sum[p] = gcc_phat_cross(stack, i, j).sum(axis=0)

    delays = np.stack([steering_delays(geometry, a) for a in grid.bin_centers])
    left = np.array([i for i, _ in pairs])
    right = np.array([j for _, j in pairs])
    tau = np.ascontiguousarray(delays[:, left] - delays[:, right])
    omega = 2.0 * np.pi * stack.bin_freqs

    r = _backend.kernels.steered_power(
        np.ascontiguousarray(g_sum.real),
        np.ascontiguousarray(g_sum.imag),
        tau,
        omega,
    )
    norm = len(pairs) * stack.n_frames * stack.n_bins
    return DoaResponse(np.maximum(r, 0.0) / norm, grid)


def argmax_doa(response: DoaResponse) -> float:
    """Center of the highest-energy bin.

    Exact ties resolve toward the bin nearest 0 degrees, and toward the left
    between the two equidistant candidates.
    """
    energies = response.energies
    centers = response.grid.bin_centers
    peak = energies.max()
    tied = np.flatnonzero(energies == peak)
    best = min(tied, key=lambda b: (abs(centers[b]), centers[b]))
    return float(centers[best])
