"""Multichannel audio containers, WAV file I/O and the analysis window.

WAV support is deliberately narrow: RIFF/WAVE with uncompressed 16 or 24 bit
PCM or 32 bit IEEE float payloads, which covers every file this package reads
or writes.  Integer samples are scaled by 2**(bits-1) so a full-scale negative
sample maps to exactly -1.0.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np


class WavError(Exception):
    """Base class for WAV parsing and encoding problems."""


class WavFormatError(WavError):
    """File is not a well-formed RIFF/WAVE container."""


class UnsupportedEncodingError(WavError):
    """Container is fine but the sample encoding is not one we handle."""


class EmptyStreamError(WavError):
    """The data chunk holds zero samples."""


_PCM = 1
_IEEE_FLOAT = 3


@dataclass
class AudioClip:
    """Synchronized multichannel samples, shaped (channels, samples)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 2:
            raise ValueError("samples must be a (channels, samples) array")
        if self.samples.shape[1] < 1:
            raise ValueError("clip must contain at least one sample")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.samples.shape[1] / self.sample_rate

    def channel_subset(self, indices) -> "AudioClip":
        """New clip keeping the given channels, in the given order."""
        idx = list(indices)
        if len(idx) == 0:
            raise ValueError("channel subset must not be empty")
        return AudioClip(self.samples[idx].copy(), self.sample_rate)

    def trailing(self, seconds: float) -> "AudioClip":
        """The last ``seconds`` of the clip."""
        n = int(round(seconds * self.sample_rate))
        if n < 1 or n > self.n_samples:
            raise ValueError(
                f"cannot take trailing {seconds} s from a {self.duration:.3f} s clip"
            )
        return AudioClip(self.samples[:, self.n_samples - n :].copy(), self.sample_rate)


@dataclass
class ArrayGeometry:
    """Microphone positions in meters, array-local axes.

    x points right, y up, z forward; azimuth 0 is straight ahead along +z and
    +90 degrees is to the right.
    """

    positions: np.ndarray
    speed_of_sound: float = 343.0

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ValueError("positions must be an (M, 3) array")
        if self.speed_of_sound <= 0:
            raise ValueError("speed_of_sound must be positive")
        if len(np.unique(self.positions, axis=0)) != len(self.positions):
            raise ValueError("microphone positions must be distinct")

    @property
    def n_mics(self) -> int:
        return self.positions.shape[0]

    def subset(self, indices) -> "ArrayGeometry":
        idx = list(indices)
        return ArrayGeometry(self.positions[idx].copy(), self.speed_of_sound)

    def mirrored_x(self) -> "ArrayGeometry":
        """Geometry reflected across the x = 0 plane (left/right swap)."""
        flipped = self.positions.copy()
        flipped[:, 0] = -flipped[:, 0]
        return ArrayGeometry(flipped, self.speed_of_sound)


def save_geometry(geometry: ArrayGeometry, path) -> None:
    payload = {
        "speed_of_sound": geometry.speed_of_sound,
        "positions": [[float(v) for v in row] for row in geometry.positions],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_geometry(path) -> ArrayGeometry:
    with open(path) as fh:
        payload = json.load(fh)
    try:
        positions = payload["positions"]
        c = float(payload["speed_of_sound"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: not a geometry file") from exc
    return ArrayGeometry(np.asarray(positions, dtype=np.float64), c)


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window w[k] = 0.5 * (1 - cos(2 pi k / n)).

    The degenerate n = 1 window is defined as [1.0] so single-sample frames
    pass through unscaled.
    """
    if n < 1:
        raise ValueError("window length must be >= 1")
    if n == 1:
        return np.ones(1)
    k = np.arange(n, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise WavFormatError(f"truncated file while reading {what}")
    return buf


def load_wav(path) -> AudioClip:
    """Read a PCM16, PCM24 or float32 WAV file into an AudioClip.

    Integer PCM is normalized by 2**(bits-1); float payloads are taken as-is.
    Raises WavFormatError for malformed containers, UnsupportedEncodingError
    for encodings outside the supported set and EmptyStreamError when the data
    chunk holds no samples.  Unreadable paths raise the usual OSError.
    """
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise WavFormatError(f"{path}: not a RIFF/WAVE file")

        fmt = None
        data = None
        while True:
            chunk_header = fh.read(8)
            if len(chunk_header) < 8:
                break
            chunk_id, size = struct.unpack("<4sI", chunk_header)
            if chunk_id == b"fmt ":
                fmt = _read_exact(fh, size, "fmt chunk")
            elif chunk_id == b"data":
                data = _read_exact(fh, size, "data chunk")
            else:
                fh.seek(size, 1)
            if size % 2:
                fh.seek(1, 1)
            if fmt is not None and data is not None:
                break

        if fmt is None or len(fmt) < 16:
            raise WavFormatError(f"{path}: missing fmt chunk")
        if data is None:
            raise WavFormatError(f"{path}: missing data chunk")

    audio_format, n_channels, sample_rate, _, block_align, bits = struct.unpack(
        "<HHIIHH", fmt[:16]
    )
    if n_channels < 1 or sample_rate < 1:
        raise WavFormatError(f"{path}: nonsense fmt chunk")

    if audio_format == _PCM and bits == 16:
        raw = np.frombuffer(data[: len(data) - len(data) % 2], dtype="<i2")
        values = raw.astype(np.float64) / 32768.0
    elif audio_format == _PCM and bits == 24:
        usable = len(data) - len(data) % 3
        raw = np.frombuffer(data[:usable], dtype=np.uint8).reshape(-1, 3)
        padded = np.zeros((raw.shape[0], 4), dtype=np.uint8)
        padded[:, 1:] = raw
        values = (padded.view("<i4").ravel() >> 8).astype(np.float64) / 8388608.0
    elif audio_format == _IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(data[: len(data) - len(data) % 4], dtype="<f4")
        values = raw.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: format tag {audio_format} at {bits} bits is not supported"
        )

    n_frames = values.size // n_channels
    if n_frames == 0:
        raise EmptyStreamError(f"{path}: data chunk holds no samples")
    frames = values[: n_frames * n_channels].reshape(n_frames, n_channels)
    return AudioClip(frames.T.copy(), sample_rate)


def write_wav(clip: AudioClip, path, encoding: str = "pcm24") -> None:
    """Write an AudioClip as little-endian WAV.

    encoding is "pcm24" or "float32".  Samples outside [-1, 1] are rejected
    rather than clipped, so quantization is the only loss.
    """
    if encoding not in ("pcm24", "float32"):
        raise UnsupportedEncodingError(f"unknown encoding {encoding!r}")
    peak = np.max(np.abs(clip.samples)) if clip.samples.size else 0.0
    if peak > 1.0:
        raise ValueError(f"samples exceed [-1, 1] (peak {peak:.6f}); refusing to clip")

    frames = np.ascontiguousarray(clip.samples.T)
    if encoding == "pcm24":
        scaled = np.clip(np.round(frames * 8388608.0), -8388608, 8388607).astype("<i4")
        payload = scaled.tobytes()
        payload = np.frombuffer(payload, dtype=np.uint8).reshape(-1, 4)[:, :3].tobytes()
        audio_format, bits = _PCM, 24
    else:
        payload = frames.astype("<f4").tobytes()
        audio_format, bits = _IEEE_FLOAT, 32

    n_channels = clip.channels
    block_align = n_channels * bits // 8
    byte_rate = clip.sample_rate * block_align
    fmt = struct.pack(
        "<HHIIHH", audio_format, n_channels, clip.sample_rate, byte_rate, block_align, bits
    )
    pad = b"\x00" if len(payload) % 2 else b""
    riff_size = 4 + 8 + len(fmt) + 8 + len(payload) + len(pad)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI4s", b"RIFF", riff_size, b"WAVE"))
        fh.write(struct.pack("<4sI", b"fmt ", len(fmt)))
        fh.write(fmt)
        fh.write(struct.pack("<4sI", b"data", len(payload)))
        fh.write(payload)
        fh.write(pad)
