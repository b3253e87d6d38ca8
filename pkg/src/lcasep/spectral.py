"""STFT sound images in three representation conditions, and their inversion.

A real DFT of ``N`` points has ``N/2 + 1`` bins, but the DC and Nyquist bins
are both purely real. Spectrograms here use the packed layout: bin 0 holds
``DC + 1j * Nyquist`` and bins ``1 .. N/2-1`` are the ordinary coefficients,
so a 512-point transform yields exactly 256 complex bins with nothing lost.

Framing reflect-pads ``hop`` samples at the front and enough at the back to
produce exactly ``n_time_frames`` frames; inversion is weighted overlap-add
(forward unnormalized, inverse divided by the summed squared window).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import get_window

from .audio_io import SAMPLE_RATE, Waveform
from .errors import FormatError, PhaseRequiredError, RepresentationError, ShapeError


class Kind(str, enum.Enum):
    PHASE_RICH = "PhaseRich"
    MAGNITUDE = "Magnitude"
    MAGNITUDE_DOUBLE = "MagnitudeDouble"

    @property
    def fft_size(self) -> int:
        return 1024 if self is Kind.MAGNITUDE_DOUBLE else 512

    @property
    def channels(self) -> int:
        return 2 if self is Kind.PHASE_RICH else 1

    @property
    def code(self) -> int:
        return list(Kind).index(self)


# Experimental conditions and the representation each one codes.
CONDITIONS = {
    "Phase": Kind.PHASE_RICH,
    "NoPhase": Kind.MAGNITUDE,
    "NoPhaseX2": Kind.MAGNITUDE_DOUBLE,
    "Denoised": Kind.PHASE_RICH,
}


def _default_frames(n_samples: int, hop: int) -> int:
    need = -(-n_samples // hop) + 1
    return 1 << (need - 1).bit_length()


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 512
    n_samples: int = 2 * SAMPLE_RATE
    n_time_frames: int | None = None
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.fft_size < 4 or self.fft_size % 2:
            raise ValueError(f"fft_size must be even and >= 4, got {self.fft_size}")
        if self.n_time_frames is None:
            object.__setattr__(self, "n_time_frames",
                               _default_frames(self.n_samples, self.hop))
        min_frames = -(-self.n_samples // self.hop) + 1
        if self.n_time_frames < min_frames:
            raise ValueError(f"{self.n_time_frames} frames cannot cover "
                             f"{self.n_samples} samples at hop {self.hop}")
        # the tail pad must stay shorter than the signal for reflection
        if self.tail_pad >= self.n_samples:
            raise ValueError("too many frames for the signal length")

    @property
    def hop(self) -> int:
        return self.fft_size // 2

    @property
    def n_freq_bins(self) -> int:
        return self.fft_size // 2

    @property
    def tail_pad(self) -> int:
        total = (self.n_time_frames - 1) * self.hop + self.fft_size
        return total - self.hop - self.n_samples

    @property
    def window(self) -> np.ndarray:
        return get_window("hann", self.fft_size)

    @classmethod
    def for_kind(cls, kind: Kind, n_samples: int = 2 * SAMPLE_RATE) -> "StftConfig":
        return cls(fft_size=Kind(kind).fft_size, n_samples=n_samples)


@dataclass(frozen=True)
class ComplexSpectrogram:
    values: np.ndarray
    config: StftConfig

    def __post_init__(self):
        cfg = self.config
        if self.values.shape != (cfg.n_freq_bins, cfg.n_time_frames):
            raise ShapeError(f"spectrogram shape {self.values.shape} does not match "
                             f"config ({cfg.n_freq_bins}, {cfg.n_time_frames})")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectrogram contains NaN or Inf")


@dataclass(frozen=True)
class SoundImage:
    kind: Kind
    data: np.ndarray
    config: StftConfig

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        cfg = self.config
        expected = (kind.channels, cfg.n_freq_bins, cfg.n_time_frames)
        if self.data.shape != expected:
            raise ShapeError(f"{kind.value} image shape {self.data.shape}, expected {expected}")
        if cfg.fft_size != kind.fft_size:
            raise RepresentationError(
                f"{kind.value} requires fft_size {kind.fft_size}, config has {cfg.fft_size}")

    @property
    def shape(self):
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "SoundImage":
        return SoundImage(self.kind, data, self.config)


def stft(w: Waveform, cfg: StftConfig) -> ComplexSpectrogram:
    if w.sample_rate != cfg.sample_rate:
        raise ShapeError(f"sample rate {w.sample_rate}, expected {cfg.sample_rate}")
    if len(w) != cfg.n_samples:
        raise ShapeError(f"waveform has {len(w)} samples, expected {cfg.n_samples}")
    padded = np.pad(w.samples, (cfg.hop, cfg.tail_pad), mode="reflect")
    frames = np.lib.stride_tricks.sliding_window_view(padded, cfg.fft_size)[::cfg.hop]
    full = np.fft.rfft(frames * cfg.window, axis=1).T
    packed = full[:-1].copy()
    packed[0] = full[0].real + 1j * full[-1].real
    return ComplexSpectrogram(packed, cfg)


def _unpack(values: np.ndarray) -> np.ndarray:
    full = np.empty((values.shape[0] + 1, values.shape[1]), dtype=np.complex128)
    full[1:-1] = values[1:]
    full[0] = values[0].real
    full[-1] = values[0].imag
    return full


def istft(s: ComplexSpectrogram) -> Waveform:
    cfg = s.config
    frames = np.fft.irfft(_unpack(s.values), n=cfg.fft_size, axis=0).T
    win = cfg.window
    total = (cfg.n_time_frames - 1) * cfg.hop + cfg.fft_size
    out = np.zeros(total)
    norm = np.zeros(total)
    for t in range(cfg.n_time_frames):
        sl = slice(t * cfg.hop, t * cfg.hop + cfg.fft_size)
        out[sl] += frames[t] * win
        norm[sl] += win * win
    keep = slice(cfg.hop, cfg.hop + cfg.n_samples)
    return Waveform(out[keep] / norm[keep], cfg.sample_rate)


def to_sound_image(s: ComplexSpectrogram, kind: Kind) -> SoundImage:
    kind = Kind(kind)
    if s.config.fft_size != kind.fft_size:
        raise RepresentationError(
            f"{kind.value} needs a {kind.fft_size}-point STFT, got {s.config.fft_size}")
    if kind is Kind.PHASE_RICH:
        data = np.stack([s.values.real, s.values.imag])
    else:
        data = np.abs(s.values)[None]
    return SoundImage(kind, data, s.config)


def waveform_to_image(w: Waveform, kind: Kind) -> SoundImage:
    return to_sound_image(stft(w, StftConfig.for_kind(kind, len(w))), kind)


def negative_count(img: SoundImage) -> int:
    """Cells a magnitude inversion would clamp to zero (always 0 for PhaseRich)."""
    if img.kind is Kind.PHASE_RICH:
        return 0
    return int(np.count_nonzero(img.data < 0))


def image_to_waveform(img: SoundImage,
                      mixture_phase: ComplexSpectrogram | None = None) -> Waveform:
    if img.kind is Kind.PHASE_RICH:
        values = img.data[0] + 1j * img.data[1]
        return istft(ComplexSpectrogram(values, img.config))
    if mixture_phase is None:
        raise PhaseRequiredError(f"{img.kind.value} images need the mixture phase to invert")
    if mixture_phase.config != img.config:
        raise RepresentationError("mixture phase config does not match the image config")
    mag = np.maximum(img.data[0], 0.0)
    values = mag * np.exp(1j * np.angle(mixture_phase.values))
    return istft(ComplexSpectrogram(values, img.config))


# -- persistence ---------------------------------------------------------------

IMAGE_MAGIC = b"SIMG"
IMAGE_VERSION = 1
_IMAGE_HEADER = struct.Struct("<4sHHIIIII32s")


def save_image(img: SoundImage, path, tag: bytes = b"") -> None:
    """Write ``img`` as header + little-endian float32 data, channel-major."""
    cfg = img.config
    header = _IMAGE_HEADER.pack(
        IMAGE_MAGIC, IMAGE_VERSION, img.kind.code, img.data.shape[0],
        cfg.n_freq_bins, cfg.n_time_frames, cfg.fft_size, cfg.hop,
        tag[:32].ljust(32, b"\0"),
    )
    Path(path).write_bytes(header + np.ascontiguousarray(img.data, dtype="<f4").tobytes())


def load_image(path, n_samples: int = 2 * SAMPLE_RATE) -> tuple[SoundImage, bytes]:
    """Read an image file; returns the image and its 32-byte provenance tag."""
    raw = Path(path).read_bytes()
    if len(raw) < _IMAGE_HEADER.size or raw[:4] != IMAGE_MAGIC:
        raise FormatError(f"{path}: not a sound image file (bad magic)")
    magic, version, kind_code, ch, nf, nt, fft, hop, tag = _IMAGE_HEADER.unpack_from(raw)
    if version != IMAGE_VERSION:
        raise FormatError(f"{path}: unsupported image version {version}")
    try:
        kind = list(Kind)[kind_code]
    except IndexError:
        raise FormatError(f"{path}: unknown representation code {kind_code}") from None
    body = raw[_IMAGE_HEADER.size:]
    if len(body) != 4 * ch * nf * nt or hop != fft // 2:
        raise FormatError(f"{path}: payload does not match header")
    data = np.frombuffer(body, dtype="<f4").reshape(ch, nf, nt).astype(np.float64)
    cfg = StftConfig(fft_size=fft, n_samples=n_samples, n_time_frames=nt)
    return SoundImage(kind, data, cfg), tag

