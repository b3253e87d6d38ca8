"""Two-stem clip loading, equal mixing, truncation and train/test manifests.

Clips follow the MIR-1K layout: one stereo WAV per clip, accompaniment on the
left channel and the singing voice on the right.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.io import wavfile

from .errors import ChannelError, FormatError, LengthError, RateError, ShapeError, SplitError

SAMPLE_RATE = 16000
CHANNELS = ("left", "right")


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ShapeError(f"waveform must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains NaN or Inf")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class ClipPair:
    vocal: Waveform
    accompaniment: Waveform
    clip_id: str

    def __post_init__(self):
        if len(self.vocal) != len(self.accompaniment):
            raise ShapeError(
                f"{self.clip_id}: stem lengths differ "
                f"({len(self.vocal)} vs {len(self.accompaniment)})"
            )
        if self.vocal.sample_rate != self.accompaniment.sample_rate:
            raise RateError(f"{self.clip_id}: stem sample rates differ")

    def __len__(self):
        return len(self.vocal)


@dataclass(frozen=True)
class DatasetManifest:
    train_ids: list[str]
    test_ids: list[str]
    shuffle_seed: int
    vocal_channel: str = "right"
    n_train: int = field(init=False)

    def __post_init__(self):
        overlap = set(self.train_ids) & set(self.test_ids)
        if overlap:
            raise SplitError(f"train and test share clip ids: {sorted(overlap)[:5]}")
        if self.vocal_channel not in CHANNELS:
            raise ValueError(f"vocal_channel must be one of {CHANNELS}")
        object.__setattr__(self, "n_train", len(self.train_ids))

    def split_of(self, clip_id: str) -> str:
        if clip_id in self.train_ids:
            return "train"
        if clip_id in self.test_ids:
            return "test"
        raise KeyError(clip_id)


def _pcm_to_float(data: np.ndarray, path) -> np.ndarray:
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.float32:
        return data.astype(np.float64)
    raise FormatError(f"{path}: unsupported sample encoding {data.dtype} "
                      "(expected 16-bit PCM or 32-bit float)")


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file as float64 samples in [-1, 1], shape (n,) or (n, channels)."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except (ValueError, EOFError, OSError, io.UnsupportedOperation) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise FormatError(f"{path}: malformed WAV ({exc})") from exc
    return _pcm_to_float(data, path), int(rate)


def load_clip_pair(path, vocal_channel: str = "right") -> ClipPair:
    data, rate = read_wav(path)
    if data.ndim != 2 or data.shape[1] != 2:
        n = 1 if data.ndim == 1 else data.shape[1]
        raise ChannelError(f"{path}: expected 2 channels, found {n}")
    if rate != SAMPLE_RATE:
        raise RateError(f"{path}: sample rate {rate} Hz, expected {SAMPLE_RATE} Hz")
    v = CHANNELS.index(vocal_channel)
    return ClipPair(
        vocal=Waveform(data[:, v], rate),
        accompaniment=Waveform(data[:, 1 - v], rate),
        clip_id=Path(path).stem,
    )


def truncate(clip: ClipPair, duration: float) -> ClipPair:
    n = int(round(duration * clip.vocal.sample_rate))
    if len(clip) < n:
        raise LengthError(
            f"{clip.clip_id}: {len(clip)} samples, need {n} for {duration} s"
        )
    if len(clip) == n:
        return clip
    rate = clip.vocal.sample_rate
    return ClipPair(
        Waveform(clip.vocal.samples[:n], rate),
        Waveform(clip.accompaniment.samples[:n], rate),
        clip.clip_id,
    )


def mix_equal(clip: ClipPair) -> Waveform:
    """Average the two stems (gain 0.5 each, so the mixture cannot clip)."""
    v, n = clip.vocal, clip.accompaniment
    if len(v) != len(n):
        raise ShapeError("stem lengths differ")
    return Waveform(0.5 * v.samples + 0.5 * n.samples, v.sample_rate)


def make_split(clip_ids: Sequence[str], n_train: int, seed: int,
               vocal_channel: str = "right") -> DatasetManifest:
    ids = sorted(clip_ids)
    if not 0 < n_train < len(ids):
        raise SplitError(f"n_train={n_train} must be in [1, {len(ids) - 1}] "
                         f"for {len(ids)} clips")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    return DatasetManifest(shuffled[:n_train], shuffled[n_train:], seed, vocal_channel)


def write_manifest(manifest: DatasetManifest, path) -> None:
    lines = [
        f"# seed={manifest.shuffle_seed}",
        f"# n_train={manifest.n_train}",
        f"# vocal_channel={manifest.vocal_channel}",
    ]
    lines += [f"{cid}\ttrain" for cid in manifest.train_ids]
    lines += [f"{cid}\ttest" for cid in manifest.test_ids]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> DatasetManifest:
    header: dict[str, str] = {}
    train, test = [], []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[1] not in ("train", "test"):
            raise FormatError(f"{path}:{lineno}: expected 'clip_id<TAB>train|test'")
        (train if parts[1] == "train" else test).append(parts[0])
    try:
        seed = int(header["seed"])
        n_train = int(header["n_train"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: header must record seed and n_train") from exc
    if n_train != len(train):
        raise FormatError(f"{path}: header n_train={n_train} but {len(train)} train rows")
    return DatasetManifest(train, test, seed, header.get("vocal_channel", "right"))


def write_wav(path, waveform: Waveform, float32: bool = False) -> int:
    """Write a mono WAV. 16-bit PCM unless ``float32``; returns clipped sample count."""
    x = waveform.samples
    if float32:
        wavfile.write(path, waveform.sample_rate, x.astype("<f4"))
        return 0
    scaled = np.round(x * 32768.0)
    clipped = int(np.count_nonzero((scaled > 32767) | (scaled < -32768)))
    pcm = np.clip(scaled, -32768, 32767).astype("<i2")
    wavfile.write(path, waveform.sample_rate, pcm)
    return clipped


def write_stereo_wav(path, left: np.ndarray, right: np.ndarray,
                     sample_rate: int = SAMPLE_RATE) -> None:
    pcm = np.clip(np.round(np.stack([left, right], axis=1) * 32768.0), -32768, 32767)
    wavfile.write(path, sample_rate, pcm.astype("<i2"))


def load_waveform(path) -> Waveform:
    data, rate = read_wav(path)
    if data.ndim != 1:
        raise ChannelError(f"{path}: expected mono, found {data.shape[1]} channels")
    return Waveform(data, rate)
