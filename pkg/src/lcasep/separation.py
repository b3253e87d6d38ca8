"""Linear readouts from a mixture's sparse code to each source's sound image.

Two readout banks share the coding dictionary's convolutional geometry and
start as copies of its atoms. Training keeps the mixture codes fixed and
fits each bank to its source image by momentum SGD on

    0.5 * ||V - Phi_vocal * a||^2 + 0.5 * ||N - Phi_accomp * a||^2

Readout atoms are never renormalized: they carry source amplitude.

Before coding, images are scaled so that one receptive-field patch has RMS
norm ``patch_norm`` (the mixture's gain is applied to all three images of a
clip); estimates are scaled back afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .audio_io import Waveform, mix_equal, ClipPair
from .dictionary import residual_gradient
from .errors import RepresentationError, ShapeError, UsageError
from .lca import (Dictionary, LcaParams, SparseCode, _data, input_gain, lca_encode_batch,
                  reconstruct)
from .spectral import (Kind, SoundImage, StftConfig, image_to_waveform, negative_count,
                       stft, to_sound_image)

PASSES = ("single", "denoised")


@dataclass
class ReadoutPair:
    phi_vocal: np.ndarray
    phi_accomp: np.ndarray
    stride: int
    kind: str = ""
    updates: int = 0

    @classmethod
    def from_dictionary(cls, dictionary: Dictionary) -> "ReadoutPair":
        return cls(dictionary.atoms.copy(), dictionary.atoms.copy(), dictionary.stride,
                   dictionary.kind)

    def bank(self, source: str) -> Dictionary:
        atoms = {"vocal": self.phi_vocal, "accomp": self.phi_accomp}[source]
        return Dictionary(atoms, self.stride, self.kind)

    def check_geometry(self, dictionary: Dictionary) -> None:
        for phi in (self.phi_vocal, self.phi_accomp):
            if phi.shape != dictionary.atoms.shape or self.stride != dictionary.stride:
                raise ShapeError("readout geometry differs from the coding dictionary")
            if not np.all(np.isfinite(phi)):
                raise ValueError("readout atoms contain NaN or Inf")

    def is_untrained(self, dictionary: Dictionary) -> bool:
        return (self.updates == 0
                and np.array_equal(self.phi_vocal, dictionary.atoms)
                and np.array_equal(self.phi_accomp, dictionary.atoms))


@dataclass
class StemEstimate:
    vocal: Waveform
    accompaniment: Waveform
    clip_id: str
    condition: str
    pass_: str = "single"
    clamped: int = 0
    # ||(V + N) - M|| / ||M|| in image space, diagnostic only
    sum_error: float = float("nan")

    def __post_init__(self):
        if len(self.vocal) != len(self.accompaniment):
            raise ShapeError("stem lengths differ")
        if self.pass_ not in PASSES:
            raise ValueError(f"pass must be one of {PASSES}")


def _check_kind(images: Sequence, dictionary: Dictionary) -> None:
    for img in images:
        kind = getattr(img, "kind", None)
        if kind is not None and dictionary.kind and Kind(kind).value != dictionary.kind:
            raise RepresentationError(
                f"{Kind(kind).value} image given to a {dictionary.kind} dictionary")


def clip_images(clip: ClipPair, kind: Kind) -> tuple[SoundImage, SoundImage, SoundImage]:
    """Mixture image plus each stem's contribution to the equal mixture."""
    kind = Kind(kind)
    cfg = StftConfig.for_kind(kind, len(clip))
    mix = mix_equal(clip)
    half = lambda w: Waveform(0.5 * w.samples, w.sample_rate)  # noqa: E731
    return tuple(to_sound_image(stft(w, cfg), kind)
                 for w in (mix, half(clip.vocal), half(clip.accompaniment)))


def train_readouts(mix_images: Sequence, vocal_images: Sequence, accomp_images: Sequence,
                   dictionary: Dictionary, lca: LcaParams, epochs: int = 40,
                   learning_rate: float = 0.01, momentum: float = 0.9, seed: int = 0,
                   patch_norm: float | None = None, normalize_dw: bool = True,
                   codes: Sequence[SparseCode] | None = None) -> ReadoutPair:
    """Fit both readout banks with the mixture codes held fixed.

    ``codes`` may be passed to skip inference (they must be the codes of the
    scaled mixtures under ``dictionary`` and ``lca``).
    """
    n = len(mix_images)
    if not n == len(vocal_images) == len(accomp_images):
        raise ShapeError("mixture and target image counts differ")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    _check_kind(list(mix_images) + list(vocal_images) + list(accomp_images), dictionary)
    mixes, targets = [], []
    for m, v, a in zip(mix_images, vocal_images, accomp_images):
        m, v, a = _data(m), _data(v), _data(a)
        gain = input_gain(m, dictionary, patch_norm)
        mixes.append(m * gain)
        targets.append((v * gain, a * gain))
    if codes is None:
        codes, _ = lca_encode_batch(mixes, dictionary, lca)
    readouts = ReadoutPair.from_dictionary(dictionary)
    banks = {"vocal": readouts.phi_vocal, "accomp": readouts.phi_accomp}
    velocity = {s: np.zeros_like(dictionary.atoms) for s in banks}
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for i in rng.permutation(n):
            for s, target in zip(banks, targets[i]):
                phi = banks[s]
                grad, active = residual_gradient(Dictionary(phi, dictionary.stride), target,
                                                 codes[i], normalize_dw)
                if not active.any():
                    continue
                velocity[s][active] = momentum * velocity[s][active] + grad[active]
                phi[active] += learning_rate * velocity[s][active]
            readouts.updates += 1
    if not all(np.isfinite(b).all() for b in banks.values()):
        raise FloatingPointError("readout training diverged; lower the learning rate")
    return readouts


def _encode_scaled(images: Sequence[np.ndarray], dictionary: Dictionary, lca: LcaParams,
                   patch_norm: float | None):
    gains = [input_gain(x, dictionary, patch_norm) for x in images]
    codes, _ = lca_encode_batch([x * g for x, g in zip(images, gains)], dictionary, lca)
    return codes, gains


def separate_many(mixes: Sequence[Waveform], clip_ids: Sequence[str], kind: Kind,
                  dictionary: Dictionary, readouts: ReadoutPair, lca: LcaParams,
                  condition: str | None = None, patch_norm: float | None = None
                  ) -> list[StemEstimate]:
    kind = Kind(kind)
    if dictionary.kind and dictionary.kind != kind.value:
        raise RepresentationError(f"{kind.value} separation with a {dictionary.kind} dictionary")
    readouts.check_geometry(dictionary)
    if readouts.is_untrained(dictionary):
        raise UsageError("readouts are untrained (identical to the coding dictionary)")
    specs = [stft(m, StftConfig.for_kind(kind, len(m))) for m in mixes]
    images = [to_sound_image(s, kind) for s in specs]
    codes, gains = _encode_scaled([im.data for im in images], dictionary, lca, patch_norm)
    out = []
    for cid, spec, img, code, gain in zip(clip_ids, specs, images, codes, gains):
        est_v = img.with_data(reconstruct(readouts.bank("vocal"), code, img.shape[-1]) / gain)
        est_a = img.with_data(reconstruct(readouts.bank("accomp"), code, img.shape[-1]) / gain)
        m_norm = np.linalg.norm(img.data)
        sum_err = (float(np.linalg.norm(est_v.data + est_a.data - img.data) / m_norm)
                   if m_norm > 0 else 0.0)
        out.append(StemEstimate(
            image_to_waveform(est_v, spec), image_to_waveform(est_a, spec), cid,
            condition or kind.value, "single",
            negative_count(est_v) + negative_count(est_a), sum_err))
    return out


def separate(mix: Waveform, kind: Kind, dictionary: Dictionary, readouts: ReadoutPair,
             lca: LcaParams, clip_id: str = "", condition: str | None = None,
             patch_norm: float | None = None) -> StemEstimate:
    return separate_many([mix], [clip_id], kind, dictionary, readouts, lca, condition,
                         patch_norm)[0]


def denoise_many(estimates: Sequence[StemEstimate], kind: Kind, dictionary: Dictionary,
                 readouts: ReadoutPair, lca: LcaParams, patch_norm: float | None = None
                 ) -> list[StemEstimate]:
    """Re-code each separated stem and read it out through its own bank only."""
    kind = Kind(kind)
    for est in estimates:
        if est.pass_ != "single":
            raise UsageError(f"{est.clip_id}: stems were already denoised")
    readouts.check_geometry(dictionary)
    stems = [w for est in estimates for w in (est.vocal, est.accompaniment)]
    specs = [stft(w, StftConfig.for_kind(kind, len(w))) for w in stems]
    images = [to_sound_image(s, kind) for s in specs]
    codes, gains = _encode_scaled([im.data for im in images], dictionary, lca, patch_norm)
    out = []
    for i, est in enumerate(estimates):
        waves, clamped = [], 0
        for j, source in enumerate(("vocal", "accomp")):
            k = 2 * i + j
            img = images[k]
            recon = img.with_data(reconstruct(readouts.bank(source), codes[k], img.shape[-1])
                                  / gains[k])
            clamped += negative_count(recon)
            waves.append(image_to_waveform(recon, specs[k]))
        out.append(StemEstimate(waves[0], waves[1], est.clip_id, est.condition, "denoised",
                                clamped))
    return out


def denoise_pass(est: StemEstimate, kind: Kind, dictionary: Dictionary, readouts: ReadoutPair,
                 lca: LcaParams, patch_norm: float | None = None) -> StemEstimate:
    return denoise_many([est], kind, dictionary, readouts, lca, patch_norm)[0]
