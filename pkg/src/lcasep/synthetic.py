"""Synthetic stand-ins for the data the pipeline expects.

``write_dataset`` produces MIR-1K style stereo clips (accompaniment left,
voice right) of a sung melody over chords, bass and drums. The planted
generators build small problems whose ground truth is known exactly, for
checking dictionary learning and readout training.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio_io import SAMPLE_RATE, write_stereo_wav
from .dictionary import normalize_atoms
from .lca import Dictionary, LcaParams, SparseCode, lca_encode_batch, reconstruct

NYQUIST = SAMPLE_RATE / 2


def _midi_hz(m):
    return 440.0 * 2.0 ** ((np.asarray(m) - 69) / 12)


def _harmonic(f0: np.ndarray, amps_fn, sr: int, max_h: int = 40) -> np.ndarray:
    """Additive tone following the instantaneous pitch ``f0`` (per sample)."""
    phase = 2 * np.pi * np.cumsum(f0) / sr
    out = np.zeros_like(f0)
    for h in range(1, max_h + 1):
        fh = h * f0
        amp = amps_fn(h, fh) * (fh < NYQUIST * 0.95)
        if not np.any(amp):
            break
        out += amp * np.sin(h * phase)
    return out


def _adsr(n: int, sr: int, attack=0.02, release=0.05) -> np.ndarray:
    env = np.ones(n)
    a, r = min(int(attack * sr), n // 2), min(int(release * sr), n // 2)
    if a:
        env[:a] = np.linspace(0, 1, a)
    if r:
        env[n - r:] *= np.linspace(1, 0, r)
    return env


def synth_vocal(rng: np.random.Generator, n: int, sr: int = SAMPLE_RATE) -> np.ndarray:
    out = np.zeros(n)
    t = 0
    base = rng.integers(55, 67)
    while t < n:
        t += int(rng.uniform(0.0, 0.12) * sr)
        length = int(rng.uniform(0.2, 0.6) * sr)
        length = min(length, n - t)
        if length < int(0.05 * sr):
            break
        pitch = base + rng.choice([-5, -3, -2, 0, 2, 4, 5, 7])
        tt = np.arange(length) / sr
        vib = 1 + rng.uniform(0.005, 0.015) * np.sin(2 * np.pi * rng.uniform(5, 6.5) * tt)
        glide = 1 + 0.02 * np.exp(-tt / 0.03) * rng.choice([-1, 1])
        f0 = _midi_hz(pitch) * vib * glide
        formants = rng.uniform([500, 1000, 2400], [900, 1900, 3200])

        def amps(h, fh, formants=formants):
            env = sum(np.exp(-0.5 * ((fh - f) / 150.0) ** 2) for f in formants)
            return (0.3 + 2.0 * env) / h

        note = _harmonic(f0, amps, sr) * _adsr(length, sr, 0.03, 0.08)
        out[t:t + length] += note
        t += length
    return out


def synth_accompaniment(rng: np.random.Generator, n: int, sr: int = SAMPLE_RATE) -> np.ndarray:
    out = np.zeros(n)
    root = rng.integers(45, 53)
    t = 0
    while t < n:
        length = min(int(rng.uniform(0.5, 1.0) * sr), n - t)
        chord_root = root + rng.choice([0, 5, 7, 9, -3])
        quality = [0, 4, 7] if rng.random() < 0.6 else [0, 3, 7]
        tt = np.arange(length) / sr
        decay = np.exp(-tt / rng.uniform(0.4, 0.9))
        for iv in quality:
            f0 = np.full(length, _midi_hz(chord_root + 12 + iv))
            out[t:t + length] += 0.5 * _harmonic(
                f0, lambda h, fh: 1.0 / h ** 1.5, sr) * decay * _adsr(length, sr, 0.005, 0.03)
        f0 = np.full(length, _midi_hz(chord_root - 12))
        out[t:t + length] += 0.8 * _harmonic(
            f0, lambda h, fh: 1.0 / h ** 2, sr) * _adsr(length, sr, 0.01, 0.03)
        t += length
    beat = int(sr * 60 / rng.uniform(90, 130))
    for start in range(int(rng.uniform(0, 0.2) * sr), n, beat):
        m = min(int(0.12 * sr), n - start)
        tt = np.arange(m) / sr
        kick = np.sin(2 * np.pi * np.cumsum(60 + 80 * np.exp(-tt / 0.02)) / sr)
        out[start:start + m] += 1.2 * kick * np.exp(-tt / 0.05)
        hstart = start + beat // 2
        if hstart < n:
            hm = min(int(0.05 * sr), n - hstart)
            noise = np.diff(rng.standard_normal(hm + 1))
            out[hstart:hstart + hm] += 0.15 * noise * np.exp(-np.arange(hm) / (0.01 * sr))
    return out


def synth_clip(rng: np.random.Generator, duration: float, sr: int = SAMPLE_RATE,
               rms: float = 0.08) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``(vocal, accompaniment)``, each scaled to the given RMS."""
    n = int(round(duration * sr))
    vocal = synth_vocal(rng, n, sr)
    accomp = synth_accompaniment(rng, n, sr)
    stems = []
    for x in (vocal, accomp):
        level = np.sqrt(np.mean(x * x))
        stems.append(x * (rms / level) if level > 0 else x)
    peak = max(np.abs(s).max() for s in stems)
    if peak > 0.99:
        stems = [s * (0.99 / peak) for s in stems]
    return stems[0], stems[1]


def write_dataset(root, n_clips: int, seed: int = 0, min_duration: float = 2.5,
                  max_duration: float = 4.0) -> list[str]:
    """Write ``n_clips`` stereo WAVs (left accompaniment, right voice); returns clip ids."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    ids = []
    for i in range(n_clips):
        cid = f"synth_{i:04d}"
        vocal, accomp = synth_clip(rng, rng.uniform(min_duration, max_duration))
        write_stereo_wav(root / f"{cid}.wav", left=accomp, right=vocal)
        ids.append(cid)
    return ids


def planted_dictionary_data(seed: int, n_images: int = 400, n_atoms: int = 16,
                            n_freq: int = 16, patch_frames: int = 4, n_frames: int = 32,
                            n_active: int = 3, noise: float = 0.01):
    """Images built from a hidden dictionary (non-overlapping placements).

    Every position gets ``n_active`` atoms with coefficients in [1, 2], then
    Gaussian noise at ``noise`` times the image RMS. Returns
    ``(planted_dictionary, images)``.
    """
    rng = np.random.default_rng(seed)
    planted = Dictionary(
        normalize_atoms(rng.standard_normal((n_atoms, 1, n_freq, patch_frames))), patch_frames)
    n_pos = planted.n_positions(n_frames)
    images = []
    for _ in range(n_images):
        a = np.zeros((n_atoms, n_pos))
        for p in range(n_pos):
            idx = rng.choice(n_atoms, n_active, replace=False)
            a[idx, p] = rng.uniform(1, 2, n_active)
        x = reconstruct(planted, SparseCode(a, patch_frames, patch_frames), n_frames)
        x += noise * np.sqrt(np.mean(x * x)) * rng.standard_normal(x.shape)
        images.append(x)
    return planted, images


def planted_separation_toy(seed: int, n_clips: int = 30, n_atoms: int = 8, n_freq: int = 12,
                           patch_frames: int = 4, stride: int = 2, n_frames: int = 20,
                           gain_spread: float = 0.0, lca: LcaParams | None = None):
    """Two-source toy where exact linear readouts exist.

    Half of a random unit-norm dictionary belongs to each source. Mixtures
    are sparse combinations of all atoms; targets are the planted linear maps
    ``A_vocal`` / ``A_accomp`` applied to the *inferred* LCA code of each
    mixture, so a zero-error readout exists by construction. The maps are the
    dictionary restricted to each source's atoms, each atom scaled by a gain
    drawn from ``1 +- gain_spread``.

    Returns a dict with keys ``dictionary``, ``mixes``, ``vocals``,
    ``accomps``, ``A_vocal``, ``A_accomp``, ``codes``, ``vocal_atoms``, ``lca``.
    """
    rng = np.random.default_rng(seed)
    lca = lca or LcaParams(lam=0.05, n_steps=400, dt_over_tau=0.1)
    d = Dictionary(normalize_atoms(rng.standard_normal((n_atoms, 1, n_freq, patch_frames))),
                   stride)
    vocal_atoms = np.arange(n_atoms) < n_atoms // 2
    gains = rng.uniform(1 - gain_spread, 1 + gain_spread, n_atoms)[:, None, None, None]
    A_v = d.atoms * gains * vocal_atoms[:, None, None, None]
    A_a = d.atoms * gains * (~vocal_atoms)[:, None, None, None]
    n_pos = d.n_positions(n_frames)
    mixes = []
    for _ in range(n_clips):
        a = np.zeros((n_atoms, n_pos))
        mask = rng.random(a.shape) < 0.25
        a[mask] = rng.uniform(0.5, 1.5, mask.sum())
        mixes.append(reconstruct(d, SparseCode(a, stride, patch_frames), n_frames))
    codes, _ = lca_encode_batch(mixes, d, lca)
    vocals = [reconstruct(Dictionary(A_v, stride), c, n_frames) for c in codes]
    accomps = [reconstruct(Dictionary(A_a, stride), c, n_frames) for c in codes]
    return dict(dictionary=d, mixes=mixes, vocals=vocals, accomps=accomps, A_vocal=A_v,
                A_accomp=A_a, codes=codes, vocal_atoms=vocal_atoms, lca=lca)
