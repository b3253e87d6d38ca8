"""Dictionary initialization, Hebbian learning with momentum, and dictionary files."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, FormatError, ShapeError
from .lca import Dictionary, LcaParams, SparseCode, _data, _patches, lca_encode, reconstruct


@dataclass(frozen=True)
class LearnParams:
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 4
    display_period: int | None = None  # overrides LcaParams.n_steps when set
    rng_seed: int = 0
    lr_decay: float = 0.5  # per-epoch multiplier
    # divide each atom's gradient by the number of positions where it fired
    normalize_dw: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class TrainReport:
    errors: list[float] = field(default_factory=list)
    sparsities: list[float] = field(default_factory=list)
    epoch_mean_error: list[float] = field(default_factory=list)
    epoch_mean_sparsity: list[float] = field(default_factory=list)


def normalize_atoms(atoms: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(atoms.reshape(atoms.shape[0], -1), axis=1)
    return atoms / norms.reshape((-1,) + (1,) * (atoms.ndim - 1))


def init_dictionary(n_features: int, channels: int, n_freq_bins: int, patch_frames: int,
                    stride: int, seed: int, kind: str = "") -> Dictionary:
    dims = (n_features, channels, n_freq_bins, patch_frames, stride)
    if min(dims) < 1:
        raise ShapeError(f"all dictionary dimensions must be >= 1, got {dims}")
    rng = np.random.default_rng(seed)
    atoms = rng.standard_normal((n_features, channels, n_freq_bins, patch_frames))
    return Dictionary(normalize_atoms(atoms), stride, kind)


def residual_gradient(dictionary: Dictionary, target, code: SparseCode,
                      normalize_dw: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Hebbian term: residual patches weighted by each atom's activity.

    Returns ``(gradient, active)``; ``gradient`` has the atom tensor's shape
    and ``active`` flags atoms with at least one nonzero coefficient.
    """
    data = _data(target)
    if code.a.shape != (dictionary.n_features, dictionary.n_positions(data.shape[-1])):
        raise ShapeError(f"code shape {code.a.shape} does not match dictionary and image")
    residual = data - reconstruct(dictionary, code, data.shape[-1])
    patches = _patches(dictionary, residual[None])[0]
    grad = code.a @ patches
    counts = np.count_nonzero(code.a, axis=1)
    if normalize_dw:
        grad /= np.maximum(counts, 1)[:, None]
    return grad.reshape(dictionary.atoms.shape), counts > 0


def hebbian_update(dictionary: Dictionary, img, code: SparseCode, params: LearnParams,
                   velocity: np.ndarray | None = None, learning_rate: float | None = None
                   ) -> tuple[Dictionary, np.ndarray]:
    """One momentum step on the atoms that were active in ``code``.

    Inactive atoms keep both their weights and their velocity, so the update
    is strictly local to the atoms that participated.
    """
    lr = params.learning_rate if learning_rate is None else learning_rate
    grad, active = residual_gradient(dictionary, img, code, params.normalize_dw)
    velocity = np.zeros_like(dictionary.atoms) if velocity is None else velocity.copy()
    atoms = dictionary.atoms.copy()
    if active.any():
        velocity[active] = params.momentum * velocity[active] + grad[active]
        atoms[active] = normalize_atoms(atoms[active] + lr * velocity[active])
    return Dictionary(atoms, dictionary.stride, dictionary.kind), velocity


def train_dictionary(images: Sequence, initial: Dictionary, learn: LearnParams,
                     lca: LcaParams) -> tuple[Dictionary, TrainReport]:
    """Sequential SGD: for each input, infer its code, then update the atoms.

    Inputs are visited in a fresh permutation every epoch, drawn from
    ``learn.rng_seed``; the learning rate is multiplied by ``lr_decay`` after
    each epoch.
    """
    if len(images) == 0:
        raise DataError("no training images")
    if learn.display_period is not None:
        lca = replace(lca, n_steps=learn.display_period)
    rng = np.random.default_rng(learn.rng_seed)
    dictionary = initial.copy()
    velocity = np.zeros_like(dictionary.atoms)
    report = TrainReport()
    for epoch in range(learn.epochs):
        lr = learn.learning_rate * learn.lr_decay ** epoch
        errs, sps = [], []
        for idx in rng.permutation(len(images)):
            data = _data(images[idx])
            code, _ = lca_encode(data, dictionary, lca)
            recon = reconstruct(dictionary, code, data.shape[-1])
            norm = np.linalg.norm(data)
            errs.append(float(np.linalg.norm(data - recon) / norm) if norm > 0 else 0.0)
            sps.append(np.count_nonzero(code.a) / code.a.size)
            dictionary, velocity = hebbian_update(dictionary, data, code, learn, velocity, lr)
        report.errors += errs
        report.sparsities += sps
        report.epoch_mean_error.append(float(np.mean(errs)))
        report.epoch_mean_sparsity.append(float(np.mean(sps)))
    return dictionary, report


def match_atoms(reference: np.ndarray, learned: np.ndarray) -> np.ndarray:
    """Greedy max-|correlation| assignment of reference atoms to learned atoms.

    Returns the matched |correlation| for every reference atom (0 if the
    learned set ran out).
    """
    ref = reference.reshape(reference.shape[0], -1)
    lrn = learned.reshape(learned.shape[0], -1)
    ref = ref / np.linalg.norm(ref, axis=1, keepdims=True)
    lrn = lrn / np.linalg.norm(lrn, axis=1, keepdims=True)
    corr = np.abs(ref @ lrn.T)
    result = np.zeros(ref.shape[0])
    for _ in range(min(corr.shape)):
        i, j = np.unravel_index(np.argmax(corr), corr.shape)
        result[i] = corr[i, j]
        corr[i, :] = -1.0
        corr[:, j] = -1.0
    return result


# -- persistence ---------------------------------------------------------------

DICT_MAGIC = b"LDIC"
DICT_VERSION = 1
ROLES = ("coding", "vocal", "accomp")
_DICT_HEADER = struct.Struct("<4sHHIIIII16s32s")


def save_dictionary(dictionary: Dictionary, path, role: str = "coding", tag: bytes = b"") -> None:
    K, C, F, P = dictionary.atoms.shape
    header = _DICT_HEADER.pack(DICT_MAGIC, DICT_VERSION, ROLES.index(role), K, C, F, P,
                               dictionary.stride, dictionary.kind.encode()[:16].ljust(16, b"\0"),
                               tag[:32].ljust(32, b"\0"))
    Path(path).write_bytes(header + np.ascontiguousarray(dictionary.atoms, dtype="<f4").tobytes())


def load_dictionary(path) -> tuple[Dictionary, str, bytes]:
    """Returns ``(dictionary, role, tag)``."""
    raw = Path(path).read_bytes()
    if len(raw) < _DICT_HEADER.size or raw[:4] != DICT_MAGIC:
        raise FormatError(f"{path}: not a dictionary file (bad magic)")
    _, version, role, K, C, F, P, stride, kind, tag = _DICT_HEADER.unpack_from(raw)
    if version != DICT_VERSION:
        raise FormatError(f"{path}: unsupported dictionary version {version}")
    if role >= len(ROLES):
        raise FormatError(f"{path}: unknown role code {role}")
    body = raw[_DICT_HEADER.size:]
    if len(body) != 4 * K * C * F * P:
        raise FormatError(f"{path}: payload does not match header")
    atoms = np.frombuffer(body, dtype="<f4").reshape(K, C, F, P).astype(np.float64)
    return Dictionary(atoms, stride, kind.rstrip(b"\0").decode()), ROLES[role], tag
