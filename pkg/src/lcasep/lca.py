"""Convolutional sparse inference with Locally Competitive Algorithm dynamics.

Atoms span the full channel and frequency extent of a sound image and
``patch_frames`` time frames; they are placed at every ``stride``-th frame
where the whole patch fits (valid convolution). The sparse code therefore has
shape ``(n_features, n_positions)`` with
``n_positions = (n_frames - patch_frames) // stride + 1``.

The membrane potentials follow

    u <- u + dt/tau * (b - u - (G - I) a),    a = soft_threshold(u, lam)

with ``b`` the correlation of the input with every atom at every position and
``G`` the convolutional Gram operator of the dictionary.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DivergenceError, FormatError, PreconditionError, ShapeError

NORM_TOL = 1e-6


@dataclass(frozen=True)
class LcaParams:
    lam: float = 0.625
    n_steps: int = 1000
    dt_over_tau: float = 0.05
    history: bool = False
    # "gram", "correlate" or "auto"; both compute the same lateral term
    method: str = "auto"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0 < self.dt_over_tau <= 1:
            raise ValueError("dt_over_tau must lie in (0, 1]")
        if self.method not in ("auto", "gram", "correlate"):
            raise ValueError(f"unknown lateral method {self.method!r}")


@dataclass
class Dictionary:
    """Bank of convolutional atoms, shape (n_features, channels, n_freq_bins, patch_frames)."""

    atoms: np.ndarray
    stride: int
    kind: str = ""

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=np.float64)
        if self.atoms.ndim != 4:
            raise ShapeError(f"atoms must be 4-D, got shape {self.atoms.shape}")
        if self.stride < 1:
            raise ShapeError("stride must be >= 1")

    @property
    def n_features(self) -> int:
        return self.atoms.shape[0]

    @property
    def channels(self) -> int:
        return self.atoms.shape[1]

    @property
    def n_freq_bins(self) -> int:
        return self.atoms.shape[2]

    @property
    def patch_frames(self) -> int:
        return self.atoms.shape[3]

    @property
    def patch_size(self) -> int:
        return int(np.prod(self.atoms.shape[1:]))

    @property
    def flat(self) -> np.ndarray:
        return self.atoms.reshape(self.n_features, -1)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.flat, axis=1)

    def is_unit_norm(self, tol: float = NORM_TOL) -> bool:
        return bool(np.all(np.abs(self.norms() - 1.0) < tol))

    def n_positions(self, n_frames: int) -> int:
        n = (n_frames - self.patch_frames) // self.stride + 1
        if n_frames < self.patch_frames:
            raise ShapeError(
                f"{n_frames} frames is shorter than a {self.patch_frames}-frame patch")
        return n

    def copy(self) -> "Dictionary":
        return Dictionary(self.atoms.copy(), self.stride, self.kind)


@dataclass
class SparseCode:
    a: np.ndarray
    stride: int
    patch_frames: int
    lam: float | None = None
    potentials: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_features(self) -> int:
        return self.a.shape[0]

    @property
    def n_positions(self) -> int:
        return self.a.shape[1]

    @property
    def geometry(self) -> tuple[int, int, int]:
        return self.stride, self.patch_frames, self.n_features


def input_gain(data, dictionary: Dictionary, patch_norm: float | None) -> float:
    """Gain that brings the RMS norm of one receptive-field patch to ``patch_norm``.

    ``None`` means no scaling (gain 1); all-zero data also gets gain 1.
    """
    if patch_norm is None:
        return 1.0
    rms = float(np.sqrt(np.mean(np.square(_data(data)))))
    if rms == 0:
        return 1.0
    return patch_norm / (rms * np.sqrt(dictionary.patch_size))


def soft_threshold(u, lam: float):
    u = np.asarray(u, dtype=np.float64)
    return np.sign(u) * np.maximum(np.abs(u) - lam, 0.0)


def _data(x) -> np.ndarray:
    data = getattr(x, "data", x)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 3:
        raise ShapeError(f"image data must be (channels, freq, frames), got {data.shape}")
    return data


def _check_image(dictionary: Dictionary, data: np.ndarray) -> None:
    if data.shape[-3:-1] != dictionary.atoms.shape[1:3]:
        raise ShapeError(
            f"image (channels, freq) {data.shape[-3:-1]} does not match "
            f"dictionary {dictionary.atoms.shape[1:3]}")


def _patches(dictionary: Dictionary, data: np.ndarray) -> np.ndarray:
    """Flattened patches at every position: (B, C, F, T) -> (B, n_pos, D)."""
    P, s = dictionary.patch_frames, dictionary.stride
    n_pos = dictionary.n_positions(data.shape[-1])
    win = np.lib.stride_tricks.sliding_window_view(data, P, axis=-1)[..., ::s, :][..., :n_pos, :]
    # (B, C, F, n_pos, P) -> (B, n_pos, C, F, P)
    return np.moveaxis(win, -2, 1).reshape(data.shape[0], n_pos, -1)


def correlate_batch(dictionary: Dictionary, data: np.ndarray) -> np.ndarray:
    """Inner product of every atom with every patch: (B, C, F, T) -> (B, K, n_pos)."""
    patches = _patches(dictionary, data)
    return np.matmul(dictionary.flat, patches.transpose(0, 2, 1))


def reconstruct_batch(dictionary: Dictionary, a: np.ndarray, n_frames: int) -> np.ndarray:
    """Transpose convolution: (B, K, n_pos) -> (B, C, F, n_frames)."""
    B, K, n_pos = a.shape
    if K != dictionary.n_features or n_pos != dictionary.n_positions(n_frames):
        raise ShapeError(f"code shape {(K, n_pos)} does not fit the dictionary geometry "
                         f"for {n_frames} frames")
    C, F, P = dictionary.atoms.shape[1:]
    s = dictionary.stride
    patches = np.matmul(a.transpose(0, 2, 1), dictionary.flat).reshape(B, n_pos, C, F, P)
    out = np.zeros((B, C, F, n_frames))
    starts = s * np.arange(n_pos)
    for j in range(P):
        # frame j of every placed patch; indices are distinct across positions
        out[:, :, :, starts + j] += patches[:, :, :, :, j].transpose(0, 2, 3, 1)
    return out


class GramOperator:
    """The lateral operator ``G`` as one (K, L*K) block matrix over L lags.

    ``(G a)[k, p] = sum_d sum_j G_d[k, j] a[j, p + d]`` where ``G_d`` is the
    overlap inner product of atom k with atom j shifted by ``d * stride``.
    """

    def __init__(self, dictionary: Dictionary):
        P, s = dictionary.patch_frames, dictionary.stride
        self.max_lag = (P - 1) // s
        atoms = dictionary.atoms
        K = dictionary.n_features
        blocks = {}
        for d in range(self.max_lag + 1):
            left = atoms[..., d * s:].reshape(K, -1)
            right = atoms[..., :P - d * s].reshape(K, -1)
            blocks[d] = left @ right.T
            blocks[-d] = blocks[d].T
        self.lags = list(range(-self.max_lag, self.max_lag + 1))
        self.stacked = np.concatenate([blocks[d] for d in self.lags], axis=1)

    def apply(self, a: np.ndarray) -> np.ndarray:
        """(B, K, n_pos) -> (B, K, n_pos)."""
        B, K, n_pos = a.shape
        shifted = np.zeros((len(self.lags), K, B, n_pos))
        a_t = a.transpose(1, 0, 2)
        for i, d in enumerate(self.lags):
            if d >= 0:
                shifted[i, :, :, :n_pos - d] = a_t[:, :, d:]
            else:
                shifted[i, :, :, -d:] = a_t[:, :, :n_pos + d]
        out = self.stacked @ shifted.reshape(len(self.lags) * K, B * n_pos)
        return out.reshape(K, B, n_pos).transpose(1, 0, 2)


def _choose_method(dictionary: Dictionary, method: str) -> str:
    if method != "auto":
        return method
    n_lags = 2 * ((dictionary.patch_frames - 1) // dictionary.stride) + 1
    return "gram" if n_lags * dictionary.n_features <= 2 * dictionary.patch_size else "correlate"


def lca_run(data: np.ndarray, dictionary: Dictionary, params: LcaParams,
            gram: GramOperator | None = None):
    """Integrate LCA on a batch ``(B, C, F, T)``.

    Returns ``(a, u, trace)`` with ``a`` and ``u`` of shape ``(B, K, n_pos)``
    and ``trace`` of shape ``(n_steps + 1, B)`` (``None`` unless
    ``params.history``). ``trace[t]`` is the energy of the code after ``t``
    steps.
    """
    if not dictionary.is_unit_norm():
        raise PreconditionError("LCA needs unit-norm atoms; max deviation "
                                f"{np.max(np.abs(dictionary.norms() - 1.0)):.3g}")
    _check_image(dictionary, data[0])
    lam, dt = params.lam, params.dt_over_tau
    T = data.shape[-1]
    b = correlate_batch(dictionary, data)
    method = _choose_method(dictionary, params.method)
    if method == "gram" and gram is None:
        gram = GramOperator(dictionary)
    half_sq = 0.5 * np.sum(data * data, axis=(1, 2, 3))

    def gram_times(a):
        if method == "gram":
            return gram.apply(a), None
        recon = reconstruct_batch(dictionary, a, T)
        return correlate_batch(dictionary, recon), recon

    def energy(a, ga, recon):
        l1 = lam * np.abs(a).sum(axis=(1, 2))
        if recon is not None:
            r = data - recon
            return 0.5 * np.sum(r * r, axis=(1, 2, 3)) + l1
        return half_sq - np.sum(a * b, axis=(1, 2)) + 0.5 * np.sum(a * ga, axis=(1, 2)) + l1

    u = np.zeros_like(b)
    trace = [] if params.history else None
    # overflow is reported as DivergenceError below, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(params.n_steps):
            a = soft_threshold(u, lam)
            if a.any():
                ga, recon = gram_times(a)
            else:
                ga = np.zeros_like(a)
                recon = np.zeros_like(data) if method == "correlate" else None
            if trace is not None:
                trace.append(energy(a, ga, recon))
            u += dt * (b - u - (ga - a))
            if not np.isfinite(u).all():
                raise DivergenceError("LCA potentials diverged; reduce dt_over_tau")
    a = soft_threshold(u, lam)
    if trace is not None:
        ga, recon = gram_times(a)
        trace.append(energy(a, ga, recon))
        trace = np.array(trace)
    return a, u, trace


def lca_encode(img, dictionary: Dictionary, params: LcaParams):
    """Sparse code of one image. Returns ``(SparseCode, energy_trace or None)``."""
    data = _data(img)[None]
    a, u, trace = lca_run(data, dictionary, params)
    code = SparseCode(a[0], dictionary.stride, dictionary.patch_frames, params.lam, u[0])
    return code, (None if trace is None else trace[:, 0])


def lca_encode_batch(images: Sequence, dictionary: Dictionary, params: LcaParams,
                     batch_size: int = 64):
    """Encode several same-shaped images, sharing the Gram operator."""
    method = _choose_method(dictionary, params.method)
    gram = GramOperator(dictionary) if method == "gram" else None
    codes, traces = [], []
    for start in range(0, len(images), batch_size):
        chunk = np.stack([_data(x) for x in images[start:start + batch_size]])
        a, u, trace = lca_run(chunk, dictionary, params, gram)
        for i in range(chunk.shape[0]):
            codes.append(SparseCode(a[i], dictionary.stride, dictionary.patch_frames,
                                    params.lam, u[i]))
            traces.append(None if trace is None else trace[:, i])
    return codes, traces


def reconstruct(dictionary: Dictionary, code: SparseCode,
                n_frames: int | None = None) -> np.ndarray:
    """Image data ``(C, F, n_frames)`` generated by ``code``.

    ``n_frames`` defaults to the smallest image the code geometry covers.
    """
    if code.stride != dictionary.stride or code.patch_frames != dictionary.patch_frames:
        raise ShapeError("code geometry does not match the dictionary")
    if n_frames is None:
        n_frames = (code.n_positions - 1) * code.stride + code.patch_frames
    return reconstruct_batch(dictionary, code.a[None], n_frames)[0]


def energy(img, dictionary: Dictionary, code: SparseCode, lam: float | None = None) -> float:
    """0.5 * ||I - Phi a||^2 + lam * ||a||_1."""
    data = _data(img)
    _check_image(dictionary, data)
    lam = code.lam if lam is None else lam
    if lam is None:
        raise ValueError("no threshold given and the code does not carry one")
    r = data - reconstruct(dictionary, code, data.shape[-1])
    return float(0.5 * np.sum(r * r) + lam * np.abs(code.a).sum())


def sparsity(code: SparseCode) -> float:
    return np.count_nonzero(code.a) / code.a.size


# -- persistence ---------------------------------------------------------------

CODE_MAGIC = b"SCOD"
CODE_VERSION = 1
_CODE_HEADER = struct.Struct("<4sHHIIIIIf32s")
_TRIPLET = np.dtype([("feature", "<u4"), ("position", "<u4"), ("value", "<f4")])


def save_code(code: SparseCode, path, tag: bytes = b"") -> None:
    """Sparse triplets (feature, position, value), sorted by position then feature."""
    pos, feat = np.nonzero(code.a.T)
    rec = np.empty(pos.size, dtype=_TRIPLET)
    rec["feature"], rec["position"] = feat, pos
    rec["value"] = code.a[feat, pos]
    header = _CODE_HEADER.pack(CODE_MAGIC, CODE_VERSION, 0, code.n_features, code.n_positions,
                               code.stride, code.patch_frames, pos.size,
                               np.nan if code.lam is None else code.lam,
                               tag[:32].ljust(32, b"\0"))
    Path(path).write_bytes(header + rec.tobytes())


def load_code(path) -> SparseCode:
    raw = Path(path).read_bytes()
    if len(raw) < _CODE_HEADER.size or raw[:4] != CODE_MAGIC:
        raise FormatError(f"{path}: not a sparse code file (bad magic)")
    _, version, _, K, n_pos, stride, P, nnz, lam, _ = _CODE_HEADER.unpack_from(raw)
    if version != CODE_VERSION:
        raise FormatError(f"{path}: unsupported code version {version}")
    body = raw[_CODE_HEADER.size:]
    if len(body) != nnz * _TRIPLET.itemsize:
        raise FormatError(f"{path}: payload does not match header")
    rec = np.frombuffer(body, dtype=_TRIPLET)
    if nnz and (rec["feature"].max() >= K or rec["position"].max() >= n_pos):
        raise FormatError(f"{path}: triplet index out of range")
    a = np.zeros((K, n_pos))
    a[rec["feature"], rec["position"]] = rec["value"]
    return SparseCode(a, stride, P, None if np.isnan(lam) else float(lam))
