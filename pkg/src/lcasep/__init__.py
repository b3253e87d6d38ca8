"""Monaural singing-voice separation by sparse coding of STFT sound images.

Sound images (phase-rich or magnitude-only spectrograms) are coded with the
Locally Competitive Algorithm against a convolutional dictionary learned by
Hebbian updates; linear readouts map each mixture code to vocal and
accompaniment images, and BSS-eval scores the resynthesized stems.
"""

from .audio_io import ClipPair, DatasetManifest, Waveform
from .bss_eval import SeparationScores, bss_eval, nsdr
from .config import RunConfig
from .dictionary import LearnParams, init_dictionary, train_dictionary
from .lca import Dictionary, LcaParams, SparseCode, energy, lca_encode, reconstruct
from .separation import ReadoutPair, StemEstimate, denoise_pass, separate, train_readouts
from .spectral import Kind, SoundImage, StftConfig, image_to_waveform, istft, stft

__version__ = "0.1.0"

__all__ = [
    "ClipPair", "DatasetManifest", "Dictionary", "Kind", "LcaParams", "LearnParams",
    "ReadoutPair", "RunConfig", "SeparationScores", "SoundImage", "SparseCode",
    "StemEstimate", "StftConfig", "Waveform", "bss_eval", "denoise_pass", "energy",
    "image_to_waveform", "init_dictionary", "istft", "lca_encode", "nsdr", "reconstruct",
    "separate", "stft", "train_dictionary", "train_readouts",
]
