"""Threshold sweep and the four-condition separation comparison.

Everything here runs in memory on already-loaded clips; the command-line
stages in :mod:`lcasep.cli` reuse these pieces with files in between.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio_io import ClipPair, mix_equal
from .bss_eval import (METRICS, SOURCES, ClipScores, MetricSet, SeparationScores, aggregate,
                       score_clip)
from .dictionary import LearnParams, TrainReport, init_dictionary, train_dictionary
from .lca import Dictionary, LcaParams, input_gain, lca_encode_batch, reconstruct_batch
from .separation import (ReadoutPair, StemEstimate, clip_images, denoise_many, separate_many,
                         train_readouts)
from .spectral import CONDITIONS, Kind, StftConfig

DEFAULT_LAMBDAS = (0.3, 0.4, 0.5, 0.625, 0.75, 1.0)
TABLE_CONDITIONS = ("Phase", "NoPhase", "NoPhaseX2", "Denoised")

# Reference values from the published results table (vocal GSIR, GSAR, GNSDR
# as mean, spread). Full-scale targets only; desk runs are not expected to
# reach them.
REFERENCE_TABLE = {
    "Phase": {"GSIR": (12.12, 9.12), "GSAR": (-3.51, 5.92), "GNSDR": (1.49, 3.02)},
    "NoPhase": {"GSIR": (12.76, 12.07), "GSAR": (-9.72, 4.36), "GNSDR": (1.35, 4.01)},
    "NoPhaseX2": {"GSIR": (14.84, 13.26), "GSAR": (-10.95, 4.50), "GNSDR": (1.86, 3.88)},
    "Denoised": {"GSIR": (19.46, 8.61), "GSAR": (2.88, 5.54), "GNSDR": (5.21, 2.77)},
}
REFERENCE_SPARSITY = 0.028
REFERENCE_LAMBDA = 0.625


@dataclass(frozen=True)
class SweepPoint:
    lam: float
    mean_sparsity: float
    denoise_error: float


@dataclass(frozen=True)
class PipelineSettings:
    n_features: int = 8192
    stride: int = 2
    patch_ms: float = 128.0
    lca: LcaParams = LcaParams()
    learn: LearnParams = LearnParams()
    readout_epochs: int = 40
    # momentum SGD on the readouts is unstable at the dictionary's rate once
    # codes get dense (many co-active overlapping atoms)
    readout_lr: float = 0.001
    # RMS norm of one receptive-field patch after input scaling
    patch_norm: float = 16.0
    seed: int = 0

    def patch_frames(self, kind: Kind) -> int:
        cfg = StftConfig.for_kind(kind)
        return max(1, int(round(self.patch_ms / 1000 * cfg.sample_rate / cfg.hop)))


DESK = PipelineSettings(n_features=512, lca=LcaParams(n_steps=200),
                        learn=LearnParams(epochs=1))
FULL_SCALE = PipelineSettings()


@dataclass
class ConditionResult:
    condition: str
    scores: SeparationScores
    estimates: list[StemEstimate]
    derived_from: str = ""
    dictionary: Dictionary | None = field(default=None, repr=False)
    readouts: ReadoutPair | None = field(default=None, repr=False)
    report: TrainReport | None = field(default=None, repr=False)


def add_noise(images: Sequence[np.ndarray], noise_rel: float, seed: int) -> list[np.ndarray]:
    """i.i.d. Gaussian noise with std ``noise_rel`` times each image's RMS."""
    rng = np.random.default_rng(seed)
    out = []
    for x in images:
        rms = np.sqrt(np.mean(x * x))
        out.append(x + noise_rel * rms * rng.standard_normal(x.shape))
    return out


def sweep_fixed(dictionary: Dictionary, clean_images: Sequence, lambdas: Sequence[float],
                lca: LcaParams, noise_rel: float = 0.1, seed: int = 0) -> list[SweepPoint]:
    """Denoising error and sparsity of one dictionary at each threshold."""
    clean = [np.asarray(getattr(x, "data", x), dtype=np.float64) for x in clean_images]
    noisy = add_noise(clean, noise_rel, seed)
    stacked = np.stack(noisy)
    points = []
    for lam in lambdas:
        codes, _ = lca_encode_batch(noisy, dictionary, replace(lca, lam=lam))
        a = np.stack([c.a for c in codes])
        recon = reconstruct_batch(dictionary, a, stacked.shape[-1])
        errs = [np.linalg.norm(c - r) / np.linalg.norm(c) for c, r in zip(clean, recon)]
        spars = [np.count_nonzero(c.a) / c.a.size for c in codes]
        points.append(SweepPoint(float(lam), float(np.mean(spars)), float(np.mean(errs))))
    return points


def threshold_sweep(clean_images: Sequence, lambdas: Sequence[float], lca: LcaParams,
                    learn: LearnParams, n_features: int, patch_frames: int, stride: int,
                    noise_rel: float = 0.1, seed: int = 0,
                    dictionary: Dictionary | None = None) -> list[SweepPoint]:
    """Train a dictionary at each threshold (unless one is given), then denoise."""
    if not lambdas or min(lambdas) <= 0:
        raise ValueError("lambdas must be a non-empty list of positive values")
    if dictionary is not None:
        return sweep_fixed(dictionary, clean_images, lambdas, lca, noise_rel, seed)
    clean = [np.asarray(getattr(x, "data", x), dtype=np.float64) for x in clean_images]
    C, F = clean[0].shape[:2]
    points = []
    for lam in lambdas:
        params = replace(lca, lam=lam)
        init = init_dictionary(n_features, C, F, patch_frames, stride, seed)
        learned, _ = train_dictionary(clean, init, learn, params)
        points += sweep_fixed(learned, clean, [lam], params, noise_rel, seed)
    return points


def train_coding_dictionary(kind: Kind, mix_images: Sequence, settings: PipelineSettings
                            ) -> tuple[Dictionary, TrainReport]:
    """Random-init a dictionary for ``kind`` and learn it on the (scaled) mixtures."""
    kind = Kind(kind)
    P = settings.patch_frames(kind)
    init = init_dictionary(settings.n_features, kind.channels, kind.fft_size // 2, P,
                           settings.stride, settings.seed, kind.value)
    mixes = []
    for m in mix_images:
        m = np.asarray(getattr(m, "data", m), dtype=np.float64)
        mixes.append(m * input_gain(m, init, settings.patch_norm))
    learn = replace(settings.learn, rng_seed=settings.seed)
    return train_dictionary(mixes, init, learn, settings.lca)


def fit_readouts(triples: Sequence, dictionary: Dictionary, settings: PipelineSettings
                 ) -> ReadoutPair:
    """Train readouts on ``(mixture, vocal, accomp)`` image triples."""
    return train_readouts(
        [t[0] for t in triples], [t[1] for t in triples], [t[2] for t in triples],
        dictionary, settings.lca, epochs=settings.readout_epochs,
        learning_rate=settings.readout_lr, momentum=settings.learn.momentum,
        seed=settings.seed, patch_norm=settings.patch_norm,
        normalize_dw=settings.learn.normalize_dw)


def train_condition(kind: Kind, train_clips: Sequence[ClipPair], settings: PipelineSettings
                    ) -> tuple[Dictionary, ReadoutPair, TrainReport]:
    triples = [clip_images(c, kind) for c in train_clips]
    dictionary, report = train_coding_dictionary(kind, [t[0] for t in triples], settings)
    return dictionary, fit_readouts(triples, dictionary, settings), report


def score_estimates(estimates: Sequence[StemEstimate], clips: Sequence[ClipPair]
                    ) -> SeparationScores:
    by_id = {c.clip_id: c for c in clips}
    per_clip = []
    for est in estimates:
        clip = by_id[est.clip_id]
        per_clip.append(score_clip(est.clip_id, est.vocal, est.accompaniment, clip.vocal,
                                   clip.accompaniment, mix_equal(clip)))
    return aggregate(per_clip)


def run_condition(condition: str, train_clips: Sequence[ClipPair],
                  test_clips: Sequence[ClipPair], settings: PipelineSettings,
                  phase_result: ConditionResult | None = None) -> ConditionResult:
    """Train, separate and score one condition.

    ``Denoised`` re-codes the stems of an existing ``Phase`` result (trained
    from scratch first when ``phase_result`` is not given).
    """
    kind = CONDITIONS[condition]
    if condition == "Denoised":
        if phase_result is None:
            phase_result = run_condition("Phase", train_clips, test_clips, settings)
        if phase_result.condition != "Phase":
            raise ValueError("the denoise pass consumes Phase stems")
        estimates = denoise_many(phase_result.estimates, kind, phase_result.dictionary,
                                 phase_result.readouts, settings.lca, settings.patch_norm)
        return ConditionResult(condition, score_estimates(estimates, test_clips), estimates,
                               "Phase", phase_result.dictionary, phase_result.readouts)
    dictionary, readouts, report = train_condition(kind, train_clips, settings)
    estimates = separate_many([mix_equal(c) for c in test_clips],
                              [c.clip_id for c in test_clips], kind, dictionary, readouts,
                              settings.lca, condition, settings.patch_norm)
    return ConditionResult(condition, score_estimates(estimates, test_clips), estimates, "",
                           dictionary, readouts, report)


def run_all(train_clips: Sequence[ClipPair], test_clips: Sequence[ClipPair],
            settings: PipelineSettings, conditions: Sequence[str] = TABLE_CONDITIONS
            ) -> dict[str, ConditionResult]:
    results: dict[str, ConditionResult] = {}
    for cond in conditions:
        if cond == "Denoised":
            results[cond] = run_condition(cond, train_clips, test_clips, settings,
                                          results.get("Phase"))
        else:
            results[cond] = run_condition(cond, train_clips, test_clips, settings)
    return results


# -- outputs -------------------------------------------------------------------

SCORE_COLUMNS = ["condition", "clip_id"] + [
    f"{m}_{s[0]}" for s in SOURCES for m in METRICS]
AGGREGATE_ID = "__aggregate__"


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def scores_csv_text(scores: dict[str, SeparationScores], comment: str = "") -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_COLUMNS)
    for cond, sc in scores.items():
        for c in sc.clips:
            w.writerow([cond, c.clip_id] + [_fmt(v) for v in c.vocal.as_tuple()]
                       + [_fmt(v) for v in c.accomp.as_tuple()])
        w.writerow([cond, AGGREGATE_ID] + [_fmt(sc.means[s, m]) for s in SOURCES
                                           for m in METRICS])
    return buf.getvalue()


def read_scores_csv(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def scores_from_rows(rows: Sequence[dict], length: int) -> dict[str, SeparationScores]:
    """Rebuild per-condition scores from CSV rows (all clips ``length`` samples)."""
    per_cond: dict[str, list[ClipScores]] = {}
    for row in rows:
        if row["clip_id"] == AGGREGATE_ID:
            continue
        sets = [MetricSet(*(float(row[f"{m}_{s[0]}"]) for m in METRICS)) for s in SOURCES]
        per_cond.setdefault(row["condition"], []).append(
            ClipScores(row["clip_id"], length, *sets))
    return {cond: aggregate(clips) for cond, clips in per_cond.items()}


def sweep_csv_text(points: Sequence[SweepPoint], comment: str = "") -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda", "mean_sparsity", "denoise_error"])
    for p in points:
        w.writerow([_fmt(p.lam), _fmt(p.mean_sparsity), _fmt(p.denoise_error)])
    return buf.getvalue()


def aggregate_text(scores: dict[str, SeparationScores], comment: str = "") -> str:
    """One JSON-style record per (condition, source, metric)."""
    import json

    lines = [f"# {comment}"] if comment else []
    for cond, sc in scores.items():
        for s in SOURCES:
            for m in METRICS:
                lines.append(json.dumps({
                    "condition": cond, "source": s, "metric": "G" + m.upper(),
                    "value": round(sc.means[s, m], 6), "spread": round(sc.spreads[s, m], 6),
                }, sort_keys=True))
    return "\n".join(lines) + "\n"


def table_text(scores: dict[str, SeparationScores], source: str = "vocal") -> str:
    """Results table in the published layout; vocal rows carry the reference numbers."""
    rows = [f"{'Run':<11}{'GSIR':>18}{'GSAR':>18}{'GNSDR':>18}    (source: {source})"]
    for cond, sc in scores.items():
        row = sc.table_row(source)
        rows.append(f"{cond:<11}" + "".join(
            f"{f'{row[k][0]:.2f} ± {row[k][1]:.2f}':>18}" for k in ("GSIR", "GSAR", "GNSDR")))
        if source == "vocal" and cond in REFERENCE_TABLE:
            ref = REFERENCE_TABLE[cond]
            rows.append(f"{'  ref':<11}" + "".join(
                f"{f'{ref[k][0]:.2f} ± {ref[k][1]:.2f}':>18}" for k in ("GSIR", "GSAR", "GNSDR")))
    return "\n".join(rows) + "\n"
