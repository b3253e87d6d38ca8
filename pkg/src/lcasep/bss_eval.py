"""Projection-based separation metrics (time-invariant gains) and global aggregates.

An estimate is split into ``s_target`` (its projection on the true target
source), ``e_interf`` (the rest of its projection on the span of all true
sources) and ``e_artif`` (whatever lies outside that span). No distortion
filter is allowed, so a filtered copy of the target counts as artifact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AggregationError, DegenerateSourceError, ShapeError

DB_CAP = 200.0
PINV_RCOND = 1e-10
METRICS = ("sdr", "sir", "sar", "nsdr")
SOURCES = ("vocal", "accomp")


@dataclass(frozen=True)
class Decomposition:
    s_target: np.ndarray
    e_interf: np.ndarray
    e_artif: np.ndarray


def _samples(x) -> np.ndarray:
    return np.asarray(getattr(x, "samples", x), dtype=np.float64)


def decompose(estimate, sources: Sequence, target_index: int) -> Decomposition:
    est = _samples(estimate)
    S = np.stack([_samples(s) for s in sources])
    if S.shape[1] != est.shape[0]:
        raise ShapeError(f"estimate has {est.shape[0]} samples, sources have {S.shape[1]}")
    target = S[target_index]
    t_energy = target @ target
    if t_energy == 0:
        raise DegenerateSourceError("target source has zero energy")
    s_target = (est @ target) / t_energy * target
    coef = np.linalg.pinv(S @ S.T, rcond=PINV_RCOND, hermitian=True) @ (S @ est)
    p_all = coef @ S
    return Decomposition(s_target, p_all - s_target, est - p_all)


def _ratio_db(num: float, den: float) -> float:
    if num == 0:
        return -DB_CAP
    if den == 0:
        return DB_CAP
    return float(np.clip(10 * np.log10(num / den), -DB_CAP, DB_CAP))


def sdr_sir_sar(d: Decomposition) -> tuple[float, float, float]:
    def sq(x):
        return float(x @ x)

    sdr = _ratio_db(sq(d.s_target), sq(d.e_interf + d.e_artif))
    sir = _ratio_db(sq(d.s_target), sq(d.e_interf))
    sar = _ratio_db(sq(d.s_target + d.e_interf), sq(d.e_artif))
    return sdr, sir, sar


def bss_eval(estimate, sources: Sequence, target_index: int) -> tuple[float, float, float]:
    return sdr_sir_sar(decompose(estimate, sources, target_index))


def nsdr(estimate, sources: Sequence, target_index: int, mixture) -> float:
    """SDR gain of ``estimate`` over the unprocessed mixture."""
    sdr_est = bss_eval(estimate, sources, target_index)[0]
    sdr_mix = bss_eval(mixture, sources, target_index)[0]
    return sdr_est - sdr_mix


@dataclass(frozen=True)
class MetricSet:
    sdr: float
    sir: float
    sar: float
    nsdr: float

    def as_tuple(self):
        return self.sdr, self.sir, self.sar, self.nsdr


@dataclass(frozen=True)
class ClipScores:
    clip_id: str
    length: int
    vocal: MetricSet
    accomp: MetricSet


def score_clip(clip_id: str, est_vocal, est_accomp, vocal, accomp, mixture) -> ClipScores:
    sources = [vocal, accomp]
    sets = []
    for idx, est in enumerate((est_vocal, est_accomp)):
        sdr, sir, sar = bss_eval(est, sources, idx)
        sdr_mix = bss_eval(mixture, sources, idx)[0]
        sets.append(MetricSet(sdr, sir, sar, sdr - sdr_mix))
    return ClipScores(clip_id, len(_samples(vocal)), *sets)


@dataclass
class SeparationScores:
    """Per-clip scores plus length-weighted means and unweighted spreads.

    ``means`` and ``spreads`` are keyed by ``(source, metric)``, e.g.
    ``("vocal", "sir")``; the global names map as GSIR = mean SIR, GSAR =
    mean SAR, GNSDR = mean NSDR.
    """

    clips: list[ClipScores]
    means: dict = field(default_factory=dict)
    spreads: dict = field(default_factory=dict)

    def table_row(self, source: str = "vocal") -> dict:
        return {
            "GSIR": (self.means[source, "sir"], self.spreads[source, "sir"]),
            "GSAR": (self.means[source, "sar"], self.spreads[source, "sar"]),
            "GNSDR": (self.means[source, "nsdr"], self.spreads[source, "nsdr"]),
        }


def weighted_mean(values: Sequence[float], weights: Sequence[float]) -> float:
    w = np.asarray(weights, dtype=np.float64)
    return float(np.sum(w * np.asarray(values, dtype=np.float64)) / np.sum(w))


def aggregate(per_clip: Sequence[ClipScores], lengths: Sequence[int] | None = None
              ) -> SeparationScores:
    if len(per_clip) == 0:
        raise AggregationError("nothing to aggregate")
    if lengths is None:
        lengths = [c.length for c in per_clip]
    if len(lengths) != len(per_clip):
        raise AggregationError("lengths and scores differ in count")
    out = SeparationScores(list(per_clip))
    for source in SOURCES:
        for i, metric in enumerate(METRICS):
            vals = [getattr(c, source).as_tuple()[i] for c in per_clip]
            out.means[source, metric] = weighted_mean(vals, lengths)
            out.spreads[source, metric] = float(np.std(vals))
    return out
