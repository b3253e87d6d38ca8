"""Command-line pipeline: ``lcasep <command> [--config FILE] [--force] [--workers N]``.

Stages and what they write under ``output_dir``::

    prepare         manifest.tsv, mixtures/<id>.wav, images/<kind>/<id>.<mix|vocal|accomp>.simg
    sweep           sweep.csv
    train           dictionaries/<cond>.dict
    train-readouts  readouts/<cond>.<vocal|accomp>.rdt
    separate        stems/<id>.<vocal|accomp>.<cond>.single.wav
    denoise         stems/<id>.<vocal|accomp>.Phase.denoised.wav
    eval            scores.csv, aggregate.txt
    report          report.txt

Each stage records ``provenance/<stage>.json`` (config hash, seed, git blob
hashes of inputs and outputs). Binary artifacts also carry the first 32 hex
digits of the config hash in their header. A stage refuses to consume
artifacts written under a different config hash, and refuses to overwrite
its own outputs unless ``--force`` is given.

Exit codes: 0 success, 1 internal error, 2 data error, 3 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import audio_io
from .audio_io import SAMPLE_RATE, ClipPair, load_clip_pair, load_waveform, mix_equal
from .bss_eval import aggregate, score_clip
from .config import RunConfig
from .dictionary import init_dictionary, load_dictionary, save_dictionary
from .errors import (DataError, DependencyError, FormatError, LcaSepError, OverwriteError,
                     UsageError)
from .experiments import (REFERENCE_LAMBDA, REFERENCE_SPARSITY, PipelineSettings,
                          aggregate_text, fit_readouts, read_scores_csv, scores_csv_text,
                          scores_from_rows, sweep_csv_text, sweep_fixed, table_text,
                          train_coding_dictionary)
from .lca import Dictionary, input_gain
from .separation import ReadoutPair, StemEstimate, clip_images, denoise_many, separate_many
from .spectral import CONDITIONS, Kind, load_image, save_image

log = logging.getLogger("lcasep")

COMMANDS = ("prepare", "sweep", "train", "train-readouts", "separate", "denoise", "eval",
            "report")
ROLES = ("mix", "vocal", "accomp")


# -- helpers -------------------------------------------------------------------

def blob_hash(data: bytes) -> str:
    """Content hash in git's blob format."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    """Ordered map, in a process pool when ``workers > 1``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _chunks(items: Sequence, n: int) -> list[list]:
    n = max(1, min(n, len(items)))
    return [list(items[i::n]) for i in range(n)]


def _unchunk(parts: list[list], n_items: int) -> list:
    out = [None] * n_items
    for i, part in enumerate(parts):
        out[i::len(parts)] = part
    return out


def training_condition(cond: str) -> str:
    """The condition whose dictionary and readouts ``cond`` uses."""
    return "Phase" if cond == "Denoised" else cond


class Workspace:
    def __init__(self, cfg: RunConfig, force: bool = False):
        self.cfg = cfg
        self.root = Path(cfg.output_dir)
        self.force = force
        self.hash = cfg.config_hash()
        self.tag = self.hash[:32].encode()
        self.settings: PipelineSettings = cfg.settings()

    # layout
    @property
    def manifest(self) -> Path:
        return self.cfg.manifest_path

    def mixture(self, cid: str) -> Path:
        return self.root / "mixtures" / f"{cid}.wav"

    def image(self, kind: Kind, cid: str, role: str) -> Path:
        return self.root / "images" / Kind(kind).value / f"{cid}.{role}.simg"

    def dictionary(self, cond: str) -> Path:
        return self.root / "dictionaries" / f"{cond}.dict"

    def readout(self, cond: str, source: str) -> Path:
        return self.root / "readouts" / f"{cond}.{source}.rdt"

    def stem(self, cid: str, source: str, cond: str, pass_: str) -> Path:
        return self.root / "stems" / f"{cid}.{source}.{cond}.{pass_}.wav"

    def provenance(self, stage: str) -> Path:
        return self.root / "provenance" / f"{stage}.json"

    def clip_source(self, cid: str) -> Path:
        return Path(self.cfg.dataset_root) / f"{cid}.wav"

    @property
    def trained(self) -> list[str]:
        out = []
        for c in self.cfg.conditions:
            t = training_condition(c)
            if t not in out:
                out.append(t)
        return out

    # guards
    def begin(self, stage: str, outputs: Sequence[Path] = ()) -> None:
        existing = [p for p in [self.provenance(stage), *outputs] if p.exists()]
        if existing and not self.force:
            raise OverwriteError(f"{stage}: {existing[0]} exists; pass --force to overwrite")

    def require(self, stage: str) -> dict:
        path = self.provenance(stage)
        if not path.exists():
            raise DependencyError(f"missing artifact {path}; run '{stage}' first")
        record = json.loads(path.read_text())
        if record.get("config_hash") != self.hash:
            raise UsageError(
                f"{path} was written under config hash {record.get('config_hash', '?')[:12]}, "
                f"current config is {self.hash[:12]}; rerun '{stage}' with --force")
        return record

    def need(self, path: Path) -> Path:
        if not path.exists():
            raise DependencyError(f"missing artifact {path}")
        return path

    def check_tag(self, path: Path, tag: bytes) -> None:
        if tag.rstrip(b"\0") != self.tag:
            raise UsageError(f"{path} was written under a different config hash")

    def rel(self, path: Path) -> str:
        try:
            return str(Path(path).relative_to(self.root))
        except ValueError:
            return str(path)

    def record(self, stage: str, inputs: Sequence[Path], outputs: Sequence[Path],
               **extra) -> None:
        record = {
            "stage": stage,
            "config_hash": self.hash,
            "seed": self.cfg.seed,
            "inputs": {self.rel(p): blob_hash(Path(p).read_bytes()) for p in inputs},
            "outputs": {self.rel(p): blob_hash(Path(p).read_bytes()) for p in outputs},
        }
        record.update(extra)
        path = self.provenance(stage)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")

    # loading
    def load_manifest(self) -> audio_io.DatasetManifest:
        self.require("prepare")
        return audio_io.read_manifest(self.need(self.manifest))

    def load_images(self, kind: Kind, ids: Sequence[str], roles=ROLES) -> list[tuple]:
        n_samples = int(round(self.cfg.duration * SAMPLE_RATE))
        out = []
        for cid in ids:
            row = []
            for role in roles:
                path = self.need(self.image(kind, cid, role))
                img, tag = load_image(path, n_samples)
                self.check_tag(path, tag)
                row.append(img)
            out.append(tuple(row))
        return out

    def load_dictionary(self, cond: str) -> Dictionary:
        path = self.need(self.dictionary(cond))
        d, role, tag = load_dictionary(path)
        self.check_tag(path, tag)
        if role != "coding":
            raise FormatError(f"{path}: expected a coding dictionary, found role {role!r}")
        return d

    def load_readouts(self, cond: str) -> ReadoutPair:
        banks = {}
        for source in ("vocal", "accomp"):
            path = self.need(self.readout(cond, source))
            d, role, tag = load_dictionary(path)
            self.check_tag(path, tag)
            if role != source:
                raise FormatError(f"{path}: expected role {source!r}, found {role!r}")
            banks[source] = d
        return ReadoutPair(banks["vocal"].atoms, banks["accomp"].atoms, banks["vocal"].stride,
                           banks["vocal"].kind)

    def load_clip(self, cid: str) -> ClipPair:
        clip = load_clip_pair(self.need(self.clip_source(cid)), self.cfg.vocal_channel)
        return audio_io.truncate(clip, self.cfg.duration)


# -- per-item workers (module level so they pickle) ----------------------------

def _prepare_clip(args):
    path, cid, vocal_channel, duration, kinds, with_stems = args
    try:
        clip = load_clip_pair(path, vocal_channel)
        clip = audio_io.truncate(ClipPair(clip.vocal, clip.accompaniment, cid), duration)
    except LcaSepError as exc:
        return cid, None, str(exc)
    images = {}
    for kind in kinds:
        triple = clip_images(clip, kind)
        images[kind] = triple if with_stems else triple[:1]
    return cid, (mix_equal(clip), images), None


def _train_one(args):
    kind, images, settings = args
    return train_coding_dictionary(kind, images, settings)


def _readouts_one(args):
    triples, dictionary, settings = args
    return fit_readouts(triples, dictionary, settings)


def _separate_chunk(args):
    mixes, ids, kind, dictionary, readouts, lca, cond, patch_norm = args
    return separate_many(mixes, ids, kind, dictionary, readouts, lca, cond, patch_norm)


def _denoise_chunk(args):
    estimates, kind, dictionary, readouts, lca, patch_norm = args
    return denoise_many(estimates, kind, dictionary, readouts, lca, patch_norm)


def _sweep_point(args):
    lam, kind, images, scaled, settings, sweep_epochs, noise_rel = args
    lca = replace(settings.lca, lam=lam)
    s = replace(settings, lca=lca, learn=replace(settings.learn, epochs=sweep_epochs))
    dictionary, _ = train_coding_dictionary(kind, images, s)
    return sweep_fixed(dictionary, scaled, [lam], lca, noise_rel, settings.seed)[0]


def _score_one(args):
    cid, est_v, est_a, clip = args
    return score_clip(cid, est_v, est_a, clip.vocal, clip.accompaniment, mix_equal(clip))


# -- commands ------------------------------------------------------------------

def cmd_prepare(ws: Workspace, workers: int) -> None:
    """Split the dataset, write equal mixtures and sound images."""
    cfg = ws.cfg
    root = Path(cfg.dataset_root)
    if not root.is_dir():
        raise DataError(f"dataset_root {root} is not a directory")
    paths = sorted(root.glob("*.wav"))
    if cfg.max_clips > 0:
        paths = paths[:cfg.max_clips]
    if not paths:
        raise DataError(f"no .wav clips found in {root}")
    ids = [p.stem for p in paths]
    manifest = audio_io.make_split(ids, cfg.n_train, cfg.seed, cfg.vocal_channel)
    train = set(manifest.train_ids)
    kinds = sorted({CONDITIONS[c] for c in cfg.conditions}, key=lambda k: k.code)
    ws.begin("prepare", [ws.manifest])
    jobs = [(p, p.stem, cfg.vocal_channel, cfg.duration, kinds, p.stem in train) for p in paths]
    results = _pmap(_prepare_clip, jobs, workers)
    failures = [(cid, err) for cid, _, err in results if err]
    if failures:
        listing = "\n".join(f"  {cid}: {err}" for cid, err in failures)
        raise DataError(f"{len(failures)} clip(s) could not be prepared:\n{listing}")
    outputs = [ws.manifest]
    ws.manifest.parent.mkdir(parents=True, exist_ok=True)
    audio_io.write_manifest(manifest, ws.manifest)
    for cid, (mix, images), _ in results:
        path = ws.mixture(cid)
        path.parent.mkdir(parents=True, exist_ok=True)
        audio_io.write_wav(path, mix, float32=True)
        outputs.append(path)
        for kind, triple in images.items():
            for role, img in zip(ROLES, triple):
                path = ws.image(kind, cid, role)
                path.parent.mkdir(parents=True, exist_ok=True)
                save_image(img, path, ws.tag)
                outputs.append(path)
    ws.record("prepare", paths, outputs, n_train=manifest.n_train, n_test=len(manifest.test_ids))
    log.info("prepared %d clips (%d train / %d test)", len(ids), manifest.n_train,
             len(manifest.test_ids))


def cmd_sweep(ws: Workspace, workers: int) -> None:
    """Sparsity and denoising error across the threshold grid."""
    cfg = ws.cfg
    manifest = ws.load_manifest()
    out = ws.root / "sweep.csv"
    ws.begin("sweep", [out])
    cond = training_condition(cfg.sweep_condition)
    kind = CONDITIONS[cond]
    ids = manifest.train_ids[:cfg.sweep_clips] if cfg.sweep_clips else manifest.train_ids
    images = [t[0].data for t in ws.load_images(kind, ids, ("mix",))]
    inputs = [ws.image(kind, cid, "mix") for cid in ids]
    s = ws.settings
    if cfg.sweep_mode == "fixed":
        ws.require("train")
        dictionary = ws.load_dictionary(cond)
        inputs.append(ws.dictionary(cond))
        scaled = [x * input_gain(x, dictionary, s.patch_norm) for x in images]
        points = sweep_fixed(dictionary, scaled, cfg.lambdas, s.lca, cfg.noise_rel, cfg.seed)
    else:
        geometry = init_dictionary(1, kind.channels, kind.fft_size // 2, s.patch_frames(kind),
                                   s.stride, 0)
        scaled = [x * input_gain(x, geometry, s.patch_norm) for x in images]
        jobs = [(lam, kind, images, scaled, s, cfg.sweep_epochs, cfg.noise_rel)
                for lam in cfg.lambdas]
        points = _pmap(_sweep_point, jobs, workers)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(sweep_csv_text(points, f"config_hash={ws.hash} condition={cond}"))
    ws.record("sweep", inputs, [out])
    for p in points:
        log.info("lambda %.3f: sparsity %.4f, denoise error %.4f", p.lam, p.mean_sparsity,
                 p.denoise_error)


def cmd_train(ws: Workspace, workers: int) -> None:
    """Learn one coding dictionary per representation."""
    manifest = ws.load_manifest()
    outputs = [ws.dictionary(c) for c in ws.trained]
    ws.begin("train", outputs)
    jobs, inputs = [], []
    for cond in ws.trained:
        kind = CONDITIONS[cond]
        images = [t[0] for t in ws.load_images(kind, manifest.train_ids, ("mix",))]
        inputs += [ws.image(kind, cid, "mix") for cid in manifest.train_ids]
        jobs.append((kind, images, ws.settings))
    results = _pmap(_train_one, jobs, workers)
    reports = {}
    for cond, (dictionary, report), path in zip(ws.trained, results, outputs):
        path.parent.mkdir(parents=True, exist_ok=True)
        save_dictionary(dictionary, path, "coding", ws.tag)
        reports[cond] = {"epoch_mean_error": report.epoch_mean_error,
                         "epoch_mean_sparsity": report.epoch_mean_sparsity}
        log.info("%s: epoch error %s, sparsity %s", cond,
                 np.round(report.epoch_mean_error, 4), np.round(report.epoch_mean_sparsity, 4))
    ws.record("train", [ws.manifest] + inputs, outputs, reports=reports)


def cmd_train_readouts(ws: Workspace, workers: int) -> None:
    """Fit vocal and accompaniment readouts on frozen mixture codes."""
    manifest = ws.load_manifest()
    ws.require("train")
    outputs = [ws.readout(c, s) for c in ws.trained for s in ("vocal", "accomp")]
    ws.begin("train-readouts", outputs)
    jobs, inputs = [], [ws.dictionary(c) for c in ws.trained]
    for cond in ws.trained:
        kind = CONDITIONS[cond]
        jobs.append((ws.load_images(kind, manifest.train_ids), ws.load_dictionary(cond),
                     ws.settings))
        inputs += [ws.image(kind, cid, r) for cid in manifest.train_ids for r in ROLES]
    results = _pmap(_readouts_one, jobs, workers)
    for cond, readouts in zip(ws.trained, results):
        for source in ("vocal", "accomp"):
            path = ws.readout(cond, source)
            path.parent.mkdir(parents=True, exist_ok=True)
            save_dictionary(readouts.bank(source), path, source, ws.tag)
    ws.record("train-readouts", inputs, outputs)


def _write_stems(ws: Workspace, estimates: Sequence[StemEstimate], cond: str) -> tuple[list, dict]:
    paths, clipped = [], {}
    for est in estimates:
        for source, wave in (("vocal", est.vocal), ("accomp", est.accompaniment)):
            path = ws.stem(est.clip_id, source, cond, est.pass_)
            path.parent.mkdir(parents=True, exist_ok=True)
            n = audio_io.write_wav(path, wave)
            if n:
                clipped[ws.rel(path)] = n
            paths.append(path)
    return paths, clipped


def cmd_separate(ws: Workspace, workers: int) -> None:
    """Separate the test mixtures into stems."""
    manifest = ws.load_manifest()
    ws.require("train-readouts")
    ids = manifest.test_ids
    outputs = [ws.stem(cid, s, c, "single") for c in ws.trained for cid in ids
               for s in ("vocal", "accomp")]
    ws.begin("separate", outputs)
    inputs = [ws.mixture(cid) for cid in ids]
    mixes = [load_waveform(ws.need(p)) for p in inputs]
    written, diagnostics = [], {}
    for cond in ws.trained:
        kind = CONDITIONS[cond]
        dictionary, readouts = ws.load_dictionary(cond), ws.load_readouts(cond)
        inputs += [ws.dictionary(cond), ws.readout(cond, "vocal"), ws.readout(cond, "accomp")]
        parts = _chunks(list(range(len(ids))), workers)
        jobs = [([mixes[i] for i in part], [ids[i] for i in part], kind, dictionary, readouts,
                 ws.settings.lca, cond, ws.settings.patch_norm) for part in parts]
        estimates = _unchunk(_pmap(_separate_chunk, jobs, workers), len(ids))
        paths, clipped = _write_stems(ws, estimates, cond)
        written += paths
        diagnostics[cond] = {
            "clamped_cells": {e.clip_id: e.clamped for e in estimates},
            "sum_error": {e.clip_id: round(e.sum_error, 6) for e in estimates},
            "clipped_samples": clipped,
        }
    ws.record("separate", inputs, written, diagnostics=diagnostics)


def cmd_denoise(ws: Workspace, workers: int) -> None:
    """Re-code the Phase stems through their own readouts."""
    if "Denoised" not in ws.cfg.conditions:
        raise UsageError("denoise: 'Denoised' is not among the configured conditions")
    manifest = ws.load_manifest()
    ws.require("separate")
    ids = manifest.test_ids
    outputs = [ws.stem(cid, s, "Phase", "denoised") for cid in ids for s in ("vocal", "accomp")]
    ws.begin("denoise", outputs)
    inputs = [ws.stem(cid, s, "Phase", "single") for cid in ids for s in ("vocal", "accomp")]
    estimates = [StemEstimate(load_waveform(ws.need(ws.stem(cid, "vocal", "Phase", "single"))),
                              load_waveform(ws.need(ws.stem(cid, "accomp", "Phase", "single"))),
                              cid, "Phase") for cid in ids]
    dictionary, readouts = ws.load_dictionary("Phase"), ws.load_readouts("Phase")
    inputs += [ws.dictionary("Phase"), ws.readout("Phase", "vocal"),
               ws.readout("Phase", "accomp")]
    parts = _chunks(list(range(len(ids))), workers)
    jobs = [([estimates[i] for i in part], CONDITIONS["Denoised"], dictionary, readouts,
             ws.settings.lca, ws.settings.patch_norm) for part in parts]
    denoised = _unchunk(_pmap(_denoise_chunk, jobs, workers), len(ids))
    paths, clipped = _write_stems(ws, denoised, "Phase")
    ws.record("denoise", inputs, paths, derived_from="Phase",
              diagnostics={"clamped_cells": {e.clip_id: e.clamped for e in denoised},
                           "clipped_samples": clipped})


def _stem_files(ws: Workspace, cond: str, cid: str) -> tuple[Path, Path]:
    pass_ = "denoised" if cond == "Denoised" else "single"
    return (ws.stem(cid, "vocal", training_condition(cond), pass_),
            ws.stem(cid, "accomp", training_condition(cond), pass_))


def cmd_eval(ws: Workspace, workers: int) -> None:
    """Score every condition's stems with BSS-eval."""
    manifest = ws.load_manifest()
    stages = ["separate"] + (["denoise"] if "Denoised" in ws.cfg.conditions else [])
    hashes = {s: ws.require(s)["config_hash"] for s in stages}
    if len(set(hashes.values())) > 1:
        raise UsageError(f"stems come from different config hashes: {hashes}")
    out_csv, out_agg = ws.root / "scores.csv", ws.root / "aggregate.txt"
    ws.begin("eval", [out_csv, out_agg])
    ids = manifest.test_ids
    clips = {cid: ws.load_clip(cid) for cid in ids}
    scores, inputs = {}, [ws.clip_source(cid) for cid in ids]
    for cond in ws.cfg.conditions:
        jobs = []
        for cid in ids:
            pv, pa = (ws.need(p) for p in _stem_files(ws, cond, cid))
            inputs += [pv, pa]
            jobs.append((cid, load_waveform(pv), load_waveform(pa), clips[cid]))
        scores[cond] = aggregate(_pmap(_score_one, jobs, workers))
    comment = f"config_hash={ws.hash}"
    out_csv.write_text(scores_csv_text(scores, comment))
    out_agg.write_text(aggregate_text(scores, comment))
    ws.record("eval", inputs, [out_csv, out_agg])
    sys.stdout.write(table_text(scores))


def cmd_report(ws: Workspace, workers: int) -> None:
    """Summarize scores (and the sweep, if run) as text tables."""
    ws.require("eval")
    out = ws.root / "report.txt"
    ws.begin("report", [out])
    scores_path = ws.need(ws.root / "scores.csv")
    length = int(round(ws.cfg.duration * SAMPLE_RATE))
    scores = scores_from_rows(read_scores_csv(scores_path), length)
    parts = [f"config_hash {ws.hash}", f"preset {ws.cfg.preset}, seed {ws.cfg.seed}", "",
             "Vocal source", table_text(scores, "vocal"),
             "Accompaniment source", table_text(scores, "accomp")]
    inputs = [scores_path]
    sweep_path = ws.root / "sweep.csv"
    if sweep_path.exists():
        inputs.append(sweep_path)
        rows = read_scores_csv(sweep_path)
        parts.append("Threshold sweep (lambda, mean sparsity, denoising error)")
        parts += [f"  {float(r['lambda']):.3f}  {float(r['mean_sparsity']):.4f}  "
                  f"{float(r['denoise_error']):.4f}" for r in rows]
        at = [r for r in rows if abs(float(r["lambda"]) - REFERENCE_LAMBDA) < 1e-9]
        if at:
            parts.append(f"  sparsity at lambda={REFERENCE_LAMBDA}: "
                         f"{float(at[0]['mean_sparsity']):.4f} "
                         f"(published reference {REFERENCE_SPARSITY}, informational)")
        parts.append("")
    text = "\n".join(parts)
    out.write_text(text)
    ws.record("report", inputs, [out])
    sys.stdout.write(text)


HANDLERS = {
    "prepare": cmd_prepare, "sweep": cmd_sweep, "train": cmd_train,
    "train-readouts": cmd_train_readouts, "separate": cmd_separate, "denoise": cmd_denoise,
    "eval": cmd_eval, "report": cmd_report,
}


# -- entry point ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="run configuration file (default: built-in desk preset)")
    common.add_argument("--force", action="store_true", default=argparse.SUPPRESS,
                        help="overwrite outputs of a previous run of this stage")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                        help="worker processes for per-clip work (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    parser = _Parser(prog="lcasep", parents=[common],
                     description="Sparse-coding singing-voice separation pipeline.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__doc__)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError("no command given; choose one of: " + ", ".join(COMMANDS))
        logging.basicConfig(
            level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
            format="%(levelname)s %(message)s")
        config = getattr(args, "config", None)
        cfg = RunConfig.from_file(config) if config else RunConfig.from_preset("desk")
        workers = getattr(args, "workers", cfg.workers)
        if workers < 1:
            raise UsageError("--workers must be >= 1")
        ws = Workspace(cfg, force=getattr(args, "force", False))
        HANDLERS[args.command](ws, workers)
        return 0
    except LcaSepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
