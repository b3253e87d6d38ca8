"""Run configuration: an INI-style ``key = value`` file with one section per module.

Unknown sections and keys are rejected. ``[run] preset`` selects the default
block (``desk`` for quick runs, ``paper`` for the published scale); any key set
explicitly in the file wins over the preset.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .dictionary import LearnParams
from .errors import ConfigError
from .experiments import DEFAULT_LAMBDAS, TABLE_CONDITIONS, PipelineSettings
from .lca import LcaParams
from .spectral import CONDITIONS

# section -> config keys it may contain (each key is a RunConfig field,
# except ``lambda`` which maps to ``lam``)
SECTIONS = {
    "run": ("dataset_root", "output_dir", "manifest", "conditions", "preset", "seed", "workers"),
    "audio_io": ("duration", "n_train", "max_clips", "vocal_channel"),
    "lca": ("lambda", "n_steps", "dt_over_tau", "method"),
    "dictionary": ("n_features", "stride", "patch_ms", "learning_rate", "momentum", "epochs",
                   "lr_decay", "normalize_dw", "patch_norm"),
    "separation": ("readout_epochs", "readout_learning_rate"),
    "experiments": ("lambdas", "noise_rel", "sweep_epochs", "sweep_clips", "sweep_condition",
                    "sweep_mode"),
}

PRESETS = {
    "desk": dict(n_features=512, epochs=1, n_steps=200, n_train=40, max_clips=50,
                 sweep_epochs=1, sweep_clips=10),
    "paper": dict(n_features=8192, epochs=4, n_steps=1000, n_train=950, max_clips=0,
                  sweep_epochs=2, sweep_clips=0),
}

# keys that never change results and are left out of the config hash
_UNHASHED = ("dataset_root", "output_dir", "manifest", "workers")


@dataclass(frozen=True)
class RunConfig:
    dataset_root: str = "data"
    output_dir: str = "out"
    manifest: str = ""  # default: <output_dir>/manifest.tsv
    conditions: tuple[str, ...] = TABLE_CONDITIONS
    preset: str = "desk"
    seed: int = 0
    workers: int = 1
    duration: float = 2.0
    n_train: int = 950
    max_clips: int = 0  # 0 = use every clip in the dataset
    vocal_channel: str = "right"
    lam: float = 0.625
    n_steps: int = 1000
    dt_over_tau: float = 0.05
    method: str = "auto"
    n_features: int = 8192
    stride: int = 2
    patch_ms: float = 128.0
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 4
    lr_decay: float = 0.5
    normalize_dw: bool = True
    patch_norm: float = PipelineSettings.patch_norm
    readout_epochs: int = 40
    readout_learning_rate: float = PipelineSettings.readout_lr
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    noise_rel: float = 0.1
    sweep_epochs: int = 2
    sweep_clips: int = 0
    sweep_condition: str = "Phase"
    sweep_mode: str = "train"
    explicit: frozenset = field(default=frozenset(), compare=False, repr=False)

    def __post_init__(self):
        bad = [c for c in self.conditions if c not in CONDITIONS]
        if bad:
            raise ConfigError(f"unknown condition(s) {bad}; choose from {list(CONDITIONS)}")
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.sweep_condition not in CONDITIONS:
            raise ConfigError(f"unknown sweep_condition {self.sweep_condition!r}")
        if self.sweep_mode not in ("train", "fixed"):
            raise ConfigError("sweep_mode must be 'train' or 'fixed'")
        try:
            self.lca_params()
            self.learn_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_preset(cls, preset: str = "desk", **overrides) -> "RunConfig":
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        values = {**PRESETS[preset], **overrides}
        return cls(preset=preset, explicit=frozenset(overrides), **values)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
        parser.optionxform = str
        try:
            read = parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in SECTIONS[section]:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
                name = "lam" if key == "lambda" else key
                values[name] = _parse(raw, types[name], f"{section}.{key}")
        preset = values.pop("preset", "desk")
        return cls.from_preset(preset, **values)

    def lca_params(self) -> LcaParams:
        return LcaParams(lam=self.lam, n_steps=self.n_steps, dt_over_tau=self.dt_over_tau,
                         method=self.method)

    def learn_params(self) -> LearnParams:
        return LearnParams(learning_rate=self.learning_rate, momentum=self.momentum,
                           epochs=self.epochs, rng_seed=self.seed, lr_decay=self.lr_decay,
                           normalize_dw=self.normalize_dw)

    def settings(self) -> PipelineSettings:
        return PipelineSettings(n_features=self.n_features, stride=self.stride,
                                patch_ms=self.patch_ms, lca=self.lca_params(),
                                learn=self.learn_params(), readout_epochs=self.readout_epochs,
                                readout_lr=self.readout_learning_rate,
                                patch_norm=self.patch_norm, seed=self.seed)

    def hashed_fields(self) -> dict:
        d = asdict(self)
        d.pop("explicit")
        for key in _UNHASHED:
            d.pop(key)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_fields(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def manifest_path(self) -> Path:
        return Path(self.manifest) if self.manifest else Path(self.output_dir) / "manifest.tsv"

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **kw)

    def to_text(self) -> str:
        """Serialize back to the file format (every key, resolved)."""
        lines = []
        for section, keys in SECTIONS.items():
            lines.append(f"[{section}]")
            for key in keys:
                value = getattr(self, "lam" if key == "lambda" else key)
                if isinstance(value, (tuple, list)):
                    value = ", ".join(str(v) for v in value)
                elif isinstance(value, bool):
                    value = "true" if value else "false"
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)


def _parse(raw: str, typ, name: str):
    raw = raw.strip()
    typ = str(typ)
    try:
        if typ == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ.startswith("tuple[float"):
            return tuple(float(x) for x in raw.replace(",", " ").split())
        if typ.startswith("tuple[str"):
            return tuple(x for x in raw.replace(",", " ").split())
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
