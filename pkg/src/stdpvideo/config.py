"""Sectioned ``key = value`` experiment configuration.

Sections and keys (defaults in brackets)::

    [dataset]       kind (synthetic | frames) [synthetic]
                    classes, width, height, frames, thickness, speed, noise,
                    train_per_class, test_per_class, seed        (synthetic)
                    root, protocol (kth | leave-one-out), train_subjects,
                    val_subjects, test_subjects                  (frames)
    [encoding]      frames_per_video [8], skip [1], half_scale [true for frames],
                    background_subtraction [false], dog_size [7],
                    dog_sigma_in [1.0], dog_sigma_out [2.0], on_off [true],
                    normalization [sample]
    [architecture]  kind [3d], filters [16, 32, 64], kernel [5x5x2 or 5x5x1],
                    conv_stride [1x1x2 or 1x1x1], pool [2x2x2 or 2x2x1],
                    pool_stride [= pool], t_obj [0.65, 0.3, 0.1],
                    feature_grid [1x1x1], epochs [1], inference_wta [true],
                    wta_rule (first | margin) [first]
    [plasticity]    eta_w [0.1], tau_stdp [0.1], eta_th [1.0], th_min [1.0],
                    th_init_mean [5.0], th_init_std [1.0],
                    absent_pre (skip | depress) [skip]
    [classifier]    lam [1e-4], epochs [50], eta0 [0.1]
    [run]           seed [0], runs [1], out [runs/experiment],
                    report_each_layer [true], parallel [1]

List values are comma separated; 3-vectors are written ``AxBxC``. A list
with a single entry applies to every conv layer.
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .datasets import KTH_TEST, KTH_TRAIN, KTH_VAL, SYNTHETIC_CLASSES
from .encoding import CodingParams, DogParams

WEIZMANN_T_OBJ = (0.75, 0.55, 0.15)
KTH_T_OBJ = (0.65, 0.3, 0.1)


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "synthetic"
    classes: tuple[str, ...] = ("bar-left", "bar-right", "bar-up", "bar-down")
    width: int = 64
    height: int = 64
    frames: int = 8
    thickness: int = 2
    speed: int = 1
    noise: float = 0.02
    train_per_class: int = 100
    test_per_class: int = 50
    seed: int = 0
    root: str = ""
    protocol: str = "kth"
    train_subjects: tuple[int, ...] = KTH_TRAIN
    val_subjects: tuple[int, ...] = KTH_VAL
    test_subjects: tuple[int, ...] = KTH_TEST


@dataclass(frozen=True)
class EncodingConfig:
    frames_per_video: int = 8
    skip: int = 1
    half_scale: bool = False
    background_subtraction: bool = False
    dog_size: int = 7
    dog_sigma_in: float = 1.0
    dog_sigma_out: float = 2.0
    on_off: bool = True
    normalization: str = "sample"

    @property
    def dog(self) -> DogParams:
        return DogParams(self.dog_size, self.dog_sigma_in, self.dog_sigma_out)

    @property
    def coding(self) -> CodingParams:
        return CodingParams(self.on_off, self.normalization)


@dataclass(frozen=True)
class ArchitectureConfig:
    kind: str = "3d"
    filters: tuple[int, ...] = (16, 32, 64)
    kernel: tuple[tuple[int, int, int], ...] = ((5, 5, 2),)
    conv_stride: tuple[tuple[int, int, int], ...] = ((1, 1, 2),)
    pool: tuple[tuple[int, int, int], ...] = ((2, 2, 2),)
    pool_stride: tuple[tuple[int, int, int], ...] = ()
    t_obj: tuple[float, ...] = KTH_T_OBJ
    feature_grid: tuple[int, int, int] = (1, 1, 1)
    epochs: int = 1
    inference_wta: bool = True
    wta_rule: str = "first"

    def per_layer(self, name: str) -> list:
        vals = getattr(self, name)
        if name == "pool_stride" and not vals:
            vals = self.pool
        return list(vals) * len(self.filters) if len(vals) == 1 else list(vals)


@dataclass(frozen=True)
class PlasticityConfig:
    eta_w: float = 0.1
    tau_stdp: float = 0.1
    eta_th: float = 1.0
    th_min: float = 1.0
    th_init_mean: float = 5.0
    th_init_std: float = 1.0
    absent_pre: str = "skip"


@dataclass(frozen=True)
class ClassifierConfig:
    lam: float = 1e-4
    epochs: int = 50
    eta0: float = 0.1


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    runs: int = 1
    out: str = "runs/experiment"
    report_each_layer: bool = True
    parallel: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    plasticity: PlasticityConfig = field(default_factory=PlasticityConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    run: RunConfig = field(default_factory=RunConfig)


_SECTIONS = {
    "dataset": DatasetConfig,
    "encoding": EncodingConfig,
    "architecture": ArchitectureConfig,
    "plasticity": PlasticityConfig,
    "classifier": ClassifierConfig,
    "run": RunConfig,
}

# keys whose default depends on other keys; filled in by _apply_dependent_defaults
_2D_DEFAULTS = {"kernel": ((5, 5, 1),), "conv_stride": ((1, 1, 1),), "pool": ((2, 2, 1),)}


def _vec3(s: str) -> tuple[int, int, int]:
    parts = s.lower().split("x")
    if len(parts) != 3:
        raise ValueError(f"expected AxBxC, got {s!r}")
    return tuple(int(p) for p in parts)


def _list(s: str) -> list[str]:
    return [p.strip() for p in s.split(",") if p.strip()]


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _convert(cls, name: str, raw: str):
    default = next(f for f in fields(cls) if f.name == name).default
    if name in ("kernel", "conv_stride", "pool", "pool_stride"):
        return tuple(_vec3(p) for p in _list(raw))
    if name == "feature_grid":
        return _vec3(raw)
    if name == "classes":
        return tuple(_list(raw))
    if name == "t_obj":
        return tuple(float(p) for p in _list(raw))
    if name in ("filters", "train_subjects", "val_subjects", "test_subjects"):
        return tuple(int(p) for p in _list(raw))
    if isinstance(default, bool):
        return _bool(raw)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def _line_of(text: str, section: Optional[str], key: Optional[str] = None) -> Optional[int]:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section:
            k = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            if k == key:
                return no
    return None


def parse_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.ParsingError as e:
        line = e.errors[0][0] if getattr(e, "errors", None) else None
        raise ConfigError(f"parse error: {e.message.splitlines()[0]}", line) from e
    except configparser.Error as e:
        raise ConfigError(f"parse error: {e}", getattr(e, "lineno", None)) from e
    seen = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", _line_of(text, section))
        cls = _SECTIONS[section]
        names = {f.name for f in fields(cls)}
        values = {}
        for key, raw in parser.items(section):
            line = _line_of(text, section, key)
            if key not in names:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line)
            try:
                values[key] = _convert(cls, key, raw)
            except ValueError as e:
                raise ConfigError(f"bad value for {key!r}: {e}", line) from e
        seen[section] = values
    cfg = _apply_dependent_defaults(seen)
    validate_config(cfg)
    return cfg


def _apply_dependent_defaults(seen: dict) -> ExperimentConfig:
    ds = seen.get("dataset", {})
    if "kind" not in ds:
        raise ConfigError("missing required key 'kind' in [dataset]")
    if ds["kind"] == "frames" and "root" not in ds:
        raise ConfigError("missing required key 'root' in [dataset] for frame datasets")
    enc = dict(seen.get("encoding", {}))
    if ds["kind"] == "frames":
        enc.setdefault("half_scale", True)
    arch = dict(seen.get("architecture", {}))
    if arch.get("kind", "3d") == "2d":
        for k, v in _2D_DEFAULTS.items():
            arch.setdefault(k, v)
    if ds.get("protocol") == "leave-one-out" or "weizmann" in ds.get("root", "").lower():
        arch.setdefault("t_obj", WEIZMANN_T_OBJ[: len(arch.get("filters", (16, 32, 64)))])
    if "filters" in arch and "t_obj" not in arch:
        arch["t_obj"] = KTH_T_OBJ[: len(arch["filters"])]
    return ExperimentConfig(
        dataset=DatasetConfig(**ds),
        encoding=EncodingConfig(**enc),
        architecture=ArchitectureConfig(**arch),
        plasticity=PlasticityConfig(**seen.get("plasticity", {})),
        classifier=ClassifierConfig(**seen.get("classifier", {})),
        run=RunConfig(**seen.get("run", {})),
    )


def validate_config(cfg: ExperimentConfig) -> None:
    """Field-level checks; geometry is checked by :func:`stdpvideo.experiment.network_spec`."""
    d, a = cfg.dataset, cfg.architecture
    if d.kind not in ("synthetic", "frames"):
        raise ConfigError(f"dataset kind must be synthetic or frames, got {d.kind!r}")
    if d.kind == "synthetic":
        bad = set(d.classes) - set(SYNTHETIC_CLASSES)
        if bad:
            raise ConfigError(f"unknown synthetic classes {sorted(bad)}")
    elif d.protocol not in ("kth", "leave-one-out"):
        raise ConfigError(f"unknown protocol {d.protocol!r}")
    if a.kind not in ("2d", "3d"):
        raise ConfigError(f"architecture kind must be 2d or 3d, got {a.kind!r}")
    n = len(a.filters)
    if len(a.t_obj) != n:
        raise ConfigError(f"t_obj schedule has {len(a.t_obj)} entries for {n} conv layers")
    for name in ("kernel", "conv_stride", "pool", "pool_stride"):
        vals = a.per_layer(name)
        if len(vals) != n:
            raise ConfigError(f"{name} needs 1 or {n} entries, got {len(vals)}")
    if a.kind == "2d" and any(k[2] != 1 for k in a.per_layer("kernel")):
        raise ConfigError("2d architectures need kernels with temporal size 1")
    if a.wta_rule not in ("first", "margin"):
        raise ConfigError(f"wta_rule must be first or margin, got {a.wta_rule!r}")
    if cfg.plasticity.absent_pre not in ("skip", "depress"):
        raise ConfigError(f"absent_pre must be skip or depress, got {cfg.plasticity.absent_pre!r}")
    if cfg.run.runs < 1 or cfg.run.parallel < 1 or a.epochs < 1:
        raise ConfigError("runs, parallel and epochs must be >= 1")


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join("x".join(str(i) for i in t) for t in v)
        return ", ".join(str(i) for i in v)
    return str(v)


def dumps_config(cfg: ExperimentConfig) -> str:
    """Fully materialized config text (every key written)."""
    buf = io.StringIO()
    for section, cls in _SECTIONS.items():
        buf.write(f"[{section}]\n")
        block = getattr(cfg, section)
        for f in fields(cls):
            v = getattr(block, f.name)
            if f.name == "feature_grid":
                text = "x".join(str(i) for i in v)
            elif f.name == "pool_stride" and not v:
                text = _fmt(block.pool)
            else:
                text = _fmt(v)
            buf.write(f"{f.name} = {text}\n")
        buf.write("\n")
    return buf.getvalue()


def with_overrides(cfg: ExperimentConfig, *, seed=None, runs=None, out=None,
                   parallel=None) -> ExperimentConfig:
    run = cfg.run
    changes = {k: v for k, v in dict(seed=seed, runs=runs, out=out, parallel=parallel).items()
               if v is not None}
    return replace(cfg, run=replace(run, **changes))
