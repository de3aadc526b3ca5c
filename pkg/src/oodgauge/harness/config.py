"""Experiment configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..datagen import DEFAULT_RADIAL_NOISE
from ..model import HEAD_KINDS
from ..scoring import SCORERS
from ..ssl import SSL_KINDS

DATASETS = ("circle", "blobs")

# RNG stream ids; SSL draws never touch the classification path
STREAM_DATA = 0
STREAM_INIT = 1
STREAM_SHUFFLE = 2
STREAM_AUG = 3

# full-protocol sizes for the circle track
PROTOCOL_SIZES = {"n_train": 48_000, "n_val": 16_000, "n_test": 16_000, "n_ood": 16_000}
BLOB_SIZES = {"n_train": 10_000, "n_val": 2_000, "n_test": 10_000, "n_ood": 10_000}


@dataclass(frozen=True)
class ExperimentConfig:
    loss_kind: str = "ce"
    ssl_kind: str = "none"
    alpha: float = 1.0
    epochs: int = 10
    batch_size: int = 128
    lr: float = 0.01
    seed: int = 0
    dataset: str = "circle"
    # circle track
    class_radius_inner: float = 0.5
    class_radius_outer: float = 1.0
    radial_noise_std: float = DEFAULT_RADIAL_NOISE
    # blob track
    blob_dims: int = 8
    blob_distance: float = 4.0
    blob_std: float = 1.0
    # evaluation set sizes; `scale` divides all of them
    n_train: int | None = None
    n_val: int | None = None
    n_test: int | None = None
    n_ood: int | None = None
    scale: int = 1
    scorers: tuple[str, ...] = SCORERS
    odin_temperature: float = 1000.0
    odin_epsilon: float = 0.01
    md_lambda_reg: float = 1e-6
    aug_noise_std: float = 0.01
    ntxent_tau: float = 0.5
    byol_tau_ema: float = 0.99

    def __post_init__(self):
        if self.loss_kind not in HEAD_KINDS:
            raise ValueError(f"loss_kind must be one of {HEAD_KINDS}")
        if self.ssl_kind not in SSL_KINDS:
            raise ValueError(f"ssl_kind must be one of {SSL_KINDS}")
        if self.dataset not in DATASETS:
            raise ValueError(f"dataset must be one of {DATASETS}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")
        if not self.lr >= 0:
            raise ValueError("lr must be >= 0")
        bad = [s for s in self.scorers if s not in SCORERS]
        if bad or not self.scorers:
            raise ValueError(f"scorers must be a non-empty subset of {SCORERS}")

    def sizes(self) -> dict[str, int]:
        base = PROTOCOL_SIZES if self.dataset == "circle" else BLOB_SIZES
        out = {}
        for key, default in base.items():
            n = getattr(self, key)
            n = default if n is None else n
            out[key] = max(2, n // self.scale)
        return out

    @property
    def method(self) -> str:
        return self.loss_kind if self.ssl_kind == "none" else f"{self.loss_kind}+{self.ssl_kind}"

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_flat(self) -> dict[str, str]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                out[f.name] = "none"
            elif isinstance(v, tuple):
                out[f.name] = ",".join(v)
            elif isinstance(v, float):
                out[f.name] = repr(v)
            else:
                out[f.name] = str(v)
        return out

    @classmethod
    def from_flat(cls, flat: dict[str, str]) -> "ExperimentConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in flat.items():
            if key not in fields:
                raise KeyError(f"unknown config key {key!r}")
            kwargs[key] = _parse(key, raw, cls.__dataclass_fields__[key].default)
        return cls(**kwargs)


_INT_OR_NONE = {"n_train", "n_val", "n_test", "n_ood"}


def _parse(key, raw: str, default):
    raw = raw.strip()
    try:
        if key in _INT_OR_NONE:
            return None if raw.lower() == "none" else int(raw)
        if key == "scorers":
            return tuple(s.strip() for s in raw.split(",") if s.strip())
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot parse {raw!r}") from None
    return raw


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    flat = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        flat[key] = value
    return flat


def write_config_file(config: ExperimentConfig, path) -> None:
    lines = [f"{k} = {v}" for k, v in config.to_flat().items()]
    Path(path).write_text("\n".join(lines) + "\n")
