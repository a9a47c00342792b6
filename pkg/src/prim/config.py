"""Run configuration: one flat dataclass, read from ``key = value`` text."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    pass


ABLATIONS = ("T", "S", "D")
NODE_INIT_MODES = ("taxonomy", "free", "taxonomy+free")
GAMMA_SCOPES = ("graph_part", "full")
LOSS_FORMS = ("standard", "as_printed")
NONE_LOSSES = ("contrast", "negatives_only")


@dataclass
class RunConfig:
    # dimensions
    dim: int = 128                 # POI / relation representation size d_p
    category_dim: int = 128        # category embedding size d_c
    heads: int = 4
    layers: int = 3
    attention_dim: int = 32        # width of the W_a projection
    distance_feature_dim: int = 8  # width of the W_d projection
    rbf_centers: tuple[float, ...] = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)
    rbf_width: float = 1.0
    leaky_slope: float = 0.2
    # spatial context
    radius_km: float = 1.15
    theta: float = 2.0
    # scoring
    bins: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
    # training
    negatives: int = 5
    batch_size: int = 512
    lr: float = 0.001
    max_epochs: int = 200
    patience: int = 10
    seed: int = 7
    ablate: tuple[str, ...] = ()
    node_init: str = "taxonomy"
    gamma_scope: str = "graph_part"
    loss_form: str = "standard"
    none_loss: str = "contrast"    # or "negatives_only"
    mask_targets: bool = True      # hide each batch's own edges from message passing
    isolate_fraction: float = -1.0  # share of batch POIs cut off per step; < 0 follows hide_fraction
    max_seconds: float = 0.0       # wall-clock training budget, 0 = unlimited
    # data
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    nonrel_ratio: float = 0.65
    hide_fraction: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.dim % self.heads:
            raise ConfigError(f"dim={self.dim} is not divisible by heads={self.heads}")
        if self.layers < 1:
            raise ConfigError("layers must be >= 1")
        for flag in self.ablate:
            if flag not in ABLATIONS:
                raise ConfigError(f"unknown ablation flag {flag!r}; expected a subset of T,S,D")
        if self.node_init not in NODE_INIT_MODES:
            raise ConfigError(f"node_init must be one of {NODE_INIT_MODES}")
        if self.gamma_scope not in GAMMA_SCOPES:
            raise ConfigError(f"gamma_scope must be one of {GAMMA_SCOPES}")
        if self.gamma_scope == "full" and self.category_dim != self.dim:
            raise ConfigError("gamma_scope=full needs category_dim == dim")
        if self.loss_form not in LOSS_FORMS:
            raise ConfigError(f"loss_form must be one of {LOSS_FORMS}")
        if self.none_loss not in NONE_LOSSES:
            raise ConfigError(f"none_loss must be one of {NONE_LOSSES}")
        if self.negatives < 0 or self.batch_size < 1:
            raise ConfigError("negatives must be >= 0 and batch_size >= 1")
        if self.radius_km <= 0 or self.theta <= 0:
            raise ConfigError("radius_km and theta must be positive")
        if self.isolate_fraction > 1:
            raise ConfigError("isolate_fraction must be <= 1")
        if len(self.split) != 3 or min(self.split) < 0:
            raise ConfigError("split needs three non-negative fractions")

    def ablated(self, flag: str) -> bool:
        return flag in self.ablate

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # text form ----------------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, overrides: list[str] | None = None) -> "RunConfig":
        values: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
        for item in overrides or ():
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, value = (s.strip() for s in item.split("=", 1))
            values[key] = value
        return cls.from_mapping(values)

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> "RunConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in fields:
                raise ConfigError(f"unknown config key {key!r}")
            default = fields[key].default
            try:
                kwargs[key] = _parse(raw, default) if isinstance(raw, str) else raw
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path | None, overrides: list[str] | None = None) -> "RunConfig":
        text = Path(path).read_text(encoding="utf-8") if path else ""
        return cls.from_text(text, overrides)


def _format(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(raw: str, default):
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise ValueError("expected a boolean")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        parts = [p.strip() for p in raw.replace(";", ",").split(",") if p.strip()]
        if default and isinstance(default[0], float) or not default and raw and _is_number(parts):
            return tuple(float(p) for p in parts)
        return tuple(parts)
    return raw


def _is_number(parts) -> bool:
    try:
        [float(p) for p in parts]
    except ValueError:
        return False
    return bool(parts)
