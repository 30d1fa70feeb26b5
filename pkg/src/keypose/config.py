"""Pipeline configuration shared by every stage."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .activations import MODES
from .errors import InvalidConfig


@dataclass(frozen=True)
class PipelineConfig:
    # features / pictorial structure
    cell_size: int = 8
    pyramid_levels: int = 1
    scale_step: float = 2.0
    gamma: float = 3.0
    part_all_levels: bool = True
    # activation series
    smooth_sigma: float = 2.0
    prominence_frac: float = 0.2
    bin_width: float = 4.0
    stroke_window: float | None = None
    lambda_frac: float = 0.1
    min_frac: float = 0.5
    # key-pose model
    mode: str = "anti_symmetric"
    top_k: int | None = 5
    min_support: int = 2
    subwindow_frac: float = 0.2
    density_sigma_frac: float = 0.05
    prior_sigma_frac: float = 0.04
    sigma_min: float = 0.01
    postprocess: bool = True
    fuse_within: int = 2
    # evaluation
    match_window: float = 10.0
    seed: int = 0

    def validate(self) -> PipelineConfig:
        positive = ("cell_size", "pyramid_levels", "gamma", "smooth_sigma", "bin_width",
                    "lambda_frac", "min_frac", "min_support", "subwindow_frac",
                    "prior_sigma_frac", "sigma_min", "match_window")
        for name in positive:
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive, got {getattr(self, name)!r}")
        if not self.scale_step > 1:
            raise InvalidConfig("scale_step must exceed 1")
        if self.prominence_frac < 0 or self.density_sigma_frac < 0:
            raise InvalidConfig("prominence_frac and density_sigma_frac must be non-negative")
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}")
        if self.top_k is not None and self.top_k < 1:
            raise InvalidConfig("top_k must be at least 1 (or null for all series)")
        if self.stroke_window is not None and not self.stroke_window > 0:
            raise InvalidConfig("stroke_window must be positive")
        if self.fuse_within < 0:
            raise InvalidConfig("fuse_within must be non-negative")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> PipelineConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**d).validate()

    @classmethod
    def load(cls, path) -> PipelineConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"cannot read config {path}: {exc}") from None
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        return cls.from_dict(data)

    def override(self, **changes) -> PipelineConfig:
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes).validate()
