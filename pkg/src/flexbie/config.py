"""Run configuration for the ``flexbie`` command line tool.

A run is described by one JSON document validated against :class:`RunConfig`.
The published schema lives in ``docs/config.schema.json`` and is regenerated
with ``python3 -m flexbie.config``.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .geometry import TrigCurve, curve_circle, curve_droplet, curve_starfish

SCENARIOS = ("analytic-test", "scatter", "far-field", "kernel-check", "jump-check", "multi-scatter")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, frozen=True)


class Transform(_Strict):
    rotate: float = 0.0
    translate: tuple[float, float] = (0.0, 0.0)
    scale: float = Field(1.0, gt=0.0)


class CurveSpec(_Strict):
    type: Literal["circle", "droplet", "starfish"]
    params: dict[str, float] = Field(default_factory=dict)
    transform: Transform = Transform()

    @field_validator("params")
    @classmethod
    def _finite(cls, v):
        for key, val in v.items():
            if not math.isfinite(val):
                raise ValueError(f"params.{key} must be finite")
        return v

    @model_validator(mode="after")
    def _known_params(self):
        allowed = {"circle": {"radius"}, "droplet": set(), "starfish": {"A", "n_arms"}}[self.type]
        extra = set(self.params) - allowed
        if extra:
            raise ValueError(f"unknown params for {self.type}: {sorted(extra)}")
        return self

    def build(self, component_id: int = 0) -> TrigCurve:
        if self.type == "circle":
            base = curve_circle(self.params.get("radius", 1.0))
        elif self.type == "droplet":
            base = curve_droplet()
        else:
            n_arms = self.params.get("n_arms", 3)
            if n_arms != int(n_arms):
                raise ValueError("n_arms must be an integer")
            base = curve_starfish(self.params.get("A", 0.3), int(n_arms))
        t = self.transform
        return base.transformed(t.rotate, t.translate, t.scale, component_id)


class Discretization(_Strict):
    n_panels: int = Field(16, ge=2)
    order: int = Field(16, ge=4, le=24)


class Incident(_Strict):
    type: Literal["plane_wave", "point_source"] = "plane_wave"
    angle: float = 0.0  # direction of travel of the plane wave, radians
    source: tuple[float, float] = (1.35, 0.0)


class GridSpec(_Strict):
    xlim: tuple[float, float]
    ylim: tuple[float, float]
    nx: int = Field(ge=1)
    ny: int = Field(ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if not (self.xlim[0] <= self.xlim[1] and self.ylim[0] <= self.ylim[1]):
            raise ValueError("grid limits must be ordered (low, high)")
        return self


class FarFieldSpec(_Strict):
    n_theta: int = Field(360, ge=1)
    radius: float = Field(1000.0, gt=0.0)


class AnalyticSpec(_Strict):
    panels: list[int] = Field(default_factory=lambda: [2, 4, 8, 16])
    measure_scale: float = Field(1.5, gt=0.0)
    n_measure: int = Field(12, ge=1)
    error_bound: float = Field(1e-9, gt=0.0)


class Tolerances(_Strict):
    gmres: float = Field(1e-12, ge=1e-13)
    near: float = Field(1e-13, gt=0.0)
    limit: float = Field(1e-6, gt=0.0)
    jump: float = Field(1e-4, gt=0.0)
    hilbert: float = Field(1e-8, gt=0.0)


class OutputSpec(_Strict):
    dir: str = "flexbie-out"


class RunConfig(_Strict):
    scenario: Optional[Literal[SCENARIOS]] = None  # type: ignore[valid-type]
    geometry: list[CurveSpec] = Field(min_length=1)
    bc: Literal["clamped", "supported", "free"] = "free"
    bcs: Optional[list[Literal["clamped", "supported", "free"]]] = None
    k: float = Field(gt=0.0)
    nu: float = Field(ge=-1.0, lt=0.5)
    side: Literal["interior", "exterior"] = "exterior"
    discretization: Discretization = Discretization()
    incident: Incident = Incident()
    grid: Optional[GridSpec] = None
    far_field: Optional[FarFieldSpec] = None
    analytic: AnalyticSpec = AnalyticSpec()
    solver: Literal["dense", "gmres"] = "dense"
    tolerances: Tolerances = Tolerances()
    output: OutputSpec = OutputSpec()

    def bc_list(self) -> list[str]:
        return list(self.bcs) if self.bcs else [self.bc]

    def curves(self) -> list[TrigCurve]:
        return [g.build(i) for i, g in enumerate(self.geometry)]


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return RunConfig.model_validate_json(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def ensure_writable(out_dir: str | os.PathLike) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def schema_json() -> str:
    return json.dumps(RunConfig.model_json_schema(), indent=2, sort_keys=True) + "\n"


if __name__ == "__main__":
    print(schema_json(), end="")
