"""Run configuration: one JSON document, strict schema, defaults filled in."""
from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from . import families
from .modal import Frequencies, ModalDamping, StiffnessPerturbation, System


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ConstantDamping(_Strict):
    kind: Literal["constant"]
    a0: float = Field(ge=0)


class IndicatorDamping(_Strict):
    kind: Literal["indicator"]
    c: float = Field(ge=0)
    alpha: float = Field(ge=0, le=1)
    beta: float = Field(ge=0, le=1)

    @model_validator(mode="after")
    def _interval(self):
        if not self.alpha < self.beta:
            raise ValueError("alpha must be smaller than beta")
        return self


class CustomDamping(_Strict):
    kind: Literal["custom"]
    matrix: Optional[List[List[float]]] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.matrix is None) == (self.path is None):
            raise ValueError("give exactly one of matrix or path")
        return self


class StiffnessConfig(_Strict):
    p: Optional[float] = Field(default=None, ge=0)
    matrix: Optional[List[List[float]]] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        if sum(x is not None for x in (self.p, self.matrix, self.path)) != 1:
            raise ValueError("give exactly one of p, matrix or path")
        return self


class SystemConfig(_Strict):
    family: Literal["hinged-beam", "wave", "clamped-free", "custom"]
    n_modes: int = Field(ge=3, le=512)
    mu: Optional[List[float]] = None
    damping: Optional[Union[ConstantDamping, IndicatorDamping, CustomDamping]] = Field(
        default=None, discriminator="kind")
    stiffness: Optional[StiffnessConfig] = None

    @model_validator(mode="after")
    def _consistent(self):
        if self.damping is not None and self.stiffness is not None:
            raise ValueError("damping and stiffness are mutually exclusive")
        if self.family == "custom":
            if self.mu is None or len(self.mu) != self.n_modes:
                raise ValueError("custom family needs mu with n_modes entries")
        elif self.mu is not None:
            raise ValueError("mu is only allowed for the custom family")
        return self


class AnalysisConfig(_Strict):
    kappa: float = Field(default=0.5, gt=0, lt=1)
    nodes_per_side: int = Field(default=32, ge=4, le=1024)
    trust_fraction: float = Field(default=0.5, gt=0, le=1)


class SimulationConfig(_Strict):
    horizon_policy: Union[Literal["auto"], float] = "auto"
    samples: int = Field(default=2001, ge=11)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)
    method: Literal["eigen-expansion", "rk4"] = "rk4"

    @model_validator(mode="after")
    def _horizon(self):
        if not isinstance(self.horizon_policy, str) and self.horizon_policy <= 0:
            raise ValueError("horizon must be positive")
        return self


class RunConfig(_Strict):
    system: SystemConfig
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    output_dir: str = "out"
    _base_dir: Path = PrivateAttr(default=Path("."))

    @property
    def horizon(self) -> Optional[float]:
        h = self.simulation.horizon_policy
        return None if h == "auto" else float(h)


def _describe(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_config(data: dict, base_dir: Union[str, Path] = ".") -> RunConfig:
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_describe(err)) from None
    cfg._base_dir = Path(base_dir)
    return cfg


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(data, path.parent)


def _load_matrix(cfg: RunConfig, matrix, path, n, what):
    if path is not None:
        p = cfg._base_dir / path
        try:
            m = np.load(p) if p.suffix == ".npy" else np.loadtxt(p, delimiter=",", ndmin=2)
        except OSError as exc:
            raise ConfigError(f"system.{what}.path: {exc}") from None
    else:
        m = np.asarray(matrix, dtype=float)
    if m.shape != (n, n):
        raise ConfigError(f"system.{what}: matrix shape {m.shape}, expected {(n, n)}")
    return m


def build_system(cfg: RunConfig) -> System:
    """Frequencies and perturbation described by the config."""
    sc = cfg.system
    n = sc.n_modes
    try:
        if sc.family == "hinged-beam":
            freqs = families.hinged_beam(n)
        elif sc.family == "wave":
            freqs = families.wave_string(n)
        elif sc.family == "clamped-free":
            freqs = families.clamped_free_beam(n)
        else:
            freqs = Frequencies(sc.mu, "custom")
    except ValueError as exc:
        raise ConfigError(f"system: {exc}") from None
    damping = stiffness = None
    try:
        dc = sc.damping
        if isinstance(dc, ConstantDamping):
            damping = families.constant_damping(n, dc.a0)
        elif isinstance(dc, IndicatorDamping):
            damping = families.indicator_damping(freqs, dc.c, dc.alpha, dc.beta)
        elif isinstance(dc, CustomDamping):
            damping = ModalDamping(_load_matrix(cfg, dc.matrix, dc.path, n, "damping"))
        kc = sc.stiffness
        if kc is not None:
            if kc.p is not None:
                stiffness = families.axial_force_stiffness(freqs, kc.p)
            else:
                stiffness = StiffnessPerturbation.from_matrix(
                    _load_matrix(cfg, kc.matrix, kc.path, n, "stiffness"), freqs)
        System(freqs, damping, stiffness).generator
    except ValueError as exc:
        raise ConfigError(f"system: {exc}") from None
    return System(freqs, damping, stiffness)
