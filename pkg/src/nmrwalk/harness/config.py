"""Declarative experiment configuration."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from ..channels import P_MAX, GradientParams

MODES = ("ideal-walk", "classical-walk", "nmr-crotonic", "nmr-tce", "decoherence-sweep")
GRADIENT_MODES = ("independent", "collective")
MAX_STEPS = 8
DEFAULT_P_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class ContractViolation(RuntimeError):
    """A numerical guarantee (compiled fidelity, probability sum) did not hold."""


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "ideal-walk"
    steps: int = MAX_STEPS
    p: float = 0.0
    gradient: Optional[Mapping[str, Any]] = None
    gradient_mode: str = "independent"
    molecule: Optional[str] = None
    pulse: str = "soft"
    tomography: bool = False
    noise_sigma: float = 0.0
    seed: int = 0
    min_phi: float = 0.999
    p_grid: tuple[float, ...] = DEFAULT_P_GRID
    start_corner: int = 0

    def __post_init__(self):
        for name in ("p", "noise_sigma", "min_phi"):
            try:
                object.__setattr__(self, name, float(getattr(self, name)))
            except (TypeError, ValueError):
                raise ConfigError("must be a number", name) from None
        try:
            object.__setattr__(self, "p_grid", tuple(float(p) for p in self.p_grid))
        except (TypeError, ValueError):
            raise ConfigError("must be a list of numbers", "p_grid") from None
        if self.gradient is not None:
            object.__setattr__(self, "gradient", dict(self.gradient))
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"must be one of {', '.join(MODES)}", "mode")
        if not isinstance(self.steps, int) or isinstance(self.steps, bool) or not 0 <= self.steps <= MAX_STEPS:
            raise ConfigError(f"must be an integer in 0..{MAX_STEPS}", "steps")
        if not 0 <= self.p <= P_MAX:
            raise ConfigError(f"must lie in [0, {P_MAX:.3f}]", "p")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ConfigError(f"must be one of {GRADIENT_MODES}", "gradient_mode")
        if self.gradient is not None:
            try:
                self.gradient_params()
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc), "gradient") from None
            if self.p:
                raise ConfigError("give either p or gradient, not both", "gradient")
        if self.pulse not in ("soft", "ideal"):
            raise ConfigError("must be 'soft' or 'ideal'", "pulse")
        if self.noise_sigma < 0:
            raise ConfigError("must be non-negative", "noise_sigma")
        if self.noise_sigma and not self.tomography:
            raise ConfigError("measurement noise needs tomography on", "noise_sigma")
        if not 0 < self.min_phi <= 1:
            raise ConfigError("must lie in (0, 1]", "min_phi")
        if any(not 0 <= p <= 0.5 for p in self.p_grid):
            raise ConfigError("sweep values must lie in [0, 0.5]", "p_grid")
        if self.start_corner not in range(4):
            raise ConfigError("must be 0..3", "start_corner")

    def gradient_params(self) -> Optional[GradientParams]:
        if self.gradient is None:
            return None
        g = dict(self.gradient)
        g["gamma_per_spin"] = tuple(g.get("gamma_per_spin", ()))
        return GradientParams(**g)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["p_grid"] = list(self.p_grid)
        return d

    def hash(self) -> str:
        """sha256 of the canonical JSON form; equal configs hash equal."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in fields(cls)}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"unknown field(s) {', '.join(extra)}", extra[0])
        d = dict(data)
        if "p_grid" in d:
            d["p_grid"] = tuple(d["p_grid"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    """Experiment config from a YAML (or JSON) file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config ({exc.strerror})", str(path)) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"unparseable config: {exc}", str(path)) from None
    return ExperimentConfig.from_dict(data or {})
