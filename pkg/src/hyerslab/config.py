"""Experiment configuration files."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .linmap import PerturbationModel

DEFAULT_TOLERANCES = {"iteration": 1e-8, "defect": 1e-6, "bound": 1e-9, "uniqueness": 1e-6}
DEFAULT_SCHEDULES = ((30, 1e-8), (45, 1e-11))
MODES = ("stability", "superstability")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    id: str
    algebra: dict
    mode: str = "stability"
    bimodule: Any = "self"
    solution_kind: str = "generalized_jordan_pair"
    solution_index: int = 0
    perturbation_f: PerturbationModel = field(default_factory=PerturbationModel)
    perturbation_g: PerturbationModel = field(default_factory=PerturbationModel)
    decay: PerturbationModel | None = None
    control: dict = field(default_factory=lambda: {"kind": "auto", "theta": "measured"})
    direction: str = "auto"
    samples: int = 1000
    seed: int = 0
    n_max: int = 40
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    schedules: tuple = DEFAULT_SCHEDULES
    norm_range: tuple = (1e-2, 1e2)
    slope_window: tuple = (5, 25)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.samples < 100:
            raise ConfigError("samples must be at least 100")
        if self.direction not in ("ascending", "descending", "auto"):
            raise ConfigError(f"invalid direction {self.direction!r}")
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(self.tolerances)
        object.__setattr__(self, "tolerances", tol)

    @property
    def growth_exponent(self) -> float:
        p = self.perturbation_f.growth_exponent
        return 0.0 if p is None else p

    def resolved_direction(self) -> str:
        if self.direction != "auto":
            return self.direction
        return "ascending" if self.growth_exponent < 1 else "descending"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "mode": self.mode,
            "algebra": self.algebra,
            "bimodule": self.bimodule,
            "solution_kind": self.solution_kind,
            "solution_index": self.solution_index,
            "perturbation": {
                "f": self.perturbation_f.to_dict(),
                "g": self.perturbation_g.to_dict(),
                "decay": None if self.decay is None else self.decay.to_dict(),
            },
            "control": self.control,
            "direction": self.direction,
            "resolved_direction": self.resolved_direction(),
            "samples": self.samples,
            "seed": self.seed,
            "n_max": self.n_max,
            "tolerances": self.tolerances,
            "schedules": [list(s) for s in self.schedules],
            "norm_range": list(self.norm_range),
            "slope_window": list(self.slope_window),
        }

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "tol" in kw:
            tol = dict(self.tolerances)
            tol["iteration"] = kw.pop("tol")
            kw["tolerances"] = tol
        return dataclasses.replace(self, **kw)


def shipped_path(kind: str, name: str) -> Path:
    """Path of a file shipped in ``hyerslab/data/<kind>/``."""
    return Path(str(resources.files("hyerslab") / "data" / kind / name))


def shipped_configs():
    root = resources.files("hyerslab") / "data" / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def resolve_path(path, kind="configs") -> Path:
    p = Path(path)
    if p.exists():
        return p
    for candidate in (shipped_path(kind, str(p)), shipped_path(kind, p.name)):
        if not p.is_absolute() and candidate.exists():
            return candidate
    raise FileNotFoundError(path)


def load_algebra_spec(ref, base_dir: Path | None = None) -> dict:
    if isinstance(ref, dict):
        return ref
    p = Path(ref)
    if base_dir is not None and not p.is_absolute() and (base_dir / p).exists():
        p = base_dir / p
    p = resolve_path(p, "algebras")
    with open(p) as fh:
        return json.load(fh)


def config_from_dict(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    try:
        pert = data.get("perturbation", {})
        kwargs = dict(
            id=str(data["id"]),
            algebra=load_algebra_spec(data["algebra"], base_dir),
            mode=data.get("mode", "stability"),
            bimodule=data.get("bimodule", "self"),
            solution_kind=data.get("solution_kind", "generalized_jordan_pair"),
            solution_index=int(data.get("solution_index", 0)),
            perturbation_f=PerturbationModel.from_dict(pert.get("f")),
            perturbation_g=PerturbationModel.from_dict(pert.get("g")),
            decay=None if pert.get("decay") is None else PerturbationModel.from_dict(pert["decay"]),
            control=data.get("control", {"kind": "auto", "theta": "measured"}),
            direction=data.get("direction", "auto"),
            samples=int(data.get("samples", 1000)),
            seed=int(data.get("seed", 0)),
            n_max=int(data.get("n_max", 40)),
            tolerances=data.get("tolerances", {}),
        )
        if "schedules" in data:
            kwargs["schedules"] = tuple((int(n), float(t)) for n, t in data["schedules"])
        if "norm_range" in data:
            kwargs["norm_range"] = tuple(float(v) for v in data["norm_range"])
        if "slope_window" in data:
            kwargs["slope_window"] = tuple(int(v) for v in data["slope_window"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed experiment config: {exc!r}") from exc
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    p = resolve_path(path, "configs")
    with open(p) as fh:
        data = json.load(fh)
    return config_from_dict(data, p.parent)
