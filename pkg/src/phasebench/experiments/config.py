"""Experiment configuration: JSON schema, defaults, and reproducibility.

The JSON config holds a ``device`` object whose keys match the
``DeviceParams`` field names (durations in seconds, rates as
probabilities), plus optional experiment sections.  Every run derives all
randomness from one master seed; phases come from their own seed stream so
the phase set is independent of which sweep consumes it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..noise_model import DeviceParams

DEFAULT_MASTER_SEED = 2026
_PHASE_STREAM = 0x9e3779b9


@dataclass(frozen=True)
class ErrorMapSettings:
    t_grid_us: tuple = (5.0, 10.0, 20.0, 40.0, 80.0, 160.0)
    latency_grid_us: tuple = (0.2, 0.5, 1.0, 1.4, 2.0, 5.0, 10.0)
    resources: tuple = (50, 100)
    bits: int = 6
    p_assign: float = 0.01
    p_reset: float = 0.03


@dataclass(frozen=True)
class ShootoutSettings:
    bits: int = 5
    resources: tuple = (5, 10, 15, 25, 35, 50, 75, 100, 150, 250, 500)
    n_phases: int = 400


@dataclass(frozen=True)
class ResetDemoSettings:
    cycles: int = 4
    p_assign_0given1: float = 0.0104
    p_assign_1given0: float = 0.001
    target_single_cycle: float = 0.0165
    shots: int = 20000


@dataclass(frozen=True)
class ExperimentConfig:
    device: DeviceParams = field(default_factory=DeviceParams.paper_defaults)
    protocol: str = "both"
    bits: tuple = tuple(range(1, 11))
    resources: tuple = (50, 70, 200)
    n_phases: int = 600
    phase_list: tuple | None = None
    estimator: str = "top2_consecutive_weighted"
    master_seed: int = DEFAULT_MASTER_SEED
    quick: bool = False
    jobs: int = 1
    error_map: ErrorMapSettings = field(default_factory=ErrorMapSettings)
    shootout: ShootoutSettings = field(default_factory=ShootoutSettings)
    reset_demo: ResetDemoSettings = field(default_factory=ResetDemoSettings)

    def __post_init__(self):
        if not self.bits or any(m < 1 for m in self.bits):
            raise ValueError("bit counts must be positive")
        if not self.resources or any(r < 1 for r in self.resources):
            raise ValueError("resource budgets must be positive")
        if self.n_phases < 1:
            raise ValueError("need at least one phase")

    def protocols(self) -> tuple:
        if self.protocol == "both":
            return ("ipe", "kitaev")
        if self.protocol not in ("ipe", "kitaev"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        return (self.protocol,)

    def effective_phase_count(self) -> int:
        if self.phase_list is not None:
            return len(self.phase_list)
        return min(self.n_phases, 100) if self.quick else self.n_phases

    def phases(self) -> np.ndarray:
        """The phase set, in [0, 1); drawn from its own seed stream."""
        if self.phase_list is not None:
            arr = np.asarray(self.phase_list, dtype=float)
            if np.any(arr < 0) or np.any(arr >= 1):
                raise ValueError("explicit phases must lie in [0, 1)")
            return arr
        rng = np.random.default_rng(
            np.random.SeedSequence([self.master_seed, _PHASE_STREAM]))
        return rng.random(self.effective_phase_count())

    def config_hash(self) -> str:
        blob = json.dumps(_to_jsonable(self), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)


def _to_jsonable(cfg: ExperimentConfig) -> dict:
    out = asdict(cfg)
    return out


def _device_from_dict(d: dict) -> DeviceParams:
    known = set(DeviceParams.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown device keys: {sorted(unknown)}")
    kwargs = dict(d)
    for key in ("t1", "t2", "epg_single"):
        if key in kwargs and isinstance(kwargs[key], list):
            kwargs[key] = tuple(kwargs[key])
    return DeviceParams(**kwargs)


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from an optional JSON file plus CLI overrides."""
    data = {}
    if path is not None:
        with open(path) as fh:
            data = json.load(fh)
    kwargs = {}
    if "device" in data:
        kwargs["device"] = _device_from_dict(data["device"])
    for key in ("protocol", "estimator", "master_seed", "n_phases", "quick",
                "jobs"):
        if key in data:
            kwargs[key] = data[key]
    for key in ("bits", "resources"):
        if key in data:
            kwargs[key] = tuple(data[key])
    if "phases" in data:
        ph = data["phases"]
        if "list" in ph:
            kwargs["phase_list"] = tuple(ph["list"])
        if "count" in ph:
            kwargs["n_phases"] = int(ph["count"])
        if "seed" in ph:
            kwargs["master_seed"] = int(ph["seed"])
    for section, cls in (("error_map", ErrorMapSettings),
                         ("shootout", ShootoutSettings),
                         ("reset_demo", ResetDemoSettings)):
        if section in data:
            sect = dict(data[section])
            for k, v in sect.items():
                if isinstance(v, list):
                    sect[k] = tuple(v)
            kwargs[section] = cls(**sect)
    if overrides:
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kwargs)
