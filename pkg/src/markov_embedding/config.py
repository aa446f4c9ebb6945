from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .embedding import ThresholdConfig
from .models import DEFAULT_TRUNCATION_TOL, FiniteEnvConfig, JcConfig, ModelConfig, SpinBosonConfig
from .validators import parse_complex, validate_config_basic

DEFAULT_CONFIG_NAME = "embedding.config.yml"


def _as_complex(value: Any) -> complex:
    if isinstance(value, (list, tuple)):
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return parse_complex(value)
    return complex(value)


@dataclass
class ModelSection:
    kind: str = "finite"
    # physical parameters; keys follow the model record fields
    params: Dict[str, Any] = field(default_factory=dict)

    def to_model_config(self, seed: int = 0, overrides: Optional[Dict[str, Any]] = None) -> ModelConfig:
        p = dict(self.params)
        p.update({k: v for k, v in (overrides or {}).items() if v is not None})
        if self.kind == "finite":
            return FiniteEnvConfig(
                d_E=int(p.get("d_E", 2)),
                tau=float(p.get("tau", 0.2)),
                d=int(p.get("d", 2)),
                a_unit=float(p.get("a_unit", 1.0)),
                a_diss=float(p.get("a_diss", 0.1)),
                generator_seed=int(p.get("generator_seed", seed)),
                rate_norm=str(p.get("rate_norm", "total")),
            )
        if self.kind == "jc":
            return JcConfig(
                gamma=float(p.get("gamma", 0.05)),
                g=float(p.get("g", 2.5)),
                alpha=_as_complex(p.get("alpha", 1.1)),
                tau=float(p.get("tau", 0.03)),
                n_levels=int(p.get("n_levels", 0)),
            )
        if self.kind == "spin-boson":
            return SpinBosonConfig(
                Delta=float(p.get("Delta", 0.5)),
                g=float(p.get("g", 0.5)),
                gamma=float(p.get("gamma", 0.05)),
                omega0=float(p.get("omega0", 1.0)),
                tau=float(p.get("tau", 0.15)),
                n_levels=int(p.get("n_levels", 8)),
                check_convergence=bool(p.get("check_convergence", False)),
                convergence_tol=float(p.get("convergence_tol", DEFAULT_TRUNCATION_TOL)),
            )
        raise ValueError(f"Unknown model kind: {self.kind!r}")


@dataclass
class DatasetSection:
    L: int = 4
    T: int = 200
    sigma: float = 0.0
    seed: int = 0


@dataclass
class FitSection:
    K: int = 75
    sigma: Optional[float] = None  # None means: use the dataset's noise_sigma
    floor: float = 1e-12
    project: bool = False
    variant: str = "projected"

    def threshold(self, fallback_sigma: float = 0.0) -> ThresholdConfig:
        sigma = fallback_sigma if self.sigma is None else self.sigma
        return ThresholdConfig(sigma=float(sigma), floor=float(self.floor))


@dataclass
class SweepSection:
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    workers: int = 1


@dataclass
class LoggingSection:
    level: str = "INFO"


@dataclass
class AppConfig:
    model: ModelSection = field(default_factory=ModelSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    fit: FitSection = field(default_factory=FitSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    logging: LoggingSection = field(default_factory=LoggingSection)


def _load_raw_config(path: Path) -> Dict[str, Any]:
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ValueError("Config root must be a mapping")
    return data


def load_config(path: Path, validate: bool = True) -> AppConfig:
    raw = _load_raw_config(Path(path))

    if validate:
        errors = validate_config_basic(raw)
        if errors:
            raise ValueError("Invalid config:\n  - " + "\n  - ".join(errors))

    model_raw = raw.get("model") or {}
    model = ModelSection(
        kind=str(model_raw.get("kind", "finite")),
        params={k: v for k, v in model_raw.items() if k != "kind"},
    )

    ds_raw = raw.get("dataset") or {}
    dataset = DatasetSection(
        L=int(ds_raw.get("L", 4)),
        T=int(ds_raw.get("T", 200)),
        sigma=float(ds_raw.get("sigma", 0.0)),
        seed=int(ds_raw.get("seed", 0)),
    )

    fit_raw = raw.get("fit") or {}
    fit = FitSection(
        K=int(fit_raw.get("K", 75)),
        sigma=float(fit_raw["sigma"]) if fit_raw.get("sigma") is not None else None,
        floor=float(fit_raw.get("floor", 1e-12)),
        project=bool(fit_raw.get("project", False)),
        variant=str(fit_raw.get("variant", "projected")),
    )

    sweep_raw = raw.get("sweep") or {}
    sweep = SweepSection(
        seeds=[int(s) for s in (sweep_raw.get("seeds") or [0, 1, 2, 3, 4])],
        workers=int(sweep_raw.get("workers", 1)),
    )

    logging_raw = raw.get("logging") or {}
    logging_section = LoggingSection(level=str(logging_raw.get("level", "INFO")).upper())

    return AppConfig(model=model, dataset=dataset, fit=fit, sweep=sweep, logging=logging_section)


STARTER_CONFIG = """\
# markov-embedding experiment configuration
# Command-line flags override every value below.

model:
  kind: finite          # finite | jc | spin-boson
  d_E: 3                # finite: environment dimension
  rate_norm: total      # finite: total | per-element scaling of the random rate matrix
  tau: 0.2              # time step
  # jc:          gamma: 0.05, g: 2.5, alpha: 1.1, tau: 0.03, n_levels: 0 (auto)
  # spin-boson:  Delta: 0.5, g: 0.5, gamma: 0.05, omega0: 1.0, tau: 0.15, n_levels: 8,
  #              check_convergence: false, convergence_tol: 1.0e-3
  # jc alpha may be complex: [re, im] or "1.1+0.2j"

dataset:
  L: 4                  # training trajectories (one extra test trajectory is simulated)
  T: 200                # states per trajectory
  sigma: 0.001          # noise std on real and imaginary parts
  seed: 7

fit:
  K: 75                 # memory depth
  # sigma: 0.001        # threshold noise level; defaults to the dataset's sigma
  floor: 1.0e-12        # relative threshold used when sigma is 0
  project: false        # project predictions onto density matrices
  variant: projected    # projected | literal

sweep:
  seeds: [0, 1, 2, 3, 4]
  workers: 1

logging:
  level: INFO
"""
