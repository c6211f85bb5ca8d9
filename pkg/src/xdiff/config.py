#!/usr/bin/env python3
"""
XDiff Configuration
Environment settings plus the validated JSON run configuration
"""
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .learning.adam import AdamState
from .learning.lagrangian import LagrangianState
from .learning.trainer import TrainConfig
from .numerics.field import Grid
from .numerics.influence import RbfBasis
from .numerics.scheme import SchemeConfig

try:
    from dotenv import load_dotenv
    HAS_DOTENV = True
except ImportError:
    load_dotenv = None
    HAS_DOTENV = False


def _env_flag(name: str, default: bool = False) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


@dataclass(frozen=True)
class Settings:
    """Process-wide settings read from the environment (and .env)"""
    log_level: str = "INFO"
    workers: int = 1
    deterministic: bool = False
    output_dir: str = "output"
    run_slow: bool = False

    @classmethod
    def from_env(cls) -> "Settings":
        if HAS_DOTENV:
            load_dotenv()
        try:
            workers = int(os.getenv("XDIFF_WORKERS", "1"))
        except ValueError as e:
            raise ConfigError(f"XDIFF_WORKERS must be an integer: {e}") from e
        return cls(
            log_level=os.getenv("XDIFF_LOG_LEVEL", "INFO").upper(),
            workers=max(workers, 1),
            deterministic=_env_flag("XDIFF_DETERMINISTIC"),
            output_dir=os.getenv("XDIFF_OUTPUT_DIR", "output"),
            run_slow=_env_flag("XDIFF_RUN_SLOW"),
        )


# (sigma, dt, M) rows of the reference comparison experiments
_PRESET_ROWS = (
    (10, 0.05, 10), (10, 0.05, 15), (10, 0.1, 10), (10, 0.125, 10), (10, 0.125, 12),
    (20, 0.1, 10), (20, 0.1, 15), (20, 0.1, 20), (20, 0.125, 20), (20, 0.2, 30),
)


def preset_name(sigma: float, dt: float, steps: int) -> str:
    return f"sigma{sigma:g}_dt{dt:g}_m{steps}"


PRESETS: Dict[str, Tuple[float, float, int]] = {
    preset_name(s, dt, m): (float(s), dt, m) for s, dt, m in _PRESET_ROWS
}


def apply_preset(name: str) -> Dict[str, Any]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}'; choose from {', '.join(PRESETS)}")
    sigma, dt, steps = PRESETS[name]
    return {"sigma": sigma, "dt": dt, "steps": steps}


class RunConfig(BaseModel):
    """Flat run configuration; units are listed in configs/README.md"""
    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = None

    # noise and scheme
    sigma: float = Field(10.0, ge=0)
    dt: float = Field(0.05, gt=0)
    steps: int = Field(10, ge=0)
    theta: int = 1
    h1: float = Field(1.0, gt=0)
    h2: float = Field(1.0, gt=0)

    # influence-function basis
    a_min: float = -20.0
    a_max: float = 20.0
    p: int = Field(151, ge=2)
    nu: float = Field(0.2, gt=0)

    # training
    n1: int = Field(100, ge=2)
    n2: int = Field(100, ge=2)
    batch_size: int = Field(50, ge=1)
    k_max: int = Field(2000, ge=0)
    seed: int = Field(0, ge=0)
    init_lambda: Optional[float] = Field(None, ge=0)

    # augmented Lagrangian
    mu_bar: float = Field(2.0, gt=0)
    rho: float = Field(6e5, gt=0)
    tau: float = Field(0.5, gt=0, le=1)
    gamma: float = Field(2.0, gt=1)

    # Adam
    adam_alpha: float = Field(1e-3, ge=0)
    adam_beta1: float = Field(0.9, ge=0, lt=1)
    adam_beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)

    # stability parameters
    eps: float = Field(0.01, gt=0)
    zeta: float = Field(0.5, gt=0, lt=1)

    # data and outputs
    corpus_dir: Optional[str] = None
    synth_count: int = Field(0, ge=0)
    synth_width: int = Field(64, ge=8)
    synth_height: int = Field(64, ge=8)
    test_dir: Optional[str] = None
    out: str = "output"

    # bookkeeping
    log_every: int = Field(10, ge=0)
    checkpoint_every: int = Field(0, ge=0)
    heldout_every: int = Field(0, ge=0)
    heldout_size: int = Field(0, ge=0)
    workers: Optional[int] = Field(None, ge=1)
    deterministic: bool = False

    @model_validator(mode="before")
    @classmethod
    def _fill_preset(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("preset"):
            filled = apply_preset(str(data["preset"]))
            data = {**filled, **data}
        return data

    @field_validator("theta")
    @classmethod
    def _theta_is_scheme(cls, value: int) -> int:
        if value not in (0, 1):
            raise ValueError("theta must be 0 (explicit) or 1 (semi-implicit)")
        return value

    @model_validator(mode="after")
    def _check_ranges(self) -> "RunConfig":
        if self.a_min >= self.a_max:
            raise ValueError(f"a_min ({self.a_min}) must be below a_max ({self.a_max})")
        if self.corpus_dir is not None and self.synth_count:
            raise ValueError("set either corpus_dir or synth_count, not both")
        return self

    # Loading

    @classmethod
    def from_dict(cls, raw: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        data = dict(raw)
        for key, value in (overrides or {}).items():
            if value is not None:
                data[key] = value
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(format_validation_error(e)) from e

    @classmethod
    def load(cls, path, overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_dict(raw, overrides)

    def echo(self) -> Dict[str, Any]:
        """The keys that were given explicitly, as JSON values"""
        return self.model_dump(mode="json", exclude_unset=True)

    def config_hash(self) -> str:
        """Hash of every setting except the output location"""
        payload = json.dumps(self.model_dump(mode="json", exclude={"out"}), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    # Builders

    @property
    def stopping_time(self) -> float:
        return self.dt * self.steps

    def grid(self) -> Grid:
        return Grid(self.n1, self.n2, self.h1, self.h2)

    def basis(self) -> RbfBasis:
        return RbfBasis(self.p, self.a_min, self.a_max, self.nu)

    def deploy_scheme(self, grid: Grid, lam: float = 0.0) -> SchemeConfig:
        return SchemeConfig(self.dt, self.steps, grid, theta=self.theta, lam=lam)

    def train_config(self, settings: Optional[Settings] = None, progress: bool = True) -> TrainConfig:
        settings = settings or Settings()
        workers = self.workers if self.workers is not None else settings.workers
        return TrainConfig(
            scheme=SchemeConfig(self.dt, self.steps, self.grid(), theta=0),
            batch_size=self.batch_size,
            sigma=self.sigma,
            k_max=self.k_max,
            seed=self.seed,
            basis=self.basis(),
            log_every=self.log_every,
            checkpoint_every=self.checkpoint_every,
            heldout_every=self.heldout_every,
            heldout_size=self.heldout_size,
            workers=workers,
            deterministic=self.deterministic or settings.deterministic,
            progress=progress,
            eps=self.eps,
            zeta=self.zeta,
        )

    def lagrangian(self) -> LagrangianState:
        return LagrangianState.initial(self.p, mu_bar=self.mu_bar, rho=self.rho, tau=self.tau, gamma=self.gamma)

    def adam(self) -> AdamState:
        return AdamState.initial(4 * self.p + 1, alpha=self.adam_alpha, beta1=self.adam_beta1,
                                 beta2=self.adam_beta2, eps_adam=self.adam_eps)


def format_validation_error(error: ValidationError) -> str:
    """One message listing every invalid field"""
    lines = []
    for item in error.errors():
        where = ".".join(str(part) for part in item["loc"]) or "config"
        lines.append(f"  {where}: {item['msg']}")
    return f"invalid configuration ({len(lines)} error(s)):\n" + "\n".join(lines)


def reference_defaults() -> RunConfig:
    """Reference experiment settings: A=[-20, 20], P=151, nu=0.2, mu_bar=2, rho=6e5, tau=0.5, gamma=2"""
    return RunConfig(
        a_min=-20.0, a_max=20.0, p=151, nu=0.2,
        mu_bar=2.0, rho=6e5, tau=0.5, gamma=2.0,
        k_max=2000, batch_size=50, n1=100, n2=100,
    )


def desk_defaults() -> RunConfig:
    """Scaled-down run that fits on a laptop: 10 synthetic 64x64 images, P=31"""
    return RunConfig(
        sigma=10.0, dt=0.05, steps=10, p=31, nu=1.0,
        n1=64, n2=64, batch_size=10, k_max=200,
        synth_count=10, synth_width=64, synth_height=64,
        heldout_every=10, checkpoint_every=50,
    )
