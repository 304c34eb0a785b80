"""
Run configuration schemas - pydantic validation for settings.yaml and CLI overrides.

Every numeric default used by the library lives in config/settings.yaml and is
validated here once; library functions receive these objects instead of loose dicts.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Tolerances(BaseModel):
    model_config = ConfigDict(frozen=True)

    hamiltonian: float = Field(1e-12, gt=0)
    unitarity: float = Field(1e-12, gt=0)
    invariance: float = Field(1e-9, gt=0)
    sp: float = Field(1e-9, gt=0)
    gas: float = Field(1e-9, gt=0)
    nd: float = Field(1e-6, gt=0)


class RecordFlags(BaseModel):
    """Which series a trajectory keeps."""

    model_config = ConfigDict(frozen=True)

    v: bool = True
    ln_v: bool = True
    full_state: bool = False
    jump_times: bool = True
    martingale_terms: bool = True


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    dt: float = Field(1e-4, gt=0)
    t_final: float = Field(10.0, ge=0)
    seed: int = Field(20240101, ge=0, lt=2**64)
    n_traj: int = Field(8, ge=1)
    record: RecordFlags = RecordFlags()
    v_floor: float = Field(1e-12, gt=0)
    record_stride: int = Field(1, ge=1)
    batch_size: int = Field(32, ge=1)

    @model_validator(mode="after")
    def check_horizon(self):
        if self.t_final > 0 and self.dt > self.t_final:
            raise ValueError(f"dt={self.dt} exceeds t_final={self.t_final}")
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


class OptimizerConfig(BaseModel):
    """Multi-start search for the alpha-function minimum."""

    model_config = ConfigDict(frozen=True)

    starts: int = Field(32, ge=1)
    max_iter: int = Field(500, ge=1)
    grid_points: int = Field(10_000, ge=1)
    seed: int = Field(7, ge=0)
    method: str = "L-BFGS-B"


class CertificateConfig(BaseModel):
    """eta schedule for the irreducible perturbation of the reduced generator."""

    model_config = ConfigDict(frozen=True)

    eta_start_fraction: float = Field(0.1, gt=0)
    eta_shrink: float = Field(0.5, gt=0, lt=1)
    eta_min: float = Field(1e-12, gt=0)
    tolerance: float = Field(1e-8, gt=0)


class AnalysisConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    skip_fraction: float = Field(1.0 / 3.0, ge=0, lt=1)
    min_points: int = Field(10, ge=2)
    slack_fraction: float = Field(0.2, ge=0)
    mean_flow_points: int = Field(200, ge=10)


class PanelConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    l_S: float
    l_R: float = 0.0
    t_final: float = Field(gt=0)


class Fig1Config(BaseModel):
    model_config = ConfigDict(frozen=True)

    l_P: float = 1.0
    left: PanelConfig = PanelConfig(l_S=0.5, l_R=0.0, t_final=10.0)
    right: PanelConfig = PanelConfig(l_S=2.0, l_R=0.0, t_final=7.0)
    n_traj: int = Field(100, ge=2)
    dt: float = Field(1e-4, gt=0)
    seed: int = Field(1, ge=0)
    record_stride: int = Field(10, ge=1)
    band: float = Field(0.15, gt=0)
    mean_band: float = Field(0.10, gt=0)
    sample_trajectories: int = Field(8, ge=0)


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    tolerances: Tolerances = Tolerances()
    simulation: SimConfig = SimConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    certificate: CertificateConfig = CertificateConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    fig1: Fig1Config = Fig1Config()
    threads: Optional[int] = Field(None, ge=1)


class CliInvocation(BaseModel):
    """Validated command line: subcommand, paths and numeric overrides."""

    subcommand: str
    model_path: Optional[str] = None
    output_dir: str = "outputs"
    dt: Optional[float] = Field(None, gt=0)
    t_final: Optional[float] = Field(None, ge=0)
    n_traj: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    epsilon: Optional[float] = Field(None, gt=0)
    starts: Optional[int] = Field(None, ge=1)

    @field_validator("subcommand")
    @classmethod
    def validate_subcommand(cls, v: str) -> str:
        allowed = {"check", "rates", "simulate", "ensemble", "exponent", "reproduce-fig1"}
        if v not in allowed:
            raise ValueError(f"Unknown subcommand: {v}")
        return v

    @model_validator(mode="after")
    def require_model(self):
        if self.subcommand != "reproduce-fig1" and not self.model_path:
            raise ValueError(f"--model is required for '{self.subcommand}'")
        return self

    def sim_config(self, base: SimConfig) -> SimConfig:
        """Apply numeric overrides on top of the configured defaults."""
        overrides = {
            key: value
            for key, value in {
                "dt": self.dt,
                "t_final": self.t_final,
                "n_traj": self.n_traj,
                "seed": self.seed,
            }.items()
            if value is not None
        }
        return SimConfig.model_validate({**base.model_dump(), **overrides})

    def optimizer_config(self, base: OptimizerConfig) -> OptimizerConfig:
        if self.starts is None:
            return base
        return base.model_copy(update={"starts": self.starts})
