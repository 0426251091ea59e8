"""Experiment configuration: YAML document validated by pydantic."""
from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core import DriverParams
from .errors import ConfigurationError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ParamsConfig(_Strict):
    p: float = 2.2
    rho: float = 0.9
    T: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check(self):
        DriverParams(self.p, self.rho)
        return self


class DomainConfig(_Strict):
    box: List[List[float]] = [[-1.0, 1.0], [-1.0, 1.0]]
    n_points: int = Field(64, ge=1)
    n_pairs: int = Field(128, ge=1)
    h_fd: float = Field(1e-4, gt=0)
    sample_seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if any(len(row) != 2 or not row[0] < row[1] for row in self.box):
            raise ValueError("box rows must be [low, high] with low < high")
        return self

    @property
    def dim(self):
        return len(self.box)


class BasisConfig(_Strict):
    family: Literal["trig", "gauss", "algebraic"] = "gauss"
    modes: int = Field(2, ge=1)
    weights: Optional[List[float]] = None
    eta: float = Field(2.0, ge=0)
    width: Optional[float] = Field(None, gt=0)
    frequency: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check(self):
        # small default amplitudes keep the flow solver within tol_flow by level 12
        if self.weights is None:
            self.weights = [0.1] * self.modes
        else:
            if len(self.weights) != self.modes:
                raise ValueError("one weight per mode is required")
            if any(w < 0 for w in self.weights):
                raise ValueError("weights must be nonnegative")
        return self


class SolverConfig(_Strict):
    n_sub: int = Field(8, ge=1)
    tol_flow: float = Field(1e-6, gt=0)
    K_max: int = Field(12, ge=1, le=20)


class ExperimentSection(_Strict):
    kind: Literal["flow-solve", "wong-zakai", "diagnostics", "schilder", "ito-check"] = "flow-solve"
    driver: Literal["mode", "zero", "constant", "linear"] = "mode"
    velocity: Optional[List[float]] = None
    lam: float = 1.0
    levels: List[int] = [3, 4, 5, 6, 7, 8]
    replicates: int = Field(20, ge=1)
    seed: int = 0
    n_sim: Optional[int] = Field(None, ge=2)
    alpha: Optional[float] = Field(None, gt=0)
    beta: Optional[float] = Field(None, gt=0)
    eps: List[float] = [1e-3, 1e-2, 1e-1, 1.0, 10.0]

    @model_validator(mode="after")
    def _check(self):
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ValueError("levels must be strictly increasing")
        if any(k < 0 for k in self.levels):
            raise ValueError("levels must be nonnegative")
        return self


class OutputConfig(_Strict):
    directory: str = "roughflows_out"


class ExperimentConfig(_Strict):
    params: ParamsConfig = ParamsConfig()
    domain: DomainConfig = DomainConfig()
    basis: BasisConfig = BasisConfig()
    solver: SolverConfig = SolverConfig()
    experiment: ExperimentSection = ExperimentSection()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _check(self):
        v = self.experiment.velocity
        if v is not None and len(v) != self.domain.dim:
            raise ValueError("velocity must have the domain dimension")
        if self.experiment.driver == "linear" and self.domain.dim != 1:
            raise ValueError("the linear driver is one-dimensional")
        return self

    def driver_params(self):
        return DriverParams(self.params.p, self.params.rho)

    def box_array(self):
        return np.asarray(self.domain.box, dtype=float)

    def to_yaml(self):
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


def parse_config(data):
    """Validate a mapping; raises :class:`ConfigurationError` on any problem."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError("the configuration must be a mapping")
    try:
        return ExperimentConfig.model_validate(data)
    except (ValidationError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"invalid YAML: {exc}") from exc
    return parse_config(data)
