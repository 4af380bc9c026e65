"""Run configuration: schema, file loading, and problem assembly.

Configs are YAML or JSON files validated against a strict schema (unknown
keys are rejected, violations name the offending key).  ``build_problem``
turns a validated config into a ProblemSpec ready for the engine.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .engine import IterateOptions
from .errors import ConfigError
from .fields import sin2_envelope
from .functionals import (
    FinalTimeFunctional,
    PowerFunctional,
    RealPartFunctional,
    SquareModulusFunctional,
)
from .grids import TimeGrid
from .models import make_fourier_grid, make_lambda, make_spin_spin, make_tls
from .problem import ProblemSpec
from .second_order import SigmaParams

SCHEMA_VERSION = 1


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(StrictModel):
    total_time: float = Field(gt=0)
    n_steps: int = Field(ge=1)


class GuessConfig(StrictModel):
    eps0: float = Field(ge=0, default=0.3)
    omega: Optional[float] = Field(ge=0, default=None)  # None: model default


class FunctionalConfig(StrictModel):
    kind: Literal["sm", "re", "power"] = "sm"
    lambda0: float = Field(gt=0, default=1.0)
    p: int = Field(ge=1, default=2)
    curvature_override: Optional[float] = None
    curvature_samples: int = Field(ge=1, default=2000)


class RunningCostConfig(StrictModel):
    lambda_a: float = Field(gt=0, default=1.0)
    lambda_b: float = 0.0
    shape: Literal["sin2", "const"] = "sin2"
    d_operator: Literal["none", "allow", "forbid"] = "none"


class SigmaConfig(StrictModel):
    mode: Literal["off", "fixed", "analytic", "numeric"] = "off"
    a_bar: float = 0.0
    b_bar: float = 0.0
    c_bar: float = 0.0
    eps_a: float = Field(ge=0, default=0.0)
    eps_b: float = Field(ge=0, default=0.0)
    eps_c: float = Field(ge=0, default=0.0)


class StoppingConfig(StrictModel):
    max_iter: int = Field(ge=0, default=100)
    j_tol: float = Field(ge=0, default=0.0)


class TlsModelConfig(StrictModel):
    kind: Literal["tls"]
    omega: float = 2.0
    target: Literal["flip", "hadamard"] = "flip"


class LambdaModelConfig(StrictModel):
    kind: Literal["lambda"]
    energies: List[float] = Field(default=[0.0, 1.0, 2.35], min_length=3,
                                  max_length=3)
    forbidden_index: int = Field(ge=0, le=2, default=2)


class SpinSpinModelConfig(StrictModel):
    kind: Literal["spin_spin"]
    tensor: Optional[List[List[float]]] = None
    tensor_file: Optional[str] = None
    target: Literal["state", "b_gate"] = "state"
    theta: float = 0.8


class FourierGridModelConfig(StrictModel):
    kind: Literal["fourier_grid"]
    n_r: int = Field(ge=2)
    r_min: float
    r_max: float
    mass: float = Field(gt=0)
    mu: float = 0.0
    potential_files: Optional[List[str]] = None
    harmonic_omega: Optional[float] = Field(gt=0, default=None)
    harmonic_r0: float = 0.0
    initial_level: int = Field(ge=0, default=1)
    target_level: int = Field(ge=0, default=0)
    target: Literal["state", "hadamard"] = "state"


ModelConfig = Union[TlsModelConfig, LambdaModelConfig, SpinSpinModelConfig,
                    FourierGridModelConfig]


class RunConfig(StrictModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    model: ModelConfig = Field(discriminator="kind")
    grid: GridConfig
    guess: GuessConfig = GuessConfig()
    functional: FunctionalConfig = FunctionalConfig()
    running_cost: RunningCostConfig = RunningCostConfig()
    sigma: SigmaConfig = SigmaConfig()
    stopping: StoppingConfig = StoppingConfig()
    seed: int = 0
    hbar: float = Field(gt=0, default=1.0)


def format_validation_errors(exc: ValidationError) -> list[str]:
    """Human-readable one-liners naming the offending keys."""
    lines = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"])
        lines.append(f"{loc or '<root>'}: {err['msg']}")
    return lines


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError("; ".join(format_validation_errors(exc))) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
    else:
        data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} does not contain a mapping")
    return parse_config(data)


def _build_functional(config: RunConfig) -> FinalTimeFunctional:
    fc = config.functional
    if fc.kind == "sm":
        return SquareModulusFunctional(lambda0=fc.lambda0)
    if fc.kind == "re":
        return RealPartFunctional(lambda0=fc.lambda0)
    return PowerFunctional(
        lambda0=fc.lambda0, p=fc.p, curvature_samples=fc.curvature_samples,
        curvature_seed=config.seed + 7919,
        curvature_override=fc.curvature_override,
    )


def _sigma_params(config: SigmaConfig) -> SigmaParams:
    return SigmaParams(mode=config.mode, a_bar=config.a_bar,
                       b_bar=config.b_bar, c_bar=config.c_bar,
                       eps_a=config.eps_a, eps_b=config.eps_b,
                       eps_c=config.eps_c)


def _load_tensor(model: SpinSpinModelConfig):
    if model.tensor is not None and model.tensor_file is not None:
        raise ConfigError("model.tensor and model.tensor_file are exclusive")
    if model.tensor_file is not None:
        return np.loadtxt(model.tensor_file, ndmin=2)
    if model.tensor is not None:
        return np.asarray(model.tensor, dtype=float)
    return None


def _load_potentials(model: FourierGridModelConfig, n_r: int):
    from .models import harmonic_potential

    if model.potential_files:
        potentials = []
        for fname in model.potential_files:
            data = np.loadtxt(fname, ndmin=2)
            if data.shape[1] == 1:
                samples = data[:, 0]
            elif data.shape[1] == 2:
                samples = data[:, 1]
            else:
                raise ConfigError(
                    f"potential file {fname} must have 1 or 2 columns "
                    "(V, or R V)"
                )
            if samples.shape[0] != n_r:
                raise ConfigError(
                    f"potential file {fname} has {samples.shape[0]} samples, "
                    f"expected n_r = {n_r}"
                )
            potentials.append(samples)
        return potentials
    if model.harmonic_omega is not None:
        return [harmonic_potential(model.harmonic_omega, model.harmonic_r0,
                                   model.mass)]
    raise ConfigError(
        "fourier_grid model needs potential_files or harmonic_omega"
    )


def build_problem(config: RunConfig) -> ProblemSpec:
    """Assemble the ProblemSpec described by a validated config."""
    grid = TimeGrid(n_steps=config.grid.n_steps,
                    total_time=config.grid.total_time)
    functional = _build_functional(config)
    sigma = _sigma_params(config.sigma)
    cost_cfg = config.running_cost
    model = config.model
    common = dict(grid=grid, eps0=config.guess.eps0,
                  lambda_a=cost_cfg.lambda_a, functional=functional,
                  sigma=sigma)

    if model.kind == "tls":
        if cost_cfg.d_operator != "none" or cost_cfg.lambda_b != 0.0:
            raise ConfigError("the tls model has no state-dependent cost")
        problem = make_tls(omega=model.omega, target=model.target,
                           guess_omega=config.guess.omega, **common)
    elif model.kind == "lambda":
        if cost_cfg.d_operator == "none":
            if cost_cfg.lambda_b != 0.0:
                raise ConfigError(
                    "running_cost.lambda_b requires a d_operator selection"
                )
            sign = "forbid"  # irrelevant at lambda_b = 0
        else:
            sign = cost_cfg.d_operator
        problem = make_lambda(cost_cfg.lambda_b, sign,
                              energies=model.energies,
                              forbidden_index=model.forbidden_index,
                              guess_omega=config.guess.omega, **common)
    elif model.kind == "spin_spin":
        if cost_cfg.d_operator != "none" or cost_cfg.lambda_b != 0.0:
            raise ConfigError("the spin_spin model has no state-dependent cost")
        problem = make_spin_spin(
            tensor=_load_tensor(model), hbar=config.hbar, target=model.target,
            theta=model.theta,
            guess_omega=config.guess.omega if config.guess.omega is not None
            else 0.0, **common)
    else:  # fourier_grid
        if cost_cfg.d_operator != "none" or cost_cfg.lambda_b != 0.0:
            raise ConfigError(
                "state-dependent costs for the fourier_grid model are not "
                "wired into the config layer"
            )
        problem = make_fourier_grid(
            _load_potentials(model, model.n_r), model.n_r, model.r_min,
            model.r_max, model.mass, model.mu, hbar=config.hbar,
            initial_level=model.initial_level,
            target_level=model.target_level, target=model.target,
            guess_omega=config.guess.omega, **common)

    if cost_cfg.shape == "const":
        flat = problem.guess_field
        problem = problem.with_guess_field(
            type(flat)(values=flat.values, shape=np.ones(grid.n_steps),
                       reference=flat.reference, lambda_a=flat.lambda_a))
    else:
        # guard against sin^2 windows that were replaced by model defaults
        expected = sin2_envelope(grid.midpoints, grid.total_time)
        if not np.allclose(problem.guess_field.shape, expected):
            flat = problem.guess_field
            problem = problem.with_guess_field(
                type(flat)(values=flat.values, shape=expected,
                           reference=flat.reference, lambda_a=flat.lambda_a))
    return problem


def iterate_options(config: RunConfig, collect_numeric: bool = False
                    ) -> IterateOptions:
    return IterateOptions(max_iter=config.stopping.max_iter,
                          j_tol=config.stopping.j_tol,
                          collect_numeric=collect_numeric)


def problem_summary(config: RunConfig) -> dict:
    problem = build_problem(config)
    summary = problem.summary()
    summary["max_iter"] = config.stopping.max_iter
    summary["j_tol"] = config.stopping.j_tol
    summary["seed"] = config.seed
    return summary
