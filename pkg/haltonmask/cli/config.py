import math
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional

import yaml
from pydantic import BaseModel, Field, root_validator, validator

from haltonmask.errors import InvalidArgumentError
from haltonmask.schedule.plan import PlanShape, StepSizePlan, step_size_plan
from haltonmask.schedule.schedulers import ConfidenceConfig, SchedulerName
from haltonmask.sequence.gridmap import GridSpec
from haltonmask.toy.model import ToyJointModel

__all__ = [
    "ModelOptions",
    "RunConfig",
    "load_config",
]

DEFAULT_STEPS = 8
DEFAULT_SWEEP_STEPS = (1, 2, 4, 8, 16, 32)


class ModelOptions(BaseModel):
    """Toy model parameters."""

    vocab: int = Field(default=2, ge=2, description="V, the number of token values.")
    beta: float = Field(default=1.0, ge=0, description="β, the coupling strength.")
    length_scale: float = Field(default=1.0, gt=0, alias="lambda", description="λ, the decay length.")
    radius: Optional[float] = Field(default=math.sqrt(2), description="Interaction radius; null is full pairwise.")

    class Config:
        extra = "forbid"
        allow_population_by_field_name = True

    @validator("radius", pre=True)
    def validation_radius(cls, radius: Any):
        if isinstance(radius, str) and radius.lower() in ("full", "none", "null"):
            return None

        return radius


class RunConfig(BaseModel):
    """A haltonmask experiment."""

    grid: Optional[GridSpec] = Field(
        default=None, description="The token grid, e.g. 32x32; every command but sequence needs it."
    )
    steps: Optional[int] = Field(
        default=None, ge=1, description="S, the number of unmasking steps; min(8, n) when absent."
    )
    schedulers: List[SchedulerName] = Field(default_factory=lambda: [SchedulerName.HALTON])
    plan: PlanShape = Field(default=PlanShape.COSINE, description="Shape of the step size plan.")
    seed: Optional[int] = Field(default=None, ge=0, description="Master seed.")
    model: ModelOptions = Field(default_factory=ModelOptions, description="Toy model parameters.")
    confidence: ConfidenceConfig = Field(default_factory=ConfidenceConfig, description="Confidence scheduler.")
    temperature: float = Field(default=1.0, gt=0, description="Value sampling temperature.")
    exact: bool = Field(default=False, description="Compute exact information quantities.")
    numeric: Literal["rational", "float"] = Field(default="float", description="Numeric backend of sequences.")
    count: int = Field(default=16, ge=1, description="Number of Halton points for the sequence command.")
    sweep_steps: Optional[List[int]] = Field(
        default=None, description="Step counts for the sweep; powers of two up to n when absent."
    )
    out: Path = Field(default=Path("."), description="Output directory.")

    class Config:
        extra = "forbid"

    @validator("grid", pre=True)
    def validation_grid(cls, grid: Any):
        if isinstance(grid, str):
            return GridSpec.parse(grid)

        return grid

    @validator("schedulers", pre=True)
    def validation_schedulers(cls, schedulers: Any):
        if isinstance(schedulers, str):
            return [schedulers]

        return schedulers

    @validator("out")
    def validation_out(cls, out_path: Path):
        if not out_path.is_absolute():
            out_path = (Path(os.getcwd()) / out_path).resolve()

        if out_path.exists() and not out_path.is_dir():
            raise ValueError(f"The output path {out_path} is not a directory.")

        return out_path

    @root_validator(skip_on_failure=True)
    def validation_steps(cls, values):
        if len(values["schedulers"]) == 0:
            raise ValueError("At least one scheduler is required.")

        grid: Optional[GridSpec] = values["grid"]

        if grid is None:
            return values

        if values["steps"] is None:
            values["steps"] = min(DEFAULT_STEPS, grid.n)

        if values["sweep_steps"] is None:
            values["sweep_steps"] = [steps for steps in DEFAULT_SWEEP_STEPS if steps <= grid.n]

        if values["steps"] > grid.n:
            raise ValueError(f"The steps exceed token count: {values['steps']} > {grid.n}.")

        for steps in values["sweep_steps"]:
            if not 1 <= steps <= grid.n:
                raise ValueError(f"The sweep step count {steps} is outside of [1, {grid.n}].")

        return values

    def require_grid(self) -> GridSpec:
        if self.grid is None:
            raise InvalidArgumentError("The grid is required: pass --grid HxW or set grid in the config file.")

        return self.grid

    def toy_model(self) -> ToyJointModel:
        return ToyJointModel(
            grid=self.require_grid(),
            vocab_size=self.model.vocab,
            coupling=self.model.beta,
            length_scale=self.model.length_scale,
            neighbor_radius=self.model.radius,
        )

    def step_plan(self, steps: Optional[int] = None) -> StepSizePlan:
        return step_size_plan(self.require_grid().n, steps or self.steps or DEFAULT_STEPS, self.plan)

    def params(self) -> Dict[str, Any]:
        """Parameters recorded in output headers."""

        return {
            "plan": self.plan.value,
            "vocab": self.model.vocab,
            "beta": self.model.beta,
            "lambda": self.model.length_scale,
            "radius": self.model.radius,
            "gumbel_scale": self.confidence.gumbel_scale_initial,
            "temperature": self.temperature,
        }


def _merge(base: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    result = dict(base)

    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(result.get(key), Mapping):
            result[key] = _merge(result[key], value)
        else:
            result[key] = value

    return result


def load_config(config: Optional[str], overrides: Mapping[str, Any]) -> RunConfig:
    """Read an optional YAML manifest and overlay the given flags.

    Args:
        config: a path to a YAML file, relative to the working directory.
        overrides: values given on the command line; they win over the file.

    """

    yaml_config: Dict[str, Any] = {}

    if config is not None:
        config_path = (Path(os.getcwd()) / Path(config)).resolve()

        with config_path.open("r", encoding="utf-8") as config_file:
            yaml_config = yaml.safe_load(config_file) or {}

        if not isinstance(yaml_config, dict):
            raise ValueError(f"The config file {config_path} must hold a mapping.")

    return RunConfig.parse_obj(_merge(yaml_config, overrides))
