"""Run configuration schema (JSON, unknown keys rejected)."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..kernels import KernelSpec
from ..optimizer import OptimizerConfig

DEFAULT_MLE_GRID = (0.05, 0.1, 0.2, 0.4, 0.8, 1.6)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class KernelModel(_Strict):
    family: Literal["se", "matern"]
    length_scale: float = Field(gt=0)
    nu: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        self.to_spec()
        return self

    def to_spec(self) -> KernelSpec:
        return KernelSpec(self.family, self.length_scale, self.nu)

    @classmethod
    def of(cls, spec: KernelSpec) -> "KernelModel":
        return cls(**spec.to_dict())


class BenchmarkProblem(_Strict):
    kind: Literal["benchmark"]
    id: int = Field(ge=1, le=5)
    p5_literal_constraint: bool = False


class SyntheticProblem(_Strict):
    kind: Literal["rkhs", "gp"]
    seed: int = 0
    dim: int = Field(ge=1)
    kernel_f: KernelModel = KernelModel(family="se", length_scale=0.2)
    kernel_c: KernelModel = KernelModel(family="se", length_scale=0.2)


class Hyperparameters(_Strict):
    mode: Literal["fixed", "mle"]
    grid: tuple[float, ...] = DEFAULT_MLE_GRID

    @field_validator("grid")
    @classmethod
    def _grid(cls, v):
        if not v or any(l <= 0 for l in v):
            raise ValueError("grid must be a non-empty list of positive length scales")
        return v


class OptimizerSection(_Strict):
    n_candidates: Optional[int] = Field(default=None, ge=1)
    n_refine_starts: int = Field(default=8, ge=1)
    refine_steps: int = Field(default=60, ge=0)

    def to_config(self, seed: int) -> OptimizerConfig:
        return OptimizerConfig(self.n_candidates, self.n_refine_starts, self.refine_steps, seed)


class RunConfig(_Strict):
    """Everything needed to reproduce a batch of CEI trials.

    ``None`` for ``n_initial`` means ``10 * dim``; ``None`` for the model
    kernels means the generator's kernels (synthetic problems) or SE with the
    MLE grid (benchmarks); ``None`` for ``hyperparameters`` and
    ``output_scaling`` selects fixed/off for synthetic problems and
    mle/on for benchmarks.
    """

    problem: Union[BenchmarkProblem, SyntheticProblem] = Field(discriminator="kind")
    model_kernel_f: Optional[KernelModel] = None
    model_kernel_c: Optional[list[KernelModel]] = None
    hyperparameters: Optional[Hyperparameters] = None
    output_scaling: Optional[bool] = None
    n_initial: Optional[int] = Field(default=None, ge=1)
    n_iterations: int = Field(default=50, ge=0)
    n_trials: int = Field(default=100, ge=1)
    base_seed: int = Field(default=0, ge=0)
    initial_design: Literal["sobol", "uniform"] = "sobol"
    optimizer: OptimizerSection = OptimizerSection()
    tolerance: float = Field(default=0.0, ge=0)
    delta: float = Field(default=0.1, gt=0, lt=1)
    noise_variance_for_bounds: float = Field(default=0.01, gt=0)
    n_search: int = Field(default=2**20, ge=1)
    check_bounds: bool = True
    output_dir: str = "cei-run"

    @property
    def is_synthetic(self) -> bool:
        return self.problem.kind != "benchmark"

    def hyper(self) -> Hyperparameters:
        if self.hyperparameters is not None:
            return self.hyperparameters
        return Hyperparameters(mode="fixed" if self.is_synthetic else "mle")

    def scaling(self) -> bool:
        return (not self.is_synthetic) if self.output_scaling is None else self.output_scaling

    def problem_meta(self) -> dict:
        meta = self.problem.model_dump()
        if self.problem.kind != "benchmark":
            meta["kernel_f"] = self.problem.kernel_f.to_spec().to_dict()
            meta["kernel_c"] = self.problem.kernel_c.to_spec().to_dict()
        return meta

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def load_config(path) -> RunConfig:
    return RunConfig.model_validate_json(Path(path).read_text())
