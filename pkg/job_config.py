#!/usr/bin/env python3
"""
Transmutation Toolkit - Job Configuration
Validated JSON job documents for the command-line runner
"""

import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from expression_parser import PLANE_VARIABLES, parse_expression
from transmutation_errors import ParseError

logger = logging.getLogger(__name__)


class Task(str, Enum):
    SOLVE = "solve"
    KERNEL = "kernel"
    EIGEN = "eigen"
    PDE = "pde"
    COMPARE = "compare"
    BENCH = "bench"


class RepresentationName(str, Enum):
    LEGENDRE = "legendre"
    LAGUERRE = "laguerre"
    HERMITE = "hermite"


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class OmegaSpec(_Block):
    """Explicit omega values, or `count` points from start to stop; `imag` shifts them all"""
    values: Optional[List[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    count: Optional[int] = Field(default=None, ge=1)
    imag: float = 0.0

    @model_validator(mode="after")
    def _one_form(self) -> "OmegaSpec":
        ranged = (self.start, self.stop, self.count)
        if self.values is None and any(v is None for v in ranged):
            raise ValueError("give either 'values' or all of 'start', 'stop', 'count'")
        if self.values is not None and any(v is not None for v in ranged):
            raise ValueError("'values' and 'start'/'stop'/'count' are mutually exclusive")
        return self

    def omegas(self) -> List[complex]:
        if self.values is not None:
            reals = list(self.values)
        elif self.count == 1:
            reals = [self.start]
        else:
            step = (self.stop - self.start) / (self.count - 1)
            reals = [self.start + i * step for i in range(self.count)]
        return [complex(w, self.imag) for w in reals]


class BoundarySpec(_Block):
    """alpha y(0) + beta y'(0) = 0, gamma y(b) + delta y'(b) = 0"""
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 1.0
    delta: float = 0.0


class EigenSpec(_Block):
    count: Optional[int] = Field(default=None, ge=1)
    omega_min: float = Field(default=0.0, ge=0.0)
    omega_max: Optional[float] = Field(default=None, gt=0.0)
    scan_density: Optional[float] = Field(default=None, gt=0.0)
    boundary: BoundarySpec = BoundarySpec()
    certify: bool = True
    residual_tol: float = Field(default=1e-4, gt=0.0)
    eigenfunctions: bool = False

    @model_validator(mode="after")
    def _count_or_range(self) -> "EigenSpec":
        if self.count is None and self.omega_max is None:
            raise ValueError("eigen block needs 'count' or 'omega_max'")
        return self


class DomainSpec(_Block):
    shape: str = Field(default="rectangle", pattern="^(rectangle|disk)$")
    x0: float = -1.0
    x1: float = 1.0
    y0: float = -1.0
    y1: float = 1.0
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = Field(default=1.0, gt=0.0)


class PdeSpec(_Block):
    """Dirichlet data over x and y; method 'family' or 'mfs'"""
    method: str = Field(default="family", pattern="^(family|mfs)$")
    domain: DomainSpec = DomainSpec()
    boundary_data: str
    exact: Optional[str] = None
    members: int = Field(default=30, ge=1)
    points: Optional[int] = Field(default=None, ge=4)
    sources: Optional[List[Tuple[float, float]]] = None
    source_count: int = Field(default=40, ge=1)
    source_radius_factor: float = Field(default=1.5, gt=1.0)
    field_points: int = Field(default=21, ge=2)

    @field_validator("boundary_data", "exact")
    @classmethod
    def _parses(cls, text: Optional[str]) -> Optional[str]:
        if text is not None:
            try:
                parse_expression(text, PLANE_VARIABLES)
            except ParseError as err:
                raise ValueError(str(err)) from err
        return text


class BenchSpec(_Block):
    orders: List[int] = Field(default_factory=lambda: [8, 16, 32])
    omegas: List[float] = Field(default_factory=lambda: [1.0, 10.0, 50.0, 100.0])
    x_points: int = Field(default=11, ge=2)
    eigen_indices: List[int] = Field(default_factory=lambda: [1, 5, 10, 20, 50])
    shooting_steps: int = Field(default=400, ge=10)
    repeats: int = Field(default=3, ge=1)
    grid_sizes: List[int] = Field(default_factory=lambda: [1000, 2000, 4000])


class JobConfig(_Block):
    """One pipeline run: potential, interval, representation, orders, task blocks"""
    task: Task = Task.SOLVE
    potential: Optional[str] = "0"
    potential_samples: Optional[str] = None
    principal_value_ok: bool = False
    breakpoints: List[float] = Field(default_factory=list)
    b: float = Field(default=1.0, gt=0.0)
    representation: RepresentationName = RepresentationName.LEGENDRE
    N: int = Field(default=32, ge=0, le=200)
    K_max: int = Field(default=64, ge=0, le=200)
    M: int = Field(default=2000, ge=16)
    x: Optional[List[float]] = None
    x_points: int = Field(default=21, ge=2)
    omega: Optional[OmegaSpec] = None
    eigen: Optional[EigenSpec] = None
    pde: Optional[PdeSpec] = None
    bench: BenchSpec = BenchSpec()
    out: Optional[str] = None

    @field_validator("M")
    @classmethod
    def _even(cls, M: int) -> int:
        if M % 2:
            raise ValueError(f"M must be even, got {M}")
        return M

    @field_validator("potential")
    @classmethod
    def _potential_parses(cls, text: Optional[str]) -> Optional[str]:
        if text is not None:
            try:
                parse_expression(text)
            except ParseError as err:
                raise ValueError(str(err)) from err
        return text

    @model_validator(mode="after")
    def _consistent(self) -> "JobConfig":
        if self.N > self.K_max:
            raise ValueError(f"N={self.N} exceeds K_max={self.K_max}")
        if self.potential_samples is None and self.potential is None:
            raise ValueError("give 'potential' or 'potential_samples'")
        if self.task in (Task.SOLVE, Task.COMPARE) and self.omega is None:
            raise ValueError(f"task '{self.task.value}' needs an 'omega' block")
        if self.task == Task.EIGEN and self.eigen is None:
            raise ValueError("task 'eigen' needs an 'eigen' block")
        if self.task == Task.PDE and self.pde is None:
            raise ValueError("task 'pde' needs a 'pde' block")
        return self


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> JobConfig:
    """JSON file (if any) merged with overrides; overrides win"""
    document: Dict[str, Any] = {}
    if path is not None:
        document = json.loads(Path(path).read_text())
        logger.debug(f"Loaded job document {path}")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(document.get(key), dict):
            document[key] = {**document[key], **value}
        else:
            document[key] = value
    return JobConfig.model_validate(document)


def config_schema() -> Dict[str, Any]:
    return JobConfig.model_json_schema()
