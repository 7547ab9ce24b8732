# =========================
# file: core/config.py
# =========================
from __future__ import annotations

import copy
import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import ConfigError
from core.models import EstimateId

LOGGER = logging.getLogger(__name__)

DEFAULTS_PATH = Path(__file__).resolve().parent.parent / "defaults.json"
THREADS_ENV = "DISTWAVE_THREADS"


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# -------------------------
# Sections
# -------------------------
class PotentialSpec(_Spec):
    kind: Literal["zero", "model", "mollified_tail", "inverse_square", "poschl_teller", "table"] = "model"
    core: float = 1.0
    ell: float = 1.0
    depth: float = 2.0
    alpha: float = 2.0
    x: Optional[List[float]] = None
    values: Optional[List[float]] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _table_source(self):
        if self.kind == "table" and not self.path and not (self.x and self.values):
            raise ValueError("a table potential needs 'path' or both 'x' and 'values'")
        return self


class GridSpec(_Spec):
    x_max: float = Field(60.0, gt=0)
    dx: float = Field(0.05, gt=0)
    xi_min: float = Field(1e-3, gt=0)
    xi_max: float = Field(8.0, gt=0)
    per_decade: int = Field(48, ge=4)
    t_max: float = Field(40.0, ge=0)
    xi_refine: float = Field(1.0, gt=0)  # xi nodes per unit s-step

    @model_validator(mode="after")
    def _ordered(self):
        if self.xi_min >= self.xi_max:
            raise ValueError("xi_min must be below xi_max")
        if self.dx * 8 > self.x_max:
            raise ValueError("dx too coarse for x_max")
        return self

    def coarsened(self, factor: float = 2.0) -> "GridSpec":
        """Same window with dx and the xi step both scaled up by factor."""
        return self.model_copy(update={"dx": self.dx * factor, "xi_refine": self.xi_refine / factor})


class SolverSpec(_Spec):
    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = "DOP853"
    x_seed: float = 60.0
    seed_c: float = 40.0
    seed_max: float = 5e4
    hankel_cutoff: float = 0.5
    chunk: int = Field(16, ge=1)
    zero_window: Tuple[float, float] = (100.0, 1000.0)
    resonance_threshold: float = 1e-3
    bound_state_floor: float = Field(-4.0, lt=0)
    bound_state_x_max: float = 1000.0


class DataSpec(_Spec):
    name: str
    params: Dict[str, float] = {}


class ScenarioSpec(_Spec):
    name: str
    f: DataSpec
    g: Optional[DataSpec] = None
    times: List[float] = [0.0, 5.0, 10.0, 20.0]


class OracleSpec(_Spec):
    scenario: str = "gaussian"
    dx: float = 0.01
    cfl: float = 0.5
    times: List[float] = [5.0, 10.0, 20.0]
    order_dxs: List[float] = [0.02, 0.01, 0.005]
    order_time: float = 4.0


class VectorFieldSpec(_Spec):
    exclusion_steps: float = 2.0
    commutator_time: float = 5.0
    diagonal_xi: List[float] = [1.0, 2.0]
    diagonal_width: float = 0.25


class VerificationSpec(_Spec):
    id: EstimateId
    scenario: str = "gaussian"
    variant: str = ""
    sigma: float = 0.5
    k: int = Field(0, ge=0)
    l: int = Field(0, ge=0)
    m: int = Field(0, ge=0, le=2)
    eps: float = 0.05
    times: List[float] = [10.0, 20.0, 30.0, 40.0]

    @model_validator(mode="after")
    def _orders(self):
        if self.k + self.l > 3:
            raise ValueError("k + l must not exceed 3")
        return self


class AcceptanceSpec(_Spec):
    spectral_law: float = 1e-6
    plancherel: float = 1e-3
    roundtrip: float = 1e-3
    diagonalization: float = 1e-3
    wronskian: float = 1e-6
    zero_energy_defect: float = 1e-3
    oracle: float = 1e-2
    order: Tuple[float, float] = (1.8, 2.2)
    energy: float = 1e-3
    b_nullity: float = 1e-3
    identity_residual: float = 5e-2
    refinement_ratio: float = 1.5
    refinement_floor: float = 1e-3
    commutator_residual: float = 5e-2
    trend: float = 0.02
    half_band: Tuple[float, float] = (-0.65, -0.40)
    one_band: Tuple[float, float] = (-1.15, -0.85)
    saturation_tol: float = 0.1


class OutputSpec(_Spec):
    dir: str = "out"
    float_format: str = "%.17g"


class RunConfig(_Spec):
    potential: PotentialSpec = PotentialSpec()
    grid: GridSpec = GridSpec()
    solver: SolverSpec = SolverSpec()
    scenarios: List[ScenarioSpec] = []
    oracle: OracleSpec = OracleSpec()
    vectorfield: VectorFieldSpec = VectorFieldSpec()
    verifications: List[VerificationSpec] = []
    acceptance: AcceptanceSpec = AcceptanceSpec()
    output: OutputSpec = OutputSpec()
    threads: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _references(self):
        names = {s.name for s in self.scenarios}
        for i, v in enumerate(self.verifications):
            if v.scenario not in names:
                raise ValueError(f"verifications.{i}.scenario '{v.scenario}' is not a declared scenario")
        if self.scenarios and self.oracle.scenario not in names:
            raise ValueError(f"oracle.scenario '{self.oracle.scenario}' is not a declared scenario")

        latest = max(
            [t for s in self.scenarios for t in s.times]
            + [t for v in self.verifications for t in v.times]
            + list(self.oracle.times),
            default=0.0,
        )
        if latest > self.grid.t_max:
            raise ValueError(f"requested time {latest:g} exceeds grid.t_max={self.grid.t_max:g}")
        return self

    def scenario(self, name: str) -> ScenarioSpec:
        for s in self.scenarios:
            if s.name == name:
                return s
        raise ConfigError(f"unknown scenario '{name}'", "scenarios")


# -------------------------
# Loading
# -------------------------
def load_defaults() -> dict:
    if DEFAULTS_PATH.exists():
        return json.loads(DEFAULTS_PATH.read_text())
    return {}


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _field_path(err: ValidationError) -> str:
    first = err.errors()[0]
    return ".".join(str(p) for p in first.get("loc", ()))


def parse_config(raw: Dict[str, Any]) -> RunConfig:
    merged = deep_merge(load_defaults(), raw)
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first.get("msg", str(exc)), _field_path(exc)) from exc


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a JSON object")
    cfg = parse_config(raw)
    LOGGER.info("loaded config %s (potential=%s)", p, cfg.potential.kind)
    return cfg


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def resolve_threads(flag: Optional[int], cfg: RunConfig) -> int:
    """--threads, then DISTWAVE_THREADS, then the config value."""
    if flag:
        return max(int(flag), 1)
    env = os.environ.get(THREADS_ENV, "").strip()
    if env:
        try:
            return max(int(env), 1)
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got '{env}'") from exc
    return cfg.threads
