from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

EULER_GAMMA = 0.57721566490153286061
GAMMA0 = EULER_GAMMA - float(np.log(2.0))

ComplexValue = complex  # h±(z) values; numpy complex128 arrays when vectorised
Parity = Literal["even", "odd", "none"]
SeedKind = Literal["hankel", "plane_wave"]
EstimateId = Literal[
    "dispersive_half",
    "dispersive_one",
    "energy",
    "vector_field",
    "local_energy_decay",
    "divergence_form",
]

RealFn = Callable[[np.ndarray], np.ndarray]


# -------------------------
# Potentials
# -------------------------
@dataclass(frozen=True, eq=False)
class Potential:
    name: str
    eval: RealFn
    deriv: RealFn
    deriv2: RealFn
    alpha: float
    even_extension: bool
    inverse_square_tail: bool = True
    regular_at_origin: bool = True
    params: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class TailReport:
    x: np.ndarray
    ratios: np.ndarray
    fitted_alpha: Optional[float]
    exact_tail: bool = False


@dataclass(frozen=True)
class ParityReport:
    max_asymmetry: float
    first_derivative: float
    third_derivative: float
    even: bool


# -------------------------
# ODE solutions
# -------------------------
@dataclass(frozen=True, eq=False)
class RegularSolution:
    lam: float
    x_grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray

    @property
    def wronskian(self) -> np.ndarray:
        # W(theta, phi) = theta phi' - theta' phi, identically 1
        return self.theta * self.dphi - self.dtheta * self.phi


@dataclass(frozen=True, eq=False)
class JostSolution:
    xi: float
    x_grid: np.ndarray
    f: np.ndarray
    df: np.ndarray
    seed_kind: SeedKind
    x_seed: float

    @property
    def wronskian_conj(self) -> np.ndarray:
        # W(f+, conj f+), identically -2i xi
        return self.f * np.conj(self.df) - self.df * np.conj(self.f)


@dataclass(frozen=True)
class ZeroEnergyCoefficients:
    a1: float
    a2: float
    b1: float
    b2: float
    resonant: bool = False
    gamma0: float = GAMMA0
    basis: str = "tail"  # "tail": {x^(1/2) log x, x^(1/2)}; "linear": {x, 1}

    @property
    def defect(self) -> float:
        return abs(self.a1 * self.b2 - self.a2 * self.b1 - 1.0)


# -------------------------
# Spectral data
# -------------------------
@dataclass(frozen=True)
class SpectralPoint:
    xi: float
    W_phi: complex
    W_theta: complex
    m: complex
    rho: float
    rho_tilde: float
    a_coeff: complex
    eval_x: float


@dataclass(frozen=True, eq=False)
class XiGrid:
    """Frequency nodes xi(s_j) on a uniform s grid, with trapezoid weights in s."""

    xi: np.ndarray
    s_step: float
    jacobian: np.ndarray  # d xi / d s at the nodes
    weights: np.ndarray
    log_step: float
    linear_step: float

    @property
    def max_spacing(self) -> float:
        return float(np.max(np.diff(self.xi))) if self.xi.size > 1 else 0.0


@dataclass(frozen=True, eq=False)
class SpectralTable:
    grid: XiGrid
    x_grid: np.ndarray
    x_weights: np.ndarray
    phi_matrix: np.ndarray  # shape (n_x, n_xi), phi(x_i, xi_j^2)
    rho: np.ndarray
    rho_tilde: np.ndarray
    m: np.ndarray
    a_coeff: np.ndarray
    certification: np.ndarray  # per-column Abel defect max |W(theta, phi) - 1|
    potential_name: str
    t_max: float
    coefficients: Optional[ZeroEnergyCoefficients] = None
    low_band_mass: float = 0.0
    psi_matrix: Optional[np.ndarray] = None  # 2 lam d_lam phi - x phi', same shape as phi_matrix
    jost_defect: Optional[np.ndarray] = None  # |W(f+, conj f+) + 2i xi| / xi per column

    @property
    def xi_grid(self) -> np.ndarray:
        return self.grid.xi

    @property
    def weights(self) -> np.ndarray:
        """rho_tilde times the xi quadrature weight."""
        return self.rho_tilde * self.grid.weights

    @property
    def x_max(self) -> float:
        return float(self.x_grid[-1])

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])


# -------------------------
# Grid functions and waves
# -------------------------
@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: np.ndarray
    values: np.ndarray
    parity: Parity = "even"
    domain: Literal["x", "xi"] = "x"

    def with_values(self, values: np.ndarray, domain: Optional[str] = None, grid=None) -> "GridFunction":
        return GridFunction(
            grid=self.grid if grid is None else grid,
            values=values,
            parity=self.parity,
            domain=self.domain if domain is None else domain,
        )


@dataclass(frozen=True, eq=False)
class WaveState:
    t: float
    u: np.ndarray
    ut: np.ndarray


@dataclass(frozen=True)
class EnergyValue:
    total: float
    kinetic: float
    gradient: float
    potential_part: float


@dataclass(frozen=True, eq=False)
class BKernel:
    xi_grid: np.ndarray
    eta_grid: np.ndarray
    F_matrix: np.ndarray
    U_samples: np.ndarray
    rho_tilde: np.ndarray
    grid: XiGrid


@dataclass(frozen=True)
class DiagonalComparison:
    xi: float
    h_extracted: float
    h_formula: float
    plain_ratio: float
    disagree: bool


# -------------------------
# Reports (serialised)
# -------------------------
class EstimateReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    estimate_id: EstimateId
    variant: str = ""
    t_samples: List[float]
    lhs: List[float]
    rhs: List[float]
    sup_ratio: float
    fitted_exponent: Optional[float] = None
    exponent_halfwidth: Optional[float] = None
    trend_slope: Optional[float] = None
    passed: Optional[bool] = None
    details: Dict[str, float] = {}
    config_hash: str = ""


class CheckResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    stage: str
    name: str
    value: float
    bound: float
    passed: bool
    note: str = ""


class RunSummary(BaseModel):
    config_hash: str
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)
