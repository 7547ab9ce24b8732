# =========================
# file: core/errors.py
# =========================
from __future__ import annotations

from typing import Optional


class DistWaveError(Exception):
    """Root of every error raised by the toolkit."""


class TruncationWarning(UserWarning):
    pass


# -------------------------
# potential
# -------------------------
class NonDecayingTail(DistWaveError):
    def __init__(self, message: str, top_decade_ratios=None):
        super().__init__(message)
        self.top_decade_ratios = top_decade_ratios


class FloorTooHigh(DistWaveError):
    def __init__(self, e_floor: float, count_at_floor: int):
        super().__init__(
            f"solution already oscillates at E_floor={e_floor:g} "
            f"({count_at_floor} zeros); eigenvalues may lie below the floor"
        )
        self.e_floor = e_floor
        self.count_at_floor = count_at_floor


# -------------------------
# special functions / ODEs
# -------------------------
class DomainError(DistWaveError):
    pass


class StepFailure(DistWaveError):
    def __init__(self, message: str, xi: Optional[float] = None):
        super().__init__(message if xi is None else f"{message} (xi={xi:.17g})")
        self.xi = xi


class IllConditionedFit(DistWaveError):
    def __init__(self, condition: float):
        super().__init__(f"basis Gram matrix condition {condition:.3e} exceeds 1e12")
        self.condition = condition


class SeedOutOfRange(DistWaveError):
    def __init__(self, xi: float, x_seed: float, seed_max: float):
        super().__init__(
            f"seeding point {x_seed:.6g} for xi={xi:.6g} exceeds the maximum domain {seed_max:.6g}"
        )
        self.xi = xi
        self.x_seed = x_seed
        self.seed_max = seed_max


class DegenerateWronskian(DistWaveError):
    def __init__(self, xi: float, value: float):
        super().__init__(f"|W(f+, phi)| = {value:.3e} at xi={xi:.17g}")
        self.xi = xi
        self.value = value


# -------------------------
# transforms / evolution
# -------------------------
class GridMismatch(DistWaveError):
    pass


class BoundaryViolation(DistWaveError):
    def __init__(self, slope: float, norm: float):
        super().__init__(f"|f'(0)| = {slope:.3e} exceeds 1e-8 * ||f|| = {1e-8 * norm:.3e}")
        self.slope = slope
        self.norm = norm


class NyquistViolation(DistWaveError):
    def __init__(self, t: float, spacing: float, x_max: float):
        super().__init__(
            f"t={t:g} unresolved: max xi spacing {spacing:.4g} * (t + x_max) > pi/4"
        )
        self.t = t
        self.spacing = spacing
        self.x_max = x_max


class CFLViolation(DistWaveError):
    pass


class DomainTooSmall(DistWaveError):
    pass


class ExclusionTooWide(DistWaveError):
    pass


class ResonantPotential(DistWaveError):
    pass


# -------------------------
# orchestration
# -------------------------
class ConfigError(DistWaveError):
    def __init__(self, message: str, field_path: str = ""):
        super().__init__(f"{field_path}: {message}" if field_path else message)
        self.field_path = field_path


class StageError(DistWaveError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
