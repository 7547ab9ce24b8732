# =========================
# file: tools/datasets.py
# =========================
from __future__ import annotations

from typing import Callable, Dict, List, Tuple

import numpy as np

from core.errors import ConfigError
from core.models import GridFunction, SpectralTable

DataFn = Callable[[np.ndarray], np.ndarray]


# -------------------------
# Named data
# -------------------------
def _gaussian(x):
    return np.exp(-0.5 * x * x)


# Even Schwartz functions with f'(0) = 0; the bundled test suite.
SUITE: Dict[str, DataFn] = {
    "gaussian": _gaussian,
    "wide_gaussian": lambda x: np.exp(-x * x / 8.0),
    "x2_gaussian": lambda x: x * x * np.exp(-0.5 * x * x),
    "x4_gaussian": lambda x: 0.25 * x ** 4 * np.exp(-0.5 * x * x),
    "hermite2": lambda x: (1.0 - x * x) * np.exp(-0.5 * x * x),
    "sech2": lambda x: 1.0 / np.cosh(x) ** 2,
    "gaussian_pair": lambda x: np.exp(-0.5 * (x - 3.0) ** 2) + np.exp(-0.5 * (x + 3.0) ** 2),
    "quartic_bump": lambda x: np.exp(-(x ** 4) / 16.0),
    "cos_gaussian": lambda x: np.cos(x) * np.exp(-x * x / 4.0),
    "gaussian_difference": lambda x: np.exp(-0.5 * x * x) - 0.5 * np.exp(-x * x / 8.0),
}

EXTRA: Dict[str, DataFn] = {
    "zero": lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    "odd_gaussian": lambda x: x * np.exp(-0.5 * x * x),
}

PARITY: Dict[str, str] = {"odd_gaussian": "odd"}


def data_function(name: str, params: Dict[str, float] = None) -> DataFn:
    """
    Named data with optional `amplitude`, `scale` (f(scale x)) and, for the
    Gaussian family, `center` for an even pair of bumps at +-center.
    """
    params = dict(params or {})
    amplitude = float(params.pop("amplitude", 1.0))
    scale = float(params.pop("scale", 1.0))
    center = float(params.pop("center", 0.0))
    if params:
        raise ConfigError(f"unknown data parameters {sorted(params)}", f"data.{name}")

    if name == "bump":
        base = lambda x: np.exp(-0.5 * (x - center) ** 2) + np.exp(-0.5 * (x + center) ** 2)  # noqa: E731
    elif name in SUITE:
        base = SUITE[name]
    elif name in EXTRA:
        base = EXTRA[name]
    else:
        raise ConfigError(f"unknown data function '{name}'", "scenarios.data")

    def fn(x):
        return amplitude * base(scale * np.asarray(x, dtype=float))

    return fn


def resolve(spec) -> DataFn:
    return data_function(spec.name, spec.params)


def parity_of(name: str) -> str:
    return PARITY.get(name, "even")


# -------------------------
# Sampling
# -------------------------
def sample(fn: DataFn, table: SpectralTable, parity: str = "even") -> GridFunction:
    return GridFunction(grid=table.x_grid, values=fn(table.x_grid), parity=parity, domain="x")


def suite_functions(table: SpectralTable) -> List[Tuple[str, GridFunction]]:
    return [(name, sample(fn, table)) for name, fn in SUITE.items()]


def support_radius(fn: DataFn, floor: float = 1e-12, x_cap: float = 200.0, dx: float = 0.01) -> float:
    """Smallest R with |fn(x)| < floor for every sampled x >= R."""
    x = np.arange(0.0, x_cap + dx, dx)
    big = np.nonzero(np.abs(fn(x)) >= floor)[0]
    return float(x[big[-1]] + dx) if big.size else 0.0
