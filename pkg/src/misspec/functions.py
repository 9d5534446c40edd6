"""Piecewise-linear functions on uniform grids.

Both unknown model terms (the crowding function and the normalised
diffusivity profile) are represented by their values at a fixed set of
uniformly spaced nodes and interpolated linearly in between.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class DomainError(ValueError):
    """Raised when a function is evaluated outside its domain."""


@dataclass(frozen=True)
class CrowdingGrid:
    """Nodes ``u_i = i / (m + 1)`` on ``[0, 1]``, ``i = 0..m+1``.

    The boundary values ``f(0) = 1`` and ``f(1) = 0`` are fixed.
    """

    m: int = 10

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be a positive integer")

    @property
    def domain(self) -> tuple[float, float]:
        return 0.0, 1.0

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.m + 2) / (self.m + 1)

    @property
    def interior(self) -> np.ndarray:
        return self.positions[1:-1]

    def with_boundaries(self, interior_values) -> np.ndarray:
        v = np.asarray(interior_values, dtype=float)
        if v.shape != (self.m,):
            raise ValueError(f"expected {self.m} interior values, got shape {v.shape}")
        return np.concatenate(([1.0], v, [0.0]))

    def fix_boundaries(self, values: np.ndarray) -> np.ndarray:
        values = np.array(values, dtype=float)
        values[0], values[-1] = 1.0, 0.0
        return values


@dataclass(frozen=True)
class DiffusivityGrid:
    """Nodes ``t_i = t_max * i / (m + 1)`` on ``[0, t_max]``.

    Values stored on this grid are the normalised diffusivity, with the final
    node fixed at one (``g_{m+1} = 0.5`` on the copula scale).
    """

    m: int = 19
    t_max: float = 10.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")

    @property
    def domain(self) -> tuple[float, float]:
        return 0.0, float(self.t_max)

    @property
    def positions(self) -> np.ndarray:
        return self.t_max * np.arange(self.m + 2) / (self.m + 1)

    @property
    def free(self) -> np.ndarray:
        """Positions of the inferred nodes ``t_0..t_m``."""
        return self.positions[:-1]

    def with_boundaries(self, free_values) -> np.ndarray:
        v = np.asarray(free_values, dtype=float)
        if v.shape != (self.m + 1,):
            raise ValueError(f"expected {self.m + 1} free values, got shape {v.shape}")
        return np.concatenate((v, [1.0]))

    def fix_boundaries(self, values: np.ndarray) -> np.ndarray:
        values = np.array(values, dtype=float)
        values[-1] = 1.0
        return values


Grid = CrowdingGrid | DiffusivityGrid


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFunction:
    """Linear interpolant through ``(node_positions[i], node_values[i])``.

    Evaluation outside ``[domain_lo, domain_hi]`` raises :class:`DomainError`.
    """

    node_positions: np.ndarray
    node_values: np.ndarray

    def __post_init__(self):
        x = np.array(self.node_positions, dtype=float)
        y = np.array(self.node_values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValueError("positions and values must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(x) <= 0):
            raise ValueError("node positions must be strictly increasing")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "node_positions", x)
        object.__setattr__(self, "node_values", y)

    @property
    def domain_lo(self) -> float:
        return float(self.node_positions[0])

    @property
    def domain_hi(self) -> float:
        return float(self.node_positions[-1])

    @property
    def max_slope(self) -> float:
        return float(np.max(np.abs(np.diff(self.node_values) / np.diff(self.node_positions))))

    def __call__(self, x):
        return evaluate(self, x)

    def segment(self, i: int) -> tuple[float, float]:
        """Intercept and slope ``(a, b)`` of segment ``i`` so that ``f(x) = a + b x``."""
        x0, x1 = self.node_positions[i], self.node_positions[i + 1]
        y0, y1 = self.node_values[i], self.node_values[i + 1]
        b = (y1 - y0) / (x1 - x0)
        return y0 - b * x0, b

    def to_record(self) -> dict:
        return {
            "domain_lo": self.domain_lo,
            "domain_hi": self.domain_hi,
            "positions": self.node_positions.tolist(),
            "values": self.node_values.tolist(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "PiecewiseLinearFunction":
        plf = cls(np.asarray(record["positions"]), np.asarray(record["values"]))
        if plf.domain_lo != record["domain_lo"] or plf.domain_hi != record["domain_hi"]:
            raise ValueError("record domain does not match its node positions")
        return plf


def evaluate(plf: PiecewiseLinearFunction, x):
    """Evaluate ``plf`` at scalar or array ``x``.

    Node values are returned exactly at node positions.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa >= plf.domain_lo) | ~(xa <= plf.domain_hi)):
        raise DomainError(
            f"x outside [{plf.domain_lo}, {plf.domain_hi}]: {xa[~((xa >= plf.domain_lo) & (xa <= plf.domain_hi))]}"
        )
    out = np.interp(xa, plf.node_positions, plf.node_values)
    return float(out) if np.ndim(x) == 0 else out


def from_closed_form(fn: Callable[[np.ndarray], np.ndarray], grid: Grid) -> PiecewiseLinearFunction:
    """Discretise ``fn`` on ``grid``; boundary nodes take the grid's fixed values."""
    x = grid.positions
    y = np.asarray(fn(x), dtype=float) * np.ones_like(x)
    if not np.all(np.isfinite(y)):
        raise FloatingPointError("fn is not finite on the grid")
    return PiecewiseLinearFunction(x, grid.fix_boundaries(y))


def crowding_function(interior_values, grid: CrowdingGrid | None = None) -> PiecewiseLinearFunction:
    """Build a crowding function from its ``m`` inferred nodes."""
    v = np.asarray(interior_values, dtype=float)
    grid = grid or CrowdingGrid(v.size)
    return PiecewiseLinearFunction(grid.positions, grid.with_boundaries(v))


def logistic_crowding(m: int = 10) -> PiecewiseLinearFunction:
    return from_closed_form(lambda u: 1.0 - u, CrowdingGrid(m))
