"""Reaction-diffusion model ``u_t = D Dhat(t) u_xx + r u f(u / K)`` on ``[0, L]``.

The PDE is semi-discretised with second-order central differences on a
uniform grid, zero-flux boundaries are closed with ghost nodes, and the
resulting ODE system is integrated with an adaptive Dormand-Prince 5(4)
pair compiled with numba. Crowding function and diffusivity profile are
passed to the kernel as node values on uniform grids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from numba import njit
from scipy.integrate import solve_ivp

from .data import Dataset
from .functions import PiecewiseLinearFunction

FRONT_THRESHOLD = 1e-4
STEP_FRONT = 0.1
MAX_STEPS = 200_000


class NumericStabilityError(RuntimeError):
    pass


@dataclass(frozen=True)
class InitialCondition:
    """Scratch (``0`` on ``(a1 L, a2 L)``, ``u0`` elsewhere) or step (``u0`` for ``x < 0.1 L``)."""

    kind: Literal["scratch", "step"] = "scratch"
    alpha1: float = 0.3
    alpha2: float = 0.7

    def __post_init__(self):
        if self.kind not in ("scratch", "step"):
            raise ValueError(f"unknown initial condition {self.kind!r}")
        if self.kind == "scratch" and not 0 < self.alpha1 < self.alpha2 < 1:
            raise ValueError("scratch requires 0 < alpha1 < alpha2 < 1")

    def profile(self, x: np.ndarray, u0: float, L: float) -> np.ndarray:
        if self.kind == "scratch":
            inside = (x > self.alpha1 * L) & (x < self.alpha2 * L)
            return np.where(inside, 0.0, u0)
        return np.where(x < STEP_FRONT * L, u0, 0.0)

    def to_record(self) -> dict:
        if self.kind == "step":
            return {"kind": "step"}
        return {"kind": "scratch", "alpha1": self.alpha1, "alpha2": self.alpha2}

    @classmethod
    def from_record(cls, rec: dict) -> "InitialCondition":
        if rec["kind"] == "step":
            return cls("step")
        return cls("scratch", float(rec["alpha1"]), float(rec["alpha2"]))


def _uniform_nodes(plf: PiecewiseLinearFunction) -> tuple[float, float, np.ndarray]:
    x = plf.node_positions
    if not np.allclose(np.diff(x), (x[-1] - x[0]) / (x.size - 1), rtol=1e-9, atol=0):
        raise ValueError("the compiled solver requires uniformly spaced nodes")
    return float(x[0]), float(x[-1]), np.ascontiguousarray(plf.node_values, dtype=float)


@dataclass(frozen=True, eq=False)
class PdeParams:
    """Parameters of the spatial model.

    ``f`` defaults to logistic crowding and ``dhat`` to a constant profile.
    ``t_max`` is the end of the diffusivity grid when ``dhat`` is constant.
    """

    D: float
    r: float
    K: float
    u0: float
    dhat: PiecewiseLinearFunction | None = None
    f: PiecewiseLinearFunction | Callable | None = None
    L: float = 1000.0
    grid_n: int = 201
    t_max: float = 10.0

    def __post_init__(self):
        if self.grid_n < 3:
            raise ValueError("grid_n must be at least 3")
        if not (self.K > 0 and self.L > 0 and self.D >= 0):
            raise ValueError("K and L must be positive and D non-negative")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.grid_n)

    def crowding_nodes(self) -> np.ndarray:
        if self.f is None:
            return np.array([1.0, 0.0])
        if isinstance(self.f, PiecewiseLinearFunction):
            lo, hi, v = _uniform_nodes(self.f)
            if lo != 0.0 or hi != 1.0:
                raise ValueError("crowding function must be defined on [0, 1]")
            return v
        raise TypeError("the compiled solver needs a piecewise-linear crowding function")

    def diffusivity_nodes(self) -> tuple[float, float, np.ndarray]:
        if self.dhat is None:
            return 0.0, float(self.t_max), np.array([1.0, 1.0])
        return _uniform_nodes(self.dhat)


@dataclass
class PdeSolution:
    times: np.ndarray
    x: np.ndarray
    fields: np.ndarray  # (n_times, grid_n)
    n_steps: int = 0
    L: float = field(default=1000.0)

    def overall_density(self) -> np.ndarray:
        return np.array([overall_density(u, self.L) for u in self.fields])

    def front_location(self, threshold: float = FRONT_THRESHOLD) -> np.ndarray:
        return np.array([front_location(u, self.x, threshold) for u in self.fields])


# -- compiled kernel --------------------------------------------------------

@njit(cache=True, inline="always")
def _interp_uniform(lo, hi, vals, z):
    # linear interpolation with linear extrapolation beyond the end nodes
    n = vals.size
    s = (z - lo) / (hi - lo) * (n - 1)
    i = int(math.floor(s))
    if i < 0:
        i = 0
    elif i > n - 2:
        i = n - 2
    w = s - i
    return vals[i] + w * (vals[i + 1] - vals[i])


@njit(cache=True)
def _rhs(t, u, out, D, r, K, inv_dx2, f_vals, d_lo, d_hi, d_vals):
    n = u.size
    tc = t
    if tc > d_hi:
        tc = d_hi
    dc = D * _interp_uniform(d_lo, d_hi, d_vals, tc) * inv_dx2
    for i in range(n):
        left = u[i - 1] if i > 0 else u[1]
        right = u[i + 1] if i < n - 1 else u[n - 2]
        react = r * u[i] * _interp_uniform(0.0, 1.0, f_vals, u[i] / K)
        out[i] = dc * (left - 2.0 * u[i] + right) + react


# Dormand-Prince 5(4) coefficients
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                                22 / 525, -1 / 40)


@njit(cache=True)
def _dopri5(u0, t_out, D, r, K, inv_dx2, f_vals, d_lo, d_hi, d_vals, rtol, atol, max_steps, fields):
    """Integrate to each time in ``t_out`` (sorted, >= 0). Returns steps taken, or -1 on failure."""
    n = u0.size
    u = u0.copy()
    k1 = np.empty(n); k2 = np.empty(n); k3 = np.empty(n); k4 = np.empty(n)
    k5 = np.empty(n); k6 = np.empty(n); k7 = np.empty(n)
    tmp = np.empty(n); unew = np.empty(n)
    t = 0.0
    j = 0
    while j < t_out.size and t_out[j] <= 0.0:
        fields[j, :] = u
        j += 1
    if j == t_out.size:
        return 0
    _rhs(t, u, k1, D, r, K, inv_dx2, f_vals, d_lo, d_hi, d_vals)
    # initial step from the stiffest linear mode and the reaction rate
    rate = 4.0 * D * inv_dx2 * max(1.0, d_vals.max()) + abs(r) * max(1.0, np.abs(f_vals).max())
    h = min(0.5 / rate if rate > 0 else t_out[-1], t_out[-1])
    h = max(h, 1e-12)
    steps = 0
    while j < t_out.size:
        if steps >= max_steps:
            return -1
        target = t_out[j]
        landing = False
        if t + h >= target - 1e-12 * max(1.0, abs(target)):
            h = target - t
            landing = True
        for i in range(n):
            tmp[i] = u[i] + h * _A21 * k1[i]
        _rhs(t + _C2 * h, tmp, k2, D, r, K, inv_dx2, f_vals, d_lo, d_hi, d_vals)
        for i in range(n):
            tmp[i] = u[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        _rhs(t + _C3 * h, tmp, k3, D, r, K, inv_dx2, f_vals, d_lo, d_hi, d_vals)
        for i in range(n):
            tmp[i] = u[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        _rhs(t + _C4 * h, tmp, k4, D, r, K, inv_dx2, f_vals, d_lo, d_hi, d_vals)
        for i in range(n):
            tmp[i] = u[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        _rhs(t + _C5 * h, tmp, k5, D, r, K, inv_dx2, f_vals, d_lo, d_hi, d_vals)
        for i in range(n):
            tmp[i] = u[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i]
                                 + _A65 * k5[i])
        _rhs(t + h, tmp, k6, D, r, K, inv_dx2, f_vals, d_lo, d_hi, d_vals)
        for i in range(n):
            unew[i] = u[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i]
                                  + _B6 * k6[i])
        _rhs(t + h, unew, k7, D, r, K, inv_dx2, f_vals, d_lo, d_hi, d_vals)
        err = 0.0
        for i in range(n):
            e = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i]
                     + _E7 * k7[i])
            sc = atol + rtol * max(abs(u[i]), abs(unew[i]))
            err += (e / sc) ** 2
        err = math.sqrt(err / n)
        steps += 1
        if not math.isfinite(err):
            h *= 0.1
            if h < 1e-14:
                return -1
            continue
        if err <= 1.0:
            t = target if landing else t + h
            for i in range(n):
                u[i] = unew[i]
                k1[i] = k7[i]
            if landing:
                while j < t_out.size and t_out[j] <= t:
                    fields[j, :] = u
                    j += 1
            fac = 0.9 * err ** -0.2 if err > 0 else 5.0
            h = h * min(5.0, max(0.2, fac))
        else:
            h = h * max(0.2, 0.9 * err ** -0.25)
            if h < 1e-14:
                return -1
    return steps


def solve_pde(p: PdeParams, ic: InitialCondition | Callable, times, rtol: float = 1e-6,
              atol: float | None = None, backend: Literal["numba", "scipy"] = "numba",
              check: bool = True) -> PdeSolution:
    """Density fields at each requested time.

    ``ic`` is an :class:`InitialCondition` or a callable ``x -> u(x, 0)``.
    The ``scipy`` backend uses ``solve_ivp`` and accepts a callable crowding
    function; it exists for cross-checking.
    """
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    x = p.x
    dx = x[1] - x[0]
    u_init = ic.profile(x, p.u0, p.L) if isinstance(ic, InitialCondition) else np.asarray(ic(x), float)
    atol = 1e-9 * p.K if atol is None else atol
    d_lo, d_hi, d_vals = p.diffusivity_nodes()

    if backend == "numba":
        f_vals = p.crowding_nodes()
        fields = np.empty((t.size, x.size))
        steps = _dopri5(u_init, t, float(p.D), float(p.r), float(p.K), 1.0 / dx**2, f_vals,
                        d_lo, d_hi, d_vals, rtol, atol, MAX_STEPS, fields)
        if steps < 0:
            raise NumericStabilityError("time integration failed (step size underflow or step limit)")
    elif backend == "scipy":
        fields, steps = _solve_scipy(p, u_init, t, dx, rtol, atol, (d_lo, d_hi, d_vals))
    else:
        raise ValueError(f"unknown backend {backend!r}")

    if check:
        lowest = float(np.min(fields)) if fields.size else 0.0
        if not np.all(np.isfinite(fields)) or lowest < -1e-8 * p.K:
            raise NumericStabilityError(f"density fell to {lowest:.3e} (below -1e-8 K)")
    return PdeSolution(t, x, fields, int(steps), p.L)


def _solve_scipy(p: PdeParams, u_init, t, dx, rtol, atol, dnodes):
    d_lo, d_hi, d_vals = dnodes
    d_grid = np.linspace(d_lo, d_hi, d_vals.size)
    if p.f is None:
        fn = lambda v: 1.0 - v  # noqa: E731
    elif isinstance(p.f, PiecewiseLinearFunction):
        xs, ys = p.f.node_positions, p.f.node_values
        fn = lambda v: np.interp(v, xs, ys)  # noqa: E731
    else:
        fn = p.f

    def rhs(tt, u):
        lap = np.empty_like(u)
        lap[1:-1] = u[:-2] - 2 * u[1:-1] + u[2:]
        lap[0] = 2 * (u[1] - u[0])
        lap[-1] = 2 * (u[-2] - u[-1])
        dc = p.D * np.interp(min(tt, d_hi), d_grid, d_vals) / dx**2
        return dc * lap + p.r * u * fn(u / p.K)

    sol = solve_ivp(rhs, (0.0, float(t[-1])), u_init, method="RK45", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericStabilityError(sol.message)
    return sol.y.T.copy(), sol.nfev


def overall_density(field, L: float) -> float:
    """Spatial average ``(1/L) * integral of u`` by the trapezoid rule."""
    u = np.asarray(field, dtype=float)
    dx = L / (u.size - 1)
    return float(dx * (u.sum() - 0.5 * (u[0] + u[-1])) / L)


def front_location(field, x_grid, threshold: float = FRONT_THRESHOLD) -> float:
    """Leftmost position where the density drops below ``threshold``.

    Linear interpolation between the bracketing nodes gives sub-grid
    resolution. Returns ``x_grid[-1]`` if no node is below the threshold and
    ``x_grid[0]`` if every node is.
    """
    u = np.asarray(field, dtype=float)
    x = np.asarray(x_grid, dtype=float)
    below = np.flatnonzero(u < threshold)
    if below.size == 0:
        return float(x[-1])
    i = int(below[0])
    if i == 0:
        return float(x[0])
    u_hi, u_lo = u[i - 1], u[i]
    w = (u_hi - threshold) / (u_hi - u_lo)
    return float(x[i - 1] + w * (x[i] - x[i - 1]))


def observe_summaries(times, U_series, F_series=None, sigma1: float = 1e-4, sigma2: float = 0.0,
                      replicates: int = 1, seed=None, scenario_id: str = "",
                      metadata: dict | None = None) -> Dataset:
    """Noisy overall-density (and optionally front-location) records."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    t = np.asarray(times, dtype=float)
    parts = [("U", np.asarray(U_series, dtype=float), sigma1)]
    if F_series is not None:
        parts.append(("F", np.asarray(F_series, dtype=float), sigma2))
    stat, time, rep, val = [], [], [], []
    for kind, series, sigma in parts:
        eps = rng.standard_normal((t.size, replicates))
        val.append((series[:, None] + sigma * eps).ravel())
        time.append(np.repeat(t, replicates))
        rep.append(np.tile(np.arange(replicates), t.size))
        stat.append(np.full(t.size * replicates, kind, dtype=object))
    return Dataset.from_arrays(
        time=np.concatenate(time), value=np.concatenate(val), replicate=np.concatenate(rep),
        statistic=np.concatenate(stat), scenario_id=scenario_id, metadata=metadata,
    )
