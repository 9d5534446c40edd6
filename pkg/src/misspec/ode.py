"""Generalised logistic growth ``du/dt = r u f(u / K)``.

Three solvers are provided: the Richards closed form, an exact band-by-band
solution for piecewise-linear crowding functions, and adaptive numerical
integration for arbitrary crowding functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit
from scipy.integrate import solve_ivp

from .data import Dataset
from .functions import PiecewiseLinearFunction


class ParameterError(ValueError):
    pass


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OdeParams:
    r: float
    K: float
    u0: float

    def __post_init__(self):
        if not self.K > 0:
            raise ParameterError("K must be positive")


def _times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("times must be non-negative and non-decreasing")
    return t


def solve_richards(p: OdeParams, beta: float, times) -> np.ndarray:
    """Closed-form solution of the Richards model ``f(u) = 1 - u**beta``."""
    if not beta > 0:
        raise ParameterError("beta must be positive")
    t = _times(times)
    ratio = (p.K / p.u0) ** beta - 1.0
    return p.K * (1.0 + ratio * np.exp(-p.r * beta * t)) ** (-1.0 / beta)


def solve_logistic(p: OdeParams, times) -> np.ndarray:
    return solve_richards(p, 1.0, times)


# -- piecewise-analytic solver ----------------------------------------------
#
# On a band where f(v) = a + b v (v = u / K) the scaled equation
# dv/dt = r v (a + b v) is of Bernoulli type. With x = a r s,
#   v(s) = v_s e^x / (1 - b v_s r s psi(x)),   psi(x) = expm1(x) / x,
# which is regular at a = 0. Band exit times use
#   s = ln(v_e f_s / (v_s f_e)) / (a r).

@njit(cache=True)
def _lam(x):
    # log1p(x) / x
    return math.log1p(x) / x if x != 0.0 else 1.0


@njit(cache=True)
def _band_value(a, b, r, vs, s):
    x = a * r * s
    if x <= 0.0:
        psi = math.expm1(x) / x if x != 0.0 else 1.0
        return vs * math.exp(x) / (1.0 - b * vs * r * s * psi)
    # growing side: divide through by e^x to avoid overflow
    chi = -math.expm1(-x) / x
    return vs / (math.exp(-x) - b * vs * r * s * chi)


@njit(cache=True)
def _band_exit_time(a, b, r, vs, ve, fs, fe):
    if fe <= 0.0:
        return math.inf
    if b == 0.0:
        q = math.log(ve / vs) / a
    else:
        xs = a / (b * vs)
        xe = a / (b * ve)
        if abs(xs) < 0.5 and abs(xe) < 0.5:
            q = (_lam(xs) / vs - _lam(xe) / ve) / b
        else:
            q = (math.log(ve / vs) - math.log(fe / fs)) / a
    return q / r


@njit(cache=True)
def _analytic_kernel(x, y, r, v0, t, out):
    """Fill ``out`` with v(t); returns the number of band crossings."""
    n_nodes = x.size
    band = np.searchsorted(x, v0, side="right") - 1
    t_entry = 0.0
    vs = v0
    k = 0
    crossings = 0
    while k < t.size:
        b = (y[band + 1] - y[band]) / (x[band + 1] - x[band])
        a = y[band] - b * x[band]
        fs = a + b * vs
        t_exit = t_entry + _band_exit_time(a, b, r, vs, x[band + 1], fs, y[band + 1])
        while k < t.size and t[k] < t_exit:
            out[k] = _band_value(a, b, r, vs, t[k] - t_entry)
            k += 1
        if not math.isfinite(t_exit) or band + 2 >= n_nodes:
            break
        crossings += 1
        band += 1
        t_entry = t_exit
        vs = x[band]
    while k < t.size:
        out[k] = 1.0
        k += 1
    return crossings


def solve_piecewise_analytic(p: OdeParams, f: PiecewiseLinearFunction, times) -> np.ndarray:
    """Exact solution for a piecewise-linear crowding function on ``[0, 1]``.

    The trajectory is advanced band by band: inside ``[u_i, u_{i+1}]`` the
    equation has a closed form, and the time at which the density leaves the
    band is obtained by inverting it. Requested times are evaluated within
    whichever band they fall in.
    """
    t = _times(times)
    if f.domain_lo != 0.0 or f.domain_hi != 1.0:
        raise ParameterError("crowding function must be defined on [0, 1]")
    return solve_piecewise_nodes(p, f.node_positions, f.node_values, t)


def solve_piecewise_nodes(p: OdeParams, x: np.ndarray, y: np.ndarray, t: np.ndarray) -> np.ndarray:
    """:func:`solve_piecewise_analytic` on raw node arrays and sorted times (no copies)."""
    if not 0.0 < p.u0 < p.K:
        raise ParameterError("u0 must lie strictly inside (0, K)")
    if y[0] <= 0.0 or np.any(y[1:-1] <= 0.0):
        raise ParameterError("crowding function must be positive on [0, 1)")
    if p.r < 0:
        raise ParameterError("r must be non-negative")
    if p.r == 0.0:
        return np.full(t.shape, p.u0)
    out = np.empty(t.shape)
    _analytic_kernel(x, y, float(p.r), p.u0 / p.K, t, out)
    return p.K * out


def band_crossing_times(p: OdeParams, f: PiecewiseLinearFunction) -> np.ndarray:
    """Times at which the analytic trajectory reaches each node above ``u0 / K``."""
    x, y = f.node_positions, f.node_values
    v0 = p.u0 / p.K
    band = int(np.searchsorted(x, v0, side="right")) - 1
    t_entry, vs, out = 0.0, v0, []
    while band < len(x) - 1:
        a, b = f.segment(band)
        t_exit = t_entry + _band_exit_time(a, b, p.r, vs, x[band + 1], a + b * vs, y[band + 1])
        if not math.isfinite(t_exit):
            break
        out.append(t_exit)
        t_entry, vs, band = t_exit, x[band + 1], band + 1
    return np.asarray(out)


def solve_numeric(p: OdeParams, f: Callable[[float], float], times, rtol: float = 1e-8,
                  atol: float | None = None) -> np.ndarray:
    """Adaptive Runge-Kutta integration for an arbitrary crowding function."""
    t = _times(times)
    atol = 1e-10 * p.K if atol is None else atol

    def rhs(_, u):
        # trial stages may step marginally outside [0, K]
        return p.r * u * f(min(max(u[0] / p.K, 0.0), 1.0))

    sol = solve_ivp(rhs, (0.0, float(t[-1])), [p.u0], method="DOP853", t_eval=t,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(sol.message)
    return sol.y[0]


def observe(times, densities, sigma: float, replicates: int = 1, seed=None,
            statistic: str = "u", scenario_id: str = "", metadata: dict | None = None) -> Dataset:
    """Add independent Gaussian noise to model output, ``replicates`` times per time point."""
    if not sigma >= 0:
        raise ValueError("sigma must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    t = np.asarray(times, dtype=float)
    u = np.asarray(densities, dtype=float)
    eps = rng.standard_normal((t.size, replicates))
    values = u[:, None] + sigma * eps
    return Dataset.from_arrays(
        time=np.repeat(t, replicates),
        replicate=np.tile(np.arange(replicates), t.size),
        value=values.ravel(),
        statistic=statistic,
        scenario_id=scenario_id,
        metadata=metadata,
    )
