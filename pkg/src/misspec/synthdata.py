"""Seeded generators for the synthetic experiments.

Every generator writes its full generative record into ``Dataset.metadata``
(``truth``, observation schedule, noise levels, solver configuration), so
downstream fits and checks compare against the echo rather than against
constants.
"""
from __future__ import annotations

import zlib

import numpy as np

from .data import Dataset
from .functions import DiffusivityGrid, from_closed_form
from .ode import OdeParams, observe, solve_richards
from .pde import InitialCondition, PdeParams, observe_summaries, solve_pde

R_TRUE = 1.0
K_TRUE = 5e-3
SIGMA_TRUE = 1e-4
D_MAX = 300.0
L_DEFAULT = 1000.0
GRID_N = 201
T_MAX = 10.0
N_TIMES = 11
REPLICATES = 5
# enough replicates that the initial-condition dependence of r is resolved
# for any seed (CI separation at K/20 vs K/2 held in 4 of 10 seeds with 5)
FIG1_REPLICATES = 20
FIG1_U0_FRACTIONS = {"K20": 1 / 20, "K10": 1 / 10, "K4": 1 / 4, "K2": 1 / 2}
# scratch geometry and monolayer density per initial condition. The text gives
# 0.1K for the wider scratch; the figure caption's 4e-4 is used (see module docs).
FIG4_IC = {1: ((0.3, 0.7), 4e-4), 2: ((0.4, 0.6), 3e-4)}
FIG5_U0 = 0.5 * K_TRUE
TABLE1_N = (5, 50, 100, 200)
# solver tolerance for data generation (tighter than the inference default)
GEN_RTOL = 1e-8
# the true diffusivity is passed to the solver as a fine piecewise-linear profile
DHAT_GEN_SEGMENTS = 1000


def observation_times(n: int = N_TIMES, t_max: float = T_MAX) -> np.ndarray:
    return np.linspace(0.0, t_max, n)


def _rng(seed: int, key: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(key.encode())])


def dhat_eq8(t):
    """Normalised diffusivity with a disturbance phase: ``k(t)/k(10)``, ``k = t^3/(t^3+3) + 0.1``."""
    t = np.asarray(t, dtype=float)

    def k(s):
        return s**3 / (s**3 + 3.0) + 0.1

    return k(t) / k(10.0)


# -- ODE scenarios ------------------------------------------------------------

def _richards_dataset(scenario_id: str, u0: float, seed: int, replicates: int = REPLICATES,
                      beta: float = 2.0, key: str | None = None) -> Dataset:
    times = observation_times()
    p = OdeParams(R_TRUE, K_TRUE, u0)
    u = solve_richards(p, beta, times)
    meta = {
        "scenario_id": scenario_id,
        "seed": seed,
        "generator": "richards_ode",
        "truth": {"r": R_TRUE, "K": K_TRUE, "u0": u0, "sigma": SIGMA_TRUE, "beta": beta},
        "crowding": "1 - u^2" if beta == 2.0 else f"1 - u^{beta}",
        "times": times.tolist(),
        "replicates": replicates,
    }
    return observe(times, u, SIGMA_TRUE, replicates, _rng(seed, key or scenario_id),
                   statistic="u", scenario_id=scenario_id, metadata=meta)


def make_fig1(seed: int) -> Dataset:
    """Richards (beta = 2) data for a range of initial densities, one member per ``u0``."""
    parts, members = [], {}
    for tag, frac in FIG1_U0_FRACTIONS.items():
        sid = f"fig1_u0_{tag}"
        ds = _richards_dataset(sid, frac * K_TRUE, seed, replicates=FIG1_REPLICATES)
        ds.metadata["u0_fraction"] = frac
        parts.append(ds)
        members[sid] = ds.metadata
    return Dataset.concat(parts, {"scenario_id": "fig1", "seed": seed, "members": members})


def make_fig3(ic: int, seed: int) -> Dataset:
    """Generalised logistic data with crowding ``1 - u^2``; ``u0 = K/10`` (ic 1) or ``K/2`` (ic 2)."""
    frac = {1: 0.1, 2: 0.5}[ic]
    # f = 1 - u^2 is Richards with beta = 2, so the closed form is exact
    return _richards_dataset(f"fig3_ic{ic}", frac * K_TRUE, seed)


# -- PDE scenarios ------------------------------------------------------------

def _pde_meta(ic: InitialCondition, L: float, grid_n: int) -> dict:
    return {"L": L, "grid_n": grid_n, "t_max": T_MAX, "ic": ic.to_record()}


def make_fig4(ic: int, N: int = REPLICATES, seed: int = 0, scenario_id: str | None = None,
              D: float = D_MAX, L: float = L_DEFAULT, grid_n: int = GRID_N) -> Dataset:
    """Scratch-assay overall density, constant diffusivity and logistic growth.

    Both initial conditions have the same overall density at ``t = 0``.
    """
    (a1, a2), u0 = FIG4_IC[ic]
    icond = InitialCondition("scratch", a1, a2)
    times = observation_times()
    p = PdeParams(D=D, r=R_TRUE, K=K_TRUE, u0=u0, L=L, grid_n=grid_n, t_max=T_MAX)
    sol = solve_pde(p, icond, times, rtol=GEN_RTOL)
    U = sol.overall_density()
    sid = scenario_id or f"fig4_ic{ic}"
    meta = {
        "scenario_id": sid,
        "seed": seed,
        "generator": "scratch_pde",
        "truth": {"r": R_TRUE, "K": K_TRUE, "u0": u0, "D": D, "sigma1": SIGMA_TRUE,
                  "U0": float(U[0])},
        "pde": _pde_meta(icond, L, grid_n),
        "times": times.tolist(),
        "replicates": N,
        "noiseless": {"U": U.tolist()},
    }
    return observe_summaries(times, U, None, SIGMA_TRUE, replicates=N,
                             seed=_rng(seed, f"fig4_ic{ic}_N{N}"), scenario_id=sid, metadata=meta)


def make_table1(N: int, seed: int) -> Dataset:
    parts, members = [], {}
    for ic in (1, 2):
        sid = f"table1_N{N}_ic{ic}"
        ds = make_fig4(ic, N, seed, scenario_id=sid)
        parts.append(ds)
        members[sid] = ds.metadata
    return Dataset.concat(parts, {"scenario_id": f"table1_N{N}", "seed": seed, "members": members})


def make_fig5(seed: int, replicates: int = REPLICATES, D: float = D_MAX, L: float = L_DEFAULT,
              grid_n: int = GRID_N, sigma1: float = SIGMA_TRUE, sigma2: float | None = None) -> Dataset:
    """Moving front (step initial condition) with a time-dependent diffusivity.

    Observes overall density and front location.
    """
    sigma2 = 0.01 * L if sigma2 is None else sigma2
    icond = InitialCondition("step")
    times = observation_times()
    dhat = from_closed_form(dhat_eq8, DiffusivityGrid(DHAT_GEN_SEGMENTS - 1, T_MAX))
    p = PdeParams(D=D, r=R_TRUE, K=K_TRUE, u0=FIG5_U0, dhat=dhat, L=L, grid_n=grid_n, t_max=T_MAX)
    sol = solve_pde(p, icond, times, rtol=GEN_RTOL)
    U, F = sol.overall_density(), sol.front_location()
    truth_dhat = from_closed_form(dhat_eq8, DiffusivityGrid(19, T_MAX))
    meta = {
        "scenario_id": "fig5",
        "seed": seed,
        "generator": "step_pde",
        "truth": {"r": R_TRUE, "K": K_TRUE, "u0": FIG5_U0, "D": D, "sigma1": sigma1,
                  "sigma2": sigma2, "dhat": truth_dhat.to_record()},
        "dhat": "k(t)/k(10), k(t) = t^3/(t^3+3) + 0.1",
        "dhat_resolution": int(dhat.node_positions.size),
        "pde": _pde_meta(icond, L, grid_n),
        "times": times.tolist(),
        "replicates": replicates,
        "noiseless": {"U": U.tolist(), "F": F.tolist()},
    }
    return observe_summaries(times, U, F, sigma1, sigma2, replicates, _rng(seed, "fig5"),
                             scenario_id="fig5", metadata=meta)


SCENARIOS = {
    "fig1": make_fig1,
    "fig3_ic1": lambda seed: make_fig3(1, seed),
    "fig3_ic2": lambda seed: make_fig3(2, seed),
    "fig4_ic1": lambda seed: make_fig4(1, REPLICATES, seed),
    "fig4_ic2": lambda seed: make_fig4(2, REPLICATES, seed),
    "fig5": make_fig5,
    **{f"table1_N{n}": (lambda seed, n=n: make_table1(n, seed)) for n in TABLE1_N},
}


def generate(scenario_id: str, seed: int) -> Dataset:
    try:
        return SCENARIOS[scenario_id](seed)
    except KeyError:
        raise KeyError(f"unknown scenario {scenario_id!r}; valid ids: {', '.join(SCENARIOS)}") from None
