"""Discretised Gaussian-process priors for the two unknown model terms.

* ``GP1``: crowding function. Gaussian with logistic mean ``1 - u`` and a
  squared-exponential kernel pinned to zero variance at ``u = 0`` and
  ``u = 1``, restricted to the positive orthant.
* ``GP2``: normalised diffusivity. A latent squared-exponential process ``h``
  with unit marginals is pushed through the standard normal CDF to give
  ``g ~ Uniform(0, 1)`` marginals (Gaussian copula), then conditioned on
  ``g(t_max) = 0.5`` so that ``D(t) = 2 g(t)`` ends at one.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtr, ndtri

from .functions import CrowdingGrid, DiffusivityGrid, PiecewiseLinearFunction

LOG_2PI = np.log(2.0 * np.pi)
JITTER = 1e-10
MAX_REJECTION_ATTEMPTS = 10**6
# keeps g strictly inside (0, 1) when h is far in the tails
_G_CLAMP = 1e-15


class SamplingError(RuntimeError):
    pass


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _factorise(cov: np.ndarray) -> np.ndarray:
    cov = np.array(cov, dtype=float)
    scale = np.max(np.diag(cov)) if cov.size else 0.0
    if scale <= 0:
        return np.zeros_like(cov)
    cov[np.diag_indices_from(cov)] += JITTER * scale
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as err:
        raise FloatingPointError("covariance is not positive definite after jitter") from err


def _mvn_logpdf(x: np.ndarray, mean: np.ndarray, chol: np.ndarray) -> float:
    z = solve_triangular(chol, x - mean, lower=True, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return float(-0.5 * (z @ z) - 0.5 * logdet - 0.5 * x.size * LOG_2PI)


# --------------------------------------------------------------------------
# GP1: crowding function
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Gp1Spec:
    eta: float = 0.2
    rho: float = 0.5
    m: int = 10

    def __post_init__(self):
        if not (self.eta > 0 and self.rho > 0):
            raise ValueError("eta and rho must be positive")

    @property
    def grid(self) -> CrowdingGrid:
        return CrowdingGrid(self.m)

    @property
    def mean(self) -> np.ndarray:
        return 1.0 - self.grid.interior

    def to_record(self) -> dict:
        return {"kind": "gp1", "eta": self.eta, "rho": self.rho, "m": self.m}


def gp1_kernel(ui, uj, eta: float, rho: float):
    """Boundary-pinned squared-exponential kernel; equals ``eta**2`` at (0.5, 0.5)."""
    ui, uj = np.asarray(ui, dtype=float), np.asarray(uj, dtype=float)
    se = np.exp(-((ui - uj) ** 2) / (2.0 * rho**2))
    return 16.0 * eta**2 * se * ui * uj * (1.0 - ui) * (1.0 - uj)


def gp1_covariance(spec: Gp1Spec) -> np.ndarray:
    """Prior covariance over the ``m`` interior nodes (no jitter)."""
    u = spec.grid.interior
    return gp1_kernel(u[:, None], u[None, :], spec.eta, spec.rho)


@lru_cache(maxsize=64)
def _gp1_chol(spec: Gp1Spec) -> np.ndarray:
    chol = _factorise(gp1_covariance(spec))
    chol.setflags(write=False)
    return chol


def gp1_log_prior(f_interior, spec: Gp1Spec) -> float:
    """Gaussian log-density restricted to ``f > 0``.

    The orthant normalising constant is omitted; it does not depend on the
    node values.
    """
    f = np.asarray(f_interior, dtype=float)
    if f.shape != (spec.m,):
        raise ValueError(f"expected {spec.m} crowding nodes, got shape {f.shape}")
    if not np.all(f > 0):
        return -np.inf
    return _mvn_logpdf(f, spec.mean, _gp1_chol(spec))


def gp1_sample_nodes(spec: Gp1Spec, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` sets of interior nodes by rejection from the orthant.

    Returns an ``(n, m)`` array.
    """
    rng = _as_rng(seed)
    chol = _gp1_chol(spec)
    out = np.empty((n, spec.m))
    have, attempts = 0, 0
    while have < n:
        batch = max(64, 2 * (n - have))
        if attempts + batch > MAX_REJECTION_ATTEMPTS * max(n, 1):
            rate = have / max(attempts, 1)
            raise SamplingError(
                f"rejection sampler exhausted after {attempts} attempts (acceptance ~{rate:.2e})"
            )
        z = rng.standard_normal((batch, spec.m))
        draws = spec.mean + z @ chol.T
        draws = draws[np.all(draws > 0, axis=1)]
        take = min(len(draws), n - have)
        out[have:have + take] = draws[:take]
        have += take
        attempts += batch
    return out


def gp1_sample(spec: Gp1Spec, seed=None) -> PiecewiseLinearFunction:
    """One crowding function drawn from GP1, with ``f(0) = 1`` and ``f(1) = 0`` attached."""
    nodes = gp1_sample_nodes(spec, 1, seed)[0]
    grid = spec.grid
    return PiecewiseLinearFunction(grid.positions, grid.with_boundaries(nodes))


# --------------------------------------------------------------------------
# GP2: time-dependent diffusivity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Gp2Spec:
    """GP2 over ``t_i = t_max i / (m + 1)``; the ``m + 1`` nodes ``g_0..g_m`` are free."""

    rho: float = 2.0
    m: int = 19
    t_max: float = 10.0

    def __post_init__(self):
        if not (self.rho > 0 and self.t_max > 0):
            raise ValueError("rho and t_max must be positive")

    @property
    def grid(self) -> DiffusivityGrid:
        return DiffusivityGrid(self.m, self.t_max)

    @property
    def n_free(self) -> int:
        return self.m + 1

    def to_record(self) -> dict:
        return {"kind": "gp2", "rho": self.rho, "m": self.m, "t_max": self.t_max}


def gp2_latent_covariance(spec: Gp2Spec) -> np.ndarray:
    """Unconditioned latent covariance over all ``m + 2`` nodes."""
    t = spec.grid.positions
    return np.exp(-((t[:, None] - t[None, :]) ** 2) / (2.0 * spec.rho**2))


def gp2_latent_conditional(spec: Gp2Spec) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of ``h(t_0..t_m)`` given ``h(t_max) = 0``."""
    c = gp2_latent_covariance(spec)
    c11, c12, c22 = c[:-1, :-1], c[:-1, -1], c[-1, -1]
    h_end = ndtri(0.5)
    mean = c12 / c22 * h_end
    cov = c11 - np.outer(c12, c12) / c22
    return mean, 0.5 * (cov + cov.T)


@lru_cache(maxsize=64)
def _gp2_factors(spec: Gp2Spec) -> tuple[np.ndarray, np.ndarray]:
    mean, cov = gp2_latent_conditional(spec)
    chol = _factorise(cov)
    mean.setflags(write=False)
    chol.setflags(write=False)
    return mean, chol


def std_normal_cdf(h):
    return ndtr(h)


def std_normal_quantile(p):
    return ndtri(p)


def gp2_latent_log_prior(h, spec: Gp2Spec) -> float:
    """Conditioned Gaussian log-density of the latent nodes."""
    h = np.asarray(h, dtype=float)
    if h.shape != (spec.n_free,):
        raise ValueError(f"expected {spec.n_free} latent nodes, got shape {h.shape}")
    mean, chol = _gp2_factors(spec)
    return _mvn_logpdf(h, mean, chol)


def gp2_log_prior(g_free, spec: Gp2Spec) -> float:
    """Copula log-density of ``g_0..g_m`` (support ``(0, 1)``)."""
    g = np.asarray(g_free, dtype=float)
    if g.shape != (spec.n_free,):
        raise ValueError(f"expected {spec.n_free} diffusivity nodes, got shape {g.shape}")
    if not np.all((g > 0) & (g < 1)):
        return -np.inf
    h = ndtri(g)
    # dh/dg = 1 / phi(h)
    log_jac = np.sum(0.5 * h**2 + 0.5 * LOG_2PI)
    return gp2_latent_log_prior(h, spec) + float(log_jac)


def gp2_project(g_target, spec: Gp2Spec, noise: float = 0.02) -> np.ndarray:
    """Smooth target node values into a region of typical prior density.

    Returns the latent GP regression mean given ``probit(g_target)`` observed
    with standard deviation ``noise``, mapped back to ``(0, 1)``. Exact target
    profiles can sit far out in the prior's low-variance directions, which
    makes them poor chain starting points.
    """
    g = np.clip(np.asarray(g_target, dtype=float), _G_CLAMP, 1.0 - _G_CLAMP)
    mean, cov = gp2_latent_conditional(spec)
    h = mean + cov @ np.linalg.solve(cov + noise**2 * np.eye(cov.shape[0]), ndtri(g) - mean)
    return latent_to_g(h)


def gp2_sample_latent(spec: Gp2Spec, n: int, seed=None, conditioned: bool = True) -> np.ndarray:
    """Latent draws: ``(n, m + 1)`` conditioned, or ``(n, m + 2)`` unconditioned."""
    rng = _as_rng(seed)
    if conditioned:
        mean, chol = _gp2_factors(spec)
    else:
        chol = _factorise(gp2_latent_covariance(spec))
        mean = np.zeros(chol.shape[0])
    z = rng.standard_normal((n, chol.shape[0]))
    return mean + z @ chol.T


def latent_to_g(h):
    return np.clip(ndtr(h), _G_CLAMP, 1.0 - _G_CLAMP)


def gp2_sample(spec: Gp2Spec, seed=None, conditioned: bool = True) -> PiecewiseLinearFunction:
    """One normalised diffusivity profile ``D(t) = 2 g(t)`` on ``[0, t_max]``.

    Conditioned draws end at exactly one; unconditioned draws carry the
    sampled final node.
    """
    h = gp2_sample_latent(spec, 1, seed, conditioned)[0]
    d = 2.0 * latent_to_g(h)
    grid = spec.grid
    if conditioned:
        d = grid.with_boundaries(d)
    return PiecewiseLinearFunction(grid.positions, d)


def prior_spec_from_record(record: dict) -> Gp1Spec | Gp2Spec:
    kind = record.get("kind")
    if kind == "gp1":
        return Gp1Spec(eta=float(record["eta"]), rho=float(record["rho"]), m=int(record["m"]))
    if kind == "gp2":
        return Gp2Spec(rho=float(record["rho"]), m=int(record["m"]), t_max=float(record["t_max"]))
    raise ValueError(f"unknown prior kind {kind!r}")
