"""Adaptive random-walk Metropolis with adaptive scaling.

The proposal is ``y = x + exp(log_scale) * L z`` with ``L`` the Cholesky
factor of a running covariance estimate. Both the covariance (from the chain
history) and the global scale (towards a target acceptance rate) adapt with
diminishing weights ``gamma_n = n ** -decay``.

By default adaptation stops at the end of burn-in, so the kept draws come
from a fixed-proposal Metropolis chain. Continuing to adapt with
``decay = 0.66`` weights the running covariance towards the last few
thousand iterations; a proposal fitted to the chain's recent region leaves
the tails under-explored (marginal variances 15 to 35 percent low on a
26-dimensional Gaussian with a frozen-proposal control at 1.00).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


class StuckChainError(RuntimeError):
    pass


@dataclass
class SamplerSettings:
    n_iters: int = 100_000
    thin: int = 10
    burn_in: float = 0.5
    target_accept: float = 0.234
    decay: float = 0.66
    # iterations of history the initial covariance guess is worth
    cov_offset: int = 100
    adapt: bool = True
    freeze_after_burn_in: bool = True
    max_consecutive_rejections: int = 10_000

    def to_record(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ChainResult:
    """Post-burn-in, thinned output of one chain (constrained space)."""

    names: list[str]
    draws: np.ndarray
    log_posterior: np.ndarray
    acceptance_rate: float
    scale: float
    proposal_cov: np.ndarray
    seed: int | None = None
    n_iters: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def map_index(self) -> int:
        return int(np.argmax(self.log_posterior))

    @property
    def map_draw(self) -> np.ndarray:
        return self.draws[self.map_index]


def _chol(cov: np.ndarray) -> np.ndarray:
    jitter = 0.0
    scale = float(np.max(np.diag(cov)))
    for _ in range(8):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            jitter = scale * 1e-12 if jitter == 0.0 else jitter * 100
    raise np.linalg.LinAlgError("proposal covariance is not positive definite")


def adaptive_metropolis(
    log_target: Callable[[np.ndarray], tuple[float, float]],
    x0: np.ndarray,
    settings: SamplerSettings,
    rng: np.random.Generator,
    init_cov: np.ndarray | None = None,
    init_scale: float | None = None,
):
    """Run one chain in unconstrained space.

    ``log_target(x)`` returns ``(log density in x, recorded statistic)``; the
    statistic (typically the constrained-space log posterior) is stored
    alongside each kept state.

    Returns ``(states, stats, acceptance_rate, scale, cov)`` with only the
    post-burn-in, thinned states kept.
    """
    x = np.array(x0, dtype=float)
    d = x.size
    cov = np.eye(d) if init_cov is None else np.array(init_cov, dtype=float)
    chol = _chol(cov)
    mean = x.copy()
    log_scale = math.log(2.38 / math.sqrt(d)) if init_scale is None else math.log(init_scale)
    lp, stat = log_target(x)
    if not math.isfinite(lp):
        raise ValueError("initial point has zero posterior density")

    n = settings.n_iters
    start = int(settings.burn_in * n)
    n_keep = len(range(start, n, settings.thin))
    states = np.empty((n_keep, d))
    stats = np.empty(n_keep)
    keep = 0
    accepted = 0
    accepted_kept = 0
    rejections = 0
    chunk = 4096
    for it in range(n):
        if it % chunk == 0:
            z_all = rng.standard_normal((chunk, d))
            u_all = np.log(rng.random(chunk))
        y = x + math.exp(log_scale) * (chol @ z_all[it % chunk])
        lp_y, stat_y = log_target(y)
        log_alpha = lp_y - lp if lp_y > -math.inf else -math.inf
        if u_all[it % chunk] < log_alpha:
            x, lp, stat = y, lp_y, stat_y
            accepted += 1
            if it >= start:
                accepted_kept += 1
            rejections = 0
        else:
            rejections += 1
            if rejections >= settings.max_consecutive_rejections:
                raise StuckChainError(
                    f"{rejections} consecutive rejections at iteration {it}; "
                    f"scale={math.exp(log_scale):.3e}, log target={lp:.6g}"
                )
        if settings.adapt and (it < start or not settings.freeze_after_burn_in):
            alpha = math.exp(min(0.0, log_alpha)) if log_alpha > -math.inf else 0.0
            gamma = (it + 1) ** -settings.decay
            log_scale += gamma * (alpha - settings.target_accept)
            gc = (it + 1 + settings.cov_offset) ** -settings.decay
            dx = x - mean
            mean += gc * dx
            cov += gc * (np.outer(dx, dx) - cov)
            chol = _chol(cov)
        if it >= start and (it - start) % settings.thin == 0:
            states[keep] = x
            stats[keep] = stat
            keep += 1
    rate = accepted_kept / max(1, n - start)
    return states, stats, rate, math.exp(log_scale), cov
