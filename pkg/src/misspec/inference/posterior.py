"""Posterior targets and multi-chain runs."""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..data import Dataset
from ..gp_priors import Gp2Spec
from .mcmc import ChainResult, SamplerSettings, adaptive_metropolis
from .models import BoundModel, ModelSettings, initial_proposal_cov

log = logging.getLogger(__name__)


class LogPosterior:
    """Log posterior of a bound model, evaluated in unconstrained coordinates.

    Calling the object returns ``(target, log_post)``: ``target`` includes the
    transform Jacobian and drives the sampler; ``log_post`` is
    ``log_prior + log_likelihood`` with the prior taken from
    :meth:`ParameterLayout.reference_log_prior`, and is what the MAP is
    selected on. It does not depend on the chosen sampler transforms.
    """

    def __init__(self, model: BoundModel, use_likelihood: bool = True):
        self.model = model
        self.layout = model.layout
        self.use_likelihood = use_likelihood
        self._has_gp2 = any(isinstance(b.prior, Gp2Spec) for b in self.layout.blocks)

    def __call__(self, z: np.ndarray) -> tuple[float, float]:
        theta = self.layout.to_constrained(z)
        lp = self.layout.log_prior(theta)
        if lp == -math.inf:
            return -math.inf, -math.inf
        if self.use_likelihood:
            lp += self.model.log_likelihood(theta)
            if lp == -math.inf:
                return -math.inf, -math.inf
        ref = lp + self.layout.reference_correction(theta) if self._has_gp2 else lp
        return lp + self.layout.log_jacobian(z), ref


def run_chain(model: BoundModel, seed, settings: SamplerSettings,
              use_likelihood: bool = True) -> ChainResult:
    """One adaptive-Metropolis chain started from the layout's initial values."""
    rng = np.random.default_rng(seed)
    target = LogPosterior(model, use_likelihood)
    layout = model.layout
    z0 = layout.to_unconstrained(layout.initial())
    cov0 = initial_proposal_cov(layout)
    states, stats, rate, scale, cov = adaptive_metropolis(target, z0, settings, rng, init_cov=cov0)
    draws = np.array([layout.to_constrained(z) for z in states]) if len(states) else states
    return ChainResult(layout.names, draws, stats, rate, scale, cov,
                       seed=None if isinstance(seed, np.random.SeedSequence) else seed,
                       n_iters=settings.n_iters)


def _chain_job(args):
    settings, dataset, sampler, seed, use_likelihood = args
    model = BoundModel(settings, dataset)
    return run_chain(model, seed, sampler, use_likelihood)


def chain_seeds(seed: int, n_chains: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n_chains)


def max_workers(n_chains: int) -> int:
    env = os.environ.get("MISSPEC_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(n_chains, cap))


def run_chains(settings: ModelSettings, dataset: Dataset, seed: int, n_chains: int = 4,
               sampler: SamplerSettings | None = None, use_likelihood: bool = True,
               workers: int | None = None) -> list[ChainResult]:
    """Independent chains with spawned seed streams, optionally in worker processes."""
    sampler = sampler or SamplerSettings()
    jobs = [(settings, dataset, sampler, s, use_likelihood) for s in chain_seeds(seed, n_chains)]
    workers = max_workers(n_chains) if workers is None else workers
    if workers <= 1:
        return [_chain_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_chain_job, jobs))
