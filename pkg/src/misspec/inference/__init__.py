from .diagnostics import bayesian_r2, credible_intervals, ess, rhat, summarise
from .mcmc import ChainResult, SamplerSettings, StuckChainError, adaptive_metropolis
from .models import MODELS, BoundModel, ModelSettings, build_layout, log_likelihood
from .params import NodeBlock, ParameterLayout, ScalarParam, log_prior
from .posterior import LogPosterior, run_chain, run_chains

__all__ = [
    "MODELS", "BoundModel", "ChainResult", "LogPosterior", "ModelSettings", "NodeBlock",
    "ParameterLayout", "SamplerSettings", "ScalarParam", "StuckChainError", "adaptive_metropolis",
    "bayesian_r2", "build_layout", "credible_intervals", "ess", "log_likelihood", "log_prior",
    "rhat", "run_chain", "run_chains", "summarise",
]
