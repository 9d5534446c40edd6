"""Convergence diagnostics and posterior summaries."""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .mcmc import ChainResult


def _stack(chains) -> np.ndarray:
    """Chains as an ``(n_chains, n_draws, dim)`` array."""
    if isinstance(chains, np.ndarray):
        a = chains.astype(float)
    else:
        a = np.stack([c.draws if isinstance(c, ChainResult) else np.asarray(c, float) for c in chains])
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise ValueError("expected chains shaped (n_chains, n_draws[, dim])")
    return a


def split_chains(a: np.ndarray) -> np.ndarray:
    """Halve every chain; an odd middle draw is dropped."""
    n = a.shape[1] // 2
    if n < 2:
        raise ValueError("chains are too short to split")
    return np.concatenate([a[:, :n], a[:, -n:]], axis=0)


def _classic_rhat(x: np.ndarray) -> float:
    m, n = x.shape
    chain_means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean()
    B = n * chain_means.var(ddof=1)
    if W == 0.0:
        return 1.0
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


def rank_normalise(x: np.ndarray) -> np.ndarray:
    """Pooled ranks (ties averaged) mapped to normal scores."""
    r = rankdata(x, method="average").reshape(x.shape)
    return ndtri((r - 0.375) / (x.size + 0.25))


def rhat(chains) -> np.ndarray:
    """Rank-normalised split-R-hat for each coordinate.

    Accepts a list of :class:`ChainResult` or an array shaped
    ``(n_chains, n_draws[, dim])``. A single chain is allowed since it is
    split into two halves.
    """
    a = split_chains(_stack(chains))
    if a.shape[0] < 2:
        raise ValueError("need at least two split halves")
    return np.array([_classic_rhat(rank_normalise(a[:, :, k])) for k in range(a.shape[2])])


def _autocorr(x: np.ndarray) -> np.ndarray:
    n = x.size
    x = x - x.mean()
    f = np.fft.rfft(x, 2 * n)
    ac = np.fft.irfft(f * np.conj(f))[:n]
    return ac / ac[0] if ac[0] > 0 else np.ones(n)


def ess(chains) -> np.ndarray:
    """Effective sample size per coordinate (Geyer's initial monotone sequence)."""
    a = _stack(chains)
    m, n, d = a.shape
    out = np.empty(d)
    for k in range(d):
        x = a[:, :, k]
        if np.all(x == x.flat[0]):
            out[k] = m * n
            continue
        rho = np.mean([_autocorr(c) for c in x], axis=0)
        pairs = rho[:-1:2] + rho[1::2]
        cut = np.argmax(pairs <= 0) if np.any(pairs <= 0) else pairs.size
        pairs = np.minimum.accumulate(pairs[:cut])
        tau = -1.0 + 2.0 * pairs.sum()
        out[k] = m * n / max(tau, 1e-12)
    return out


def bayesian_r2(predictions: np.ndarray, y: np.ndarray, prob: float = 0.95) -> dict:
    """Bayesian R^2 per draw, ``V_fit / (V_fit + V_res)``.

    ``predictions`` is ``(n_draws, n_records)``.
    """
    pred = np.atleast_2d(np.asarray(predictions, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        raise ValueError("Bayesian R^2 needs at least two records")
    v_fit = pred.var(axis=1, ddof=1)
    v_res = (y[None, :] - pred).var(axis=1, ddof=1)
    denom = v_fit + v_res
    r2 = np.where(denom > 0, v_fit / np.where(denom > 0, denom, 1.0), 1.0)
    tail = 50 * (1 - prob)
    lo, hi = np.percentile(r2, [tail, 100 - tail])
    return {"mean": float(r2.mean()), "ci95": [float(lo), float(hi)], "draws": r2}


def credible_intervals(draws: np.ndarray, prob: float = 0.95) -> np.ndarray:
    """Equal-tailed percentile intervals; ``(dim, 2)``."""
    tail = 50 * (1 - prob)
    return np.percentile(np.atleast_2d(draws), [tail, 100 - tail], axis=0).T


def summarise(chains: list[ChainResult], names: list[str] | None = None) -> dict:
    """MAP, medians, 95% credible intervals and R-hat from pooled chains."""
    names = names or chains[0].names
    pooled = np.concatenate([c.draws for c in chains], axis=0)
    logp = np.concatenate([c.log_posterior for c in chains])
    best = int(np.argmax(logp))
    ci = credible_intervals(pooled)
    rh = rhat(chains)
    return {
        "names": list(names),
        "map": dict(zip(names, pooled[best].tolist())),
        "map_log_posterior": float(logp[best]),
        "median": dict(zip(names, np.median(pooled, axis=0).tolist())),
        "mean": dict(zip(names, pooled.mean(axis=0).tolist())),
        "ci95": {k: [float(lo), float(hi)] for k, (lo, hi) in zip(names, ci)},
        "rhat": dict(zip(names, rh.tolist())),
        "acceptance": [float(c.acceptance_rate) for c in chains],
        "n_draws": int(pooled.shape[0]),
    }
