"""Fit orchestration and result files.

A result directory holds:

``draws.csv``
    Post-burn-in draws in constrained space, one column per coordinate,
    preceded by ``chain``, ``draw`` and ``log_posterior`` columns.
``summary.json``
    MAP, medians, 95% credible intervals, R-hat, ESS, acceptance rates,
    Bayesian R^2, the resolved config and the seed.
``histograms.csv``
    100-bin marginal histograms of every coordinate.
``functions.csv``
    Posterior mean and pointwise 95% band of each inferred function on a
    101-point grid, with a prior band where the function has a GP prior.

Every CSV starts with ``#`` comment lines carrying the seed and the resolved
config.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .data import Dataset
from .gp_priors import Gp1Spec, gp1_sample_nodes, gp2_sample_latent, latent_to_g
from .inference import BoundModel, bayesian_r2, ess, rhat, run_chains, summarise
from .inference.mcmc import ChainResult
from .synthdata import generate

log = logging.getLogger(__name__)

RHAT_THRESHOLD = 1.05
HIST_BINS = 100
FUNCTION_POINTS = 101
# posterior draws used for Bayesian R^2 and function bands (forward solves)
MAX_PREDICTIVE_DRAWS = 1000
PRIOR_BAND_DRAWS = 2000
DRAWS_FIXED_COLUMNS = ("chain", "draw", "log_posterior")


class ResultFormatError(ValueError):
    pass


@dataclass
class FitResult:
    config: ExperimentConfig
    dataset: Dataset
    model: BoundModel
    chains: list[ChainResult]
    summary: dict

    @property
    def converged(self) -> bool:
        return self.summary["converged"]


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    """Dataset named by the config, narrowed to one scenario."""
    if cfg.scenario is not None:
        try:
            ds = generate(cfg.scenario, cfg.data_seed)
        except KeyError as err:
            raise ConfigError(err.args[0]) from None
    else:
        path = Path(cfg.dataset)
        if not path.exists():
            raise FileNotFoundError(f"dataset not found: {path}")
        ds = Dataset.from_csv(path)
    ids = sorted(set(ds.scenario_id))
    if cfg.scenario_id is not None:
        if cfg.scenario_id not in ids:
            raise ConfigError(f"scenario_id {cfg.scenario_id!r} not in dataset (has {', '.join(ids)})")
        ds = ds.select(scenario_id=cfg.scenario_id)
    elif len(ids) > 1:
        raise ConfigError(f"dataset holds several scenarios ({', '.join(ids)}); set scenario_id")
    if len(ds) == 0:
        raise ConfigError("dataset is empty")
    return ds


def _thin_indices(n: int, k: int) -> np.ndarray:
    return np.unique(np.linspace(0, n - 1, min(n, k)).round().astype(int))


def _r2_by_statistic(model: BoundModel, pooled: np.ndarray) -> dict:
    idx = _thin_indices(pooled.shape[0], MAX_PREDICTIVE_DRAWS)
    preds = np.array([model.predict(pooled[i]) for i in idx])
    out = {}
    for stat in model.dataset.kinds:
        mask = model.dataset.mask(stat)
        r2 = bayesian_r2(preds[:, mask], model.y[mask])
        out[stat] = {"mean": r2["mean"], "ci95": r2["ci95"]}
    return out


def fit(cfg: ExperimentConfig, workers: int | None = None) -> FitResult:
    """Run every chain for one configuration and summarise."""
    ds = load_dataset(cfg)
    model = BoundModel(cfg.model, ds)
    chains = run_chains(cfg.model, ds, cfg.seed, cfg.chains, cfg.sampler, workers=workers)
    summary = summarise(chains)
    pooled = np.concatenate([c.draws for c in chains])
    summary["ess"] = dict(zip(summary["names"], ess(chains).tolist()))
    summary["r2"] = _r2_by_statistic(model, pooled)
    worst = max(summary["rhat"].values())
    summary["max_rhat"] = worst
    summary["converged"] = bool(worst < RHAT_THRESHOLD)
    summary["seed"] = cfg.seed
    summary["config_echo"] = cfg.to_record()
    summary["layout"] = model.layout.to_record()
    summary["dataset_metadata"] = ds.metadata
    if cfg.chains == 1:
        summary["warnings"] = ["single chain: R-hat computed from split halves only"]
    return FitResult(cfg, ds, model, chains, summary)


# -- plot data ---------------------------------------------------------------

def _band(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo, hi = np.percentile(values, [2.5, 97.5], axis=0)
    return values.mean(axis=0), lo, hi


def function_bands(result: FitResult) -> list[dict]:
    """Mean and 95% bands for the crowding and diffusivity functions."""
    model, cfg = result.model, result.config
    pooled = np.concatenate([c.draws for c in result.chains])
    draws = pooled[_thin_indices(pooled.shape[0], MAX_PREDICTIVE_DRAWS)]
    ms = cfg.model
    u = np.linspace(0.0, 1.0, FUNCTION_POINTS)
    rows = []

    def emit(name, x, values):
        mean, lo, hi = _band(values)
        rows.extend({"function": name, "x": float(a), "mean": float(b), "lower": float(c), "upper": float(d)}
                    for a, b, c, d in zip(x, mean, lo, hi))

    if ms.infers_crowding:
        emit("crowding", u, np.array([model.crowding(th)(u) for th in draws]))
        spec: Gp1Spec = ms.crowding_prior
        nodes = gp1_sample_nodes(spec, PRIOR_BAND_DRAWS, seed=cfg.seed)
        grid = spec.grid
        emit("crowding_prior", u, np.array([np.interp(u, grid.positions, grid.with_boundaries(v)) for v in nodes]))
    elif not ms.is_pde:
        if ms.kind == "richards":
            beta = draws[:, model.layout.index("beta")]
        else:
            beta = np.full(len(draws), 2.0 if ms.kind == "known_truth" else 1.0)
        emit("crowding", u, 1.0 - u[None, :] ** beta[:, None])
    if ms.infers_diffusivity:
        spec = ms.diffusivity_prior
        t = np.linspace(0.0, spec.t_max, FUNCTION_POINTS)
        emit("diffusivity", t, np.array([model.diffusivity(th)(t) for th in draws]))
        h = gp2_sample_latent(spec, PRIOR_BAND_DRAWS, seed=cfg.seed)
        grid = spec.grid
        emit("diffusivity_prior", t,
             np.array([np.interp(t, grid.positions, grid.with_boundaries(2.0 * latent_to_g(v))) for v in h]))
    return rows


def histograms(result: FitResult, bins: int = HIST_BINS) -> list[dict]:
    pooled = np.concatenate([c.draws for c in result.chains])
    rows = []
    for k, name in enumerate(result.summary["names"]):
        x = pooled[:, k]
        counts, edges = np.histogram(x, bins=bins)
        width = np.diff(edges)
        dens = counts / (counts.sum() * np.where(width > 0, width, 1.0))
        rows.extend({"parameter": name, "bin_left": float(a), "bin_right": float(b),
                     "count": int(c), "density": float(d)}
                    for a, b, c, d in zip(edges[:-1], edges[1:], counts, dens))
    return rows


# -- persistence -------------------------------------------------------------

def _header_lines(cfg: ExperimentConfig) -> list[str]:
    return [f"# seed: {cfg.seed}", "# config: " + json.dumps(cfg.to_record(), sort_keys=True)]


def _write_rows(path: Path, cfg: ExperimentConfig, columns: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        for line in _header_lines(cfg):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_result(result: FitResult, out_dir) -> Path:
    """Write every result file; all writes happen here, after the chains join."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    names = result.summary["names"]
    rows = ([i, j, float(c.log_posterior[j]), *map(float, c.draws[j])]
            for i, c in enumerate(result.chains) for j in range(c.draws.shape[0]))
    _write_rows(out / "draws.csv", cfg, [*DRAWS_FIXED_COLUMNS, *names], rows)
    hist = histograms(result)
    _write_rows(out / "histograms.csv", cfg, ["parameter", "bin_left", "bin_right", "count", "density"],
                ([r["parameter"], r["bin_left"], r["bin_right"], r["count"], r["density"]] for r in hist))
    bands = function_bands(result)
    _write_rows(out / "functions.csv", cfg, ["function", "x", "mean", "lower", "upper"],
                ([r["function"], r["x"], r["mean"], r["lower"], r["upper"]] for r in bands))
    (out / "summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True,
                                                 default=_json_default) + "\n")
    cfg.save(out / "config.json")
    return out


def read_draws(path) -> tuple[list[str], np.ndarray, np.ndarray, np.ndarray]:
    """Parse ``draws.csv``; returns ``(names, chain_ids, log_posterior, draws)``."""
    path = Path(path)
    header = None
    chain, logp, values = [], [], []
    with path.open(newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#") or not line.strip():
                continue
            fields = next(csv.reader([line]))
            if header is None:
                header = fields
                if tuple(header[:3]) != DRAWS_FIXED_COLUMNS or len(header) < 4:
                    raise ResultFormatError(f"{path}:{lineno}: unexpected header")
                continue
            if len(fields) != len(header):
                raise ResultFormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
            try:
                chain.append(int(fields[0]))
                logp.append(float(fields[2]))
                values.append([float(v) for v in fields[3:]])
            except ValueError as err:
                raise ResultFormatError(f"{path}:{lineno}: {err}") from None
    if header is None or not values:
        raise ResultFormatError(f"{path}: no draws")
    return header[3:], np.array(chain), np.array(logp), np.array(values)


def diagnose(result_dir) -> tuple[str, bool]:
    """Text report of R-hat, ESS and acceptance; returns ``(report, converged)``."""
    result_dir = Path(result_dir)
    names, chain, _, values = read_draws(result_dir / "draws.csv")
    ids = np.unique(chain)
    sizes = {int(i): int(np.sum(chain == i)) for i in ids}
    n = min(sizes.values())
    stacked = np.stack([values[chain == i][:n] for i in ids])
    rh = rhat(stacked)
    es = ess(stacked)
    acceptance = None
    summary_path = result_dir / "summary.json"
    if summary_path.exists():
        acceptance = json.loads(summary_path.read_text()).get("acceptance")
    lines = []
    if len(ids) == 1:
        lines.append("warning: single chain; R-hat computed from split halves only")
    lines.append(f"{'parameter':<12} {'R-hat':>8} {'ESS':>10}")
    for name, r, e in zip(names, rh, es):
        flag = "  <-- not converged" if r >= RHAT_THRESHOLD else ""
        lines.append(f"{name:<12} {r:>8.4f} {e:>10.1f}{flag}")
    if acceptance is not None:
        lines.append("acceptance: " + ", ".join(f"{a:.3f}" for a in acceptance))
    ok = bool(np.all(rh < RHAT_THRESHOLD))
    if ok:
        lines.append(f"all R-hat < {RHAT_THRESHOLD}")
    else:
        bad = [nm for nm, r in zip(names, rh) if r >= RHAT_THRESHOLD or math.isnan(r)]
        lines.append(f"R-hat >= {RHAT_THRESHOLD} for: {', '.join(bad)} (convergence not certified)")
    return "\n".join(lines), ok
