"""Forward-model adapters binding a model choice to a dataset.

A bound model maps a constrained parameter vector to the predicted value of
every record in the dataset, together with the noise standard deviation that
applies to each record.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset
from ..functions import PiecewiseLinearFunction
from ..gp_priors import Gp1Spec, Gp2Spec, gp2_project, std_normal_quantile
from ..ode import OdeParams, ParameterError, solve_piecewise_nodes, solve_richards
from ..pde import InitialCondition, NumericStabilityError, PdeParams, solve_pde
from .params import NodeBlock, ParameterLayout, ScalarParam

log = logging.getLogger(__name__)

ODE_MODELS = ("logistic", "known_truth", "richards", "gp_crowding")
PDE_MODELS = ("pde_constant_D", "pde_gp_diffusivity", "pde_gp_both")
MODELS = ODE_MODELS + PDE_MODELS

# forward failures that count as a rejected proposal
FORWARD_ERRORS = (ParameterError, NumericStabilityError, FloatingPointError, ZeroDivisionError,
                  OverflowError, ValueError)
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class ModelSettings:
    """Model choice plus everything needed to build its parameter layout."""

    kind: str
    crowding_prior: Gp1Spec = field(default_factory=Gp1Spec)
    diffusivity_prior: Gp2Spec = field(default_factory=Gp2Spec)
    crowding_transform: str = "identity"
    diffusivity_transform: str = "probit"
    bounds_factor: float = 100.0
    bounds: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)
    pde: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MODELS:
            raise ValueError(f"unknown model {self.kind!r}; choose from {', '.join(MODELS)}")

    @property
    def is_pde(self) -> bool:
        return self.kind in PDE_MODELS

    @property
    def infers_crowding(self) -> bool:
        return self.kind in ("gp_crowding", "pde_gp_both")

    @property
    def infers_diffusivity(self) -> bool:
        return self.kind in ("pde_gp_diffusivity", "pde_gp_both")

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "crowding_prior": self.crowding_prior.to_record(),
            "diffusivity_prior": self.diffusivity_prior.to_record(),
            "crowding_transform": self.crowding_transform,
            "diffusivity_transform": self.diffusivity_transform,
            "bounds_factor": self.bounds_factor,
            "bounds": dict(self.bounds),
            "init": dict(self.init),
            "pde": dict(self.pde),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ModelSettings":
        from ..gp_priors import prior_spec_from_record

        rec = dict(rec)
        if "crowding_prior" in rec:
            rec["crowding_prior"] = prior_spec_from_record(rec["crowding_prior"])
        if "diffusivity_prior" in rec:
            rec["diffusivity_prior"] = prior_spec_from_record(rec["diffusivity_prior"])
        return cls(**rec)


def scalar_names(settings: ModelSettings, dataset: Dataset) -> list[str]:
    if not settings.is_pde:
        names = ["r", "K", "u0"]
        if settings.kind == "richards":
            names.append("beta")
        return names + ["sigma"]
    names = ["r", "K", "u0", "D"]
    if "U" in dataset.kinds:
        names.append("sigma1")
    if "F" in dataset.kinds:
        names.append("sigma2")
    return names


def _truth_for(name: str, settings: ModelSettings, truth: dict) -> float | None:
    if not settings.is_pde:
        # an ODE fitted to spatial data starts from the overall density and its noise
        if name == "u0" and "U0" in truth:
            return truth["U0"]
        if name == "sigma" and "sigma" not in truth:
            return truth.get("sigma1")
        if name == "beta":
            return truth.get("beta", 1.0)
    return truth.get(name)


def build_layout(settings: ModelSettings, dataset: Dataset) -> ParameterLayout:
    """Parameter layout with initial values and prior boxes resolved from the dataset echo."""
    truth = dataset.metadata.get("truth", {})
    scalars = []
    for name in scalar_names(settings, dataset):
        generative = _truth_for(name, settings, truth)
        init = settings.init.get(name, generative)
        if name in settings.bounds:
            lo, hi = settings.bounds[name]
        elif generative is not None:
            # default box: two decades either side of the generative value
            lo, hi = generative / settings.bounds_factor, generative * settings.bounds_factor
        else:
            raise ValueError(f"no generative value for {name!r}: supply its bounds in the config")
        if init is None:
            init = float(np.sqrt(lo * hi))
        scalars.append(ScalarParam(name, float(init), float(lo), float(hi)))

    blocks = []
    if settings.infers_crowding:
        spec = settings.crowding_prior
        init = settings.init.get("f", spec.mean)
        blocks.append(NodeBlock("f", spec, tuple(float(v) for v in init), settings.crowding_transform))
    if settings.infers_diffusivity:
        spec = settings.diffusivity_prior
        if "g" in settings.init:
            init = settings.init["g"]
        elif "dhat" in truth:
            exact = 0.5 * np.asarray(PiecewiseLinearFunction.from_record(truth["dhat"])(spec.grid.free))
            init = gp2_project(exact, spec)
        else:
            init = np.full(spec.n_free, 0.5)
        blocks.append(NodeBlock("g", spec, tuple(float(v) for v in init), settings.diffusivity_transform))
    return ParameterLayout(scalars, blocks)


def initial_proposal_cov(layout: ParameterLayout, scalar_sd: float = 0.01,
                         block_scale: float = 0.1) -> np.ndarray:
    """Starting proposal covariance in unconstrained space.

    Node blocks start from their prior covariance mapped through the
    transform (exact for identity/probit), shrunk by ``block_scale``.
    """
    from ..gp_priors import gp1_covariance, gp2_latent_conditional, JITTER

    cov = np.zeros((layout.dim, layout.dim))
    n = layout.n_scalars
    cov[:n, :n] = np.diag(np.full(n, scalar_sd**2))
    theta0 = layout.initial()
    for b in layout.blocks:
        sl = layout.block_slice(b.name)
        x0 = theta0[sl]
        if isinstance(b.prior, Gp1Spec):
            base = gp1_covariance(b.prior)
            # derivative of z w.r.t. the node value
            dz = {"identity": np.ones_like(x0), "log": 1 / x0, "logit": 1 / (x0 * (1 - x0)),
                  "probit": np.ones_like(x0)}[b.transform]
        else:
            base = gp2_latent_conditional(b.prior)[1]
            # base covariance is in latent (probit) coordinates
            phi = np.exp(-0.5 * std_normal_quantile(x0) ** 2) / np.sqrt(2 * np.pi)
            dz = {"probit": np.ones_like(x0), "identity": phi, "log": phi / x0,
                  "logit": phi / (x0 * (1 - x0))}[b.transform]
        block = block_scale**2 * base * np.outer(dz, dz)
        block[np.diag_indices_from(block)] += JITTER * np.max(np.diag(block))
        cov[sl, sl] = block
    return cov


class BoundModel:
    """A forward model bound to a dataset and parameter layout."""

    def __init__(self, settings: ModelSettings, dataset: Dataset, layout: ParameterLayout | None = None):
        if len(dataset) == 0:
            raise ValueError("dataset is empty")
        self.settings = settings
        self.dataset = dataset
        self.layout = layout or build_layout(settings, dataset)
        self.y = dataset.value
        self.times, self._inverse = np.unique(dataset.time, return_inverse=True)
        self._idx = {name: self.layout.index(name) for name in scalar_names(settings, dataset)}
        if settings.is_pde:
            self._init_pde()
        else:
            self._sigma_index = np.full(len(dataset), self._idx["sigma"])
            if settings.kind == "known_truth":
                self._beta = 2.0
            elif settings.kind == "logistic":
                self._beta = 1.0
            if settings.infers_crowding:
                self._f_sl = self.layout.block_slice("f")
                self._f_pos = self.layout.block("f").prior.grid.positions

    def _init_pde(self):
        meta = self.dataset.metadata.get("pde", {})
        cfg = {**meta, **self.settings.pde}
        self.L = float(cfg.get("L", 1000.0))
        self.grid_n = int(cfg.get("grid_n", 201))
        self.t_max = float(cfg.get("t_max", self.settings.diffusivity_prior.t_max))
        self.ic = InitialCondition.from_record(cfg.get("ic", {"kind": "scratch", "alpha1": 0.3, "alpha2": 0.7}))
        self.rtol = float(cfg.get("rtol", 1e-6))
        kinds = self.dataset.statistic
        self._is_F = kinds == "F"
        sig = np.where(self._is_F, self._idx.get("sigma2", -1), self._idx.get("sigma1", -1))
        self._sigma_index = sig.astype(int)
        if self.settings.infers_diffusivity:
            self._g_sl = self.layout.block_slice("g")
            self._d_pos = self.settings.diffusivity_prior.grid.positions
        if self.settings.infers_crowding:
            self._f_sl = self.layout.block_slice("f")
            self._f_pos = self.layout.block("f").prior.grid.positions
        if self.times[-1] > self.t_max + 1e-12 and self.settings.infers_diffusivity:
            raise ValueError("observation times exceed the diffusivity grid")

    # -- forward ------------------------------------------------------------

    def crowding(self, theta) -> PiecewiseLinearFunction | None:
        if not self.settings.infers_crowding:
            return None
        nodes = np.concatenate(([1.0], theta[self._f_sl], [0.0]))
        return PiecewiseLinearFunction(self._f_pos, nodes)

    def diffusivity(self, theta) -> PiecewiseLinearFunction | None:
        if not self.settings.infers_diffusivity:
            return None
        nodes = np.concatenate((2.0 * theta[self._g_sl], [1.0]))
        return PiecewiseLinearFunction(self._d_pos, nodes)

    def predict_unique(self, theta) -> dict[str, np.ndarray]:
        """Model summaries at the dataset's unique times, keyed by statistic."""
        i = self._idx
        if not self.settings.is_pde:
            p = OdeParams(theta[i["r"]], theta[i["K"]], theta[i["u0"]])
            if self.settings.infers_crowding:
                nodes = np.concatenate(([1.0], theta[self._f_sl], [0.0]))
                u = solve_piecewise_nodes(p, self._f_pos, nodes, self.times)
            else:
                beta = theta[i["beta"]] if self.settings.kind == "richards" else self._beta
                u = solve_richards(p, beta, self.times)
            return {"u": u}
        pp = PdeParams(D=theta[i["D"]], r=theta[i["r"]], K=theta[i["K"]], u0=theta[i["u0"]],
                       dhat=self.diffusivity(theta), f=self.crowding(theta), L=self.L,
                       grid_n=self.grid_n, t_max=self.t_max)
        sol = solve_pde(pp, self.ic, self.times, rtol=self.rtol)
        out = {"U": sol.overall_density()}
        if np.any(self._is_F):
            out["F"] = sol.front_location()
        return out

    def predict(self, theta) -> np.ndarray:
        """Prediction for every record, aligned with ``dataset.value``."""
        theta = np.asarray(theta, dtype=float)
        summaries = self.predict_unique(theta)
        if not self.settings.is_pde:
            return summaries["u"][self._inverse]
        pred = summaries["U"][self._inverse]
        if "F" in summaries:
            pred = np.where(self._is_F, summaries["F"][self._inverse], pred)
        return pred

    def sigma(self, theta) -> np.ndarray:
        return np.asarray(theta)[self._sigma_index]

    def log_likelihood(self, theta) -> float:
        """Gaussian log-likelihood; forward failures score ``-inf``."""
        try:
            pred = self.predict(theta)
        except FORWARD_ERRORS as err:
            log.debug("forward solve failed: %s", err)
            return -np.inf
        if not np.all(np.isfinite(pred)):
            return -np.inf
        sigma = self.sigma(theta)
        z = (self.y - pred) / sigma
        return float(-0.5 * (z @ z) - np.sum(np.log(sigma)) - 0.5 * z.size * _LOG_2PI)


def log_likelihood(theta, dataset: Dataset, forward: BoundModel) -> float:
    if forward.dataset is not dataset:
        forward = BoundModel(forward.settings, dataset, forward.layout)
    return forward.log_likelihood(theta)
