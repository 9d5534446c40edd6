"""Parameter layout: scalar parameters and function-node blocks.

Each coordinate has a transform between its constrained value and the
unconstrained space the sampler moves in. Log-densities are expressed with
respect to ``d log(phi)`` for scalars (their prior is uniform on the log
scale) and Lebesgue measure for function nodes; :meth:`ParameterLayout.log_jacobian`
returns the correction needed to express a density over the unconstrained
coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit, logit, ndtr, ndtri

from ..gp_priors import Gp1Spec, Gp2Spec, gp1_log_prior, gp2_log_prior, prior_spec_from_record

TRANSFORMS = ("log", "identity", "logit", "probit")
_HALF_LOG_2PI = 0.5 * np.log(2 * np.pi)


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class ScalarParam:
    """A positive scalar with a log-uniform prior on ``[lo, hi]``."""

    name: str
    init: float
    lo: float
    hi: float
    transform: str = "log"

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise LayoutError(f"{self.name}: bounds must satisfy 0 < lo < hi")
        if self.transform not in ("log", "identity"):
            raise LayoutError(f"{self.name}: scalars support log or identity transforms")

    def to_record(self) -> dict:
        return {"name": self.name, "init": self.init, "lo": self.lo, "hi": self.hi,
                "transform": self.transform}


@dataclass(frozen=True)
class NodeBlock:
    """Function nodes with a GP prior: ``f`` (crowding, GP1) or ``g`` (diffusivity, GP2)."""

    name: str
    prior: Gp1Spec | Gp2Spec
    init: tuple[float, ...]
    transform: str

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise LayoutError(f"{self.name}: unknown transform {self.transform!r}")
        if len(self.init) != self.size:
            raise LayoutError(f"{self.name}: expected {self.size} initial values")

    @property
    def size(self) -> int:
        return self.prior.m if isinstance(self.prior, Gp1Spec) else self.prior.n_free

    @property
    def labels(self) -> list[str]:
        start = 1 if isinstance(self.prior, Gp1Spec) else 0
        return [f"{self.name}{i}" for i in range(start, start + self.size)]

    def log_prior(self, values: np.ndarray) -> float:
        if isinstance(self.prior, Gp1Spec):
            return gp1_log_prior(values, self.prior)
        return gp2_log_prior(values, self.prior)

    def to_record(self) -> dict:
        return {"name": self.name, "prior": self.prior.to_record(), "init": list(self.init),
                "transform": self.transform}


def _forward(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "log":
        return np.log(x)
    if kind == "identity":
        return x.copy()
    if kind == "logit":
        return logit(x)
    return ndtri(x)


def _inverse(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "log":
        return np.exp(z)
    if kind == "identity":
        return z.copy()
    if kind == "logit":
        return expit(z)
    return ndtr(z)


def _node_log_jac(kind: str, z: np.ndarray) -> float:
    """log |dx/dz| for node transforms (Lebesgue reference)."""
    if kind == "log":
        return float(np.sum(z))
    if kind == "identity":
        return 0.0
    if kind == "logit":
        return float(np.sum(log_expit(z) + log_expit(-z)))
    return float(np.sum(-0.5 * z**2 - _HALF_LOG_2PI))


@dataclass
class ParameterLayout:
    scalars: list[ScalarParam]
    blocks: list[NodeBlock] = field(default_factory=list)

    def __post_init__(self):
        names = [s.name for s in self.scalars] + [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise LayoutError("duplicate parameter names")
        self._index = {s.name: i for i, s in enumerate(self.scalars)}
        self._lo = np.array([s.lo for s in self.scalars])
        self._hi = np.array([s.hi for s in self.scalars])
        self._scalar_log = np.array([s.transform == "log" for s in self.scalars], dtype=bool)
        self._slices = {}
        pos = len(self.scalars)
        for b in self.blocks:
            self._slices[b.name] = slice(pos, pos + b.size)
            pos += b.size
        self._dim = pos

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def n_scalars(self) -> int:
        return len(self.scalars)

    @property
    def names(self) -> list[str]:
        out = [s.name for s in self.scalars]
        for b in self.blocks:
            out.extend(b.labels)
        return out

    def index(self, name: str) -> int:
        return self._index[name]

    def block_slice(self, name: str) -> slice:
        return self._slices[name]

    def block(self, name: str) -> NodeBlock | None:
        for b in self.blocks:
            if b.name == name:
                return b
        return None

    def initial(self) -> np.ndarray:
        theta = np.empty(self.dim)
        theta[: self.n_scalars] = [s.init for s in self.scalars]
        for b in self.blocks:
            theta[self._slices[b.name]] = b.init
        return theta

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise LayoutError(f"expected a vector of length {self.dim}, got shape {v.shape}")
        return v

    def to_unconstrained(self, theta) -> np.ndarray:
        theta = self._check(theta)
        z = np.empty_like(theta)
        s = theta[: self.n_scalars]
        z[: self.n_scalars] = np.where(self._scalar_log, np.log(np.where(self._scalar_log, s, 1.0)), s)
        for b in self.blocks:
            sl = self._slices[b.name]
            z[sl] = _forward(b.transform, theta[sl])
        return z

    def to_constrained(self, z) -> np.ndarray:
        z = self._check(z)
        theta = np.empty_like(z)
        s = z[: self.n_scalars]
        theta[: self.n_scalars] = np.where(self._scalar_log, np.exp(np.where(self._scalar_log, s, 0.0)), s)
        for b in self.blocks:
            sl = self._slices[b.name]
            theta[sl] = _inverse(b.transform, z[sl])
        return theta

    def log_jacobian(self, z) -> float:
        """Correction turning a layout density into a density over ``z``."""
        z = np.asarray(z, dtype=float)
        s = z[: self.n_scalars]
        # identity-transformed scalars: d log(phi) / d phi = 1 / phi
        out = -float(np.sum(np.log(np.abs(s[~self._scalar_log])))) if np.any(~self._scalar_log) else 0.0
        for b in self.blocks:
            out += _node_log_jac(b.transform, z[self._slices[b.name]])
        return out

    def log_prior(self, theta) -> float:
        """Log-uniform boxes for scalars plus GP priors for node blocks."""
        theta = self._check(theta)
        s = theta[: self.n_scalars]
        if np.any(~(s >= self._lo)) or np.any(~(s <= self._hi)):
            return -np.inf
        total = 0.0
        for b in self.blocks:
            total += b.log_prior(theta[self._slices[b.name]])
            if total == -np.inf:
                return total
        return total

    def reference_log_prior(self, theta) -> float:
        """:meth:`log_prior` with diffusivity nodes measured on their latent (probit) scale.

        The copula density of ``g`` is unbounded towards the corners of the
        unit cube when the latent correlations are strong, so a maximum of the
        ``g``-space density is no useful point estimate. Measured in the
        latent coordinates the GP2 prior is Gaussian and the maximum is well
        defined; this is the density MAP draws are selected on.
        """
        lp = self.log_prior(theta)
        return lp if lp == -np.inf else lp + self.reference_correction(theta)

    def reference_correction(self, theta) -> float:
        """``reference_log_prior - log_prior`` at a point inside the support."""
        out = 0.0
        for b in self.blocks:
            if isinstance(b.prior, Gp2Spec):
                h = ndtri(np.asarray(theta)[self._slices[b.name]])
                out -= float(np.sum(0.5 * h**2 + _HALF_LOG_2PI))
        return out

    def unpack(self, theta) -> dict:
        theta = np.asarray(theta, dtype=float)
        out = {s.name: float(theta[i]) for i, s in enumerate(self.scalars)}
        for b in self.blocks:
            out[b.name] = theta[self._slices[b.name]]
        return out

    def to_record(self) -> dict:
        return {"scalars": [s.to_record() for s in self.scalars],
                "blocks": [b.to_record() for b in self.blocks]}

    @classmethod
    def from_record(cls, rec: dict) -> "ParameterLayout":
        scalars = [ScalarParam(**s) for s in rec["scalars"]]
        blocks = [NodeBlock(b["name"], prior_spec_from_record(b["prior"]), tuple(b["init"]), b["transform"])
                  for b in rec.get("blocks", [])]
        return cls(scalars, blocks)


def log_prior(theta, layout: ParameterLayout) -> float:
    return layout.log_prior(theta)
