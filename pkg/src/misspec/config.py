"""Experiment configuration: a single JSON document per fit."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .inference.mcmc import SamplerSettings
from .inference.models import ModelSettings


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one fit.

    Exactly one of ``scenario`` (generated with ``data_seed``) or ``dataset``
    (a CSV path, optionally restricted to ``scenario_id``) names the data.
    """

    model: ModelSettings
    scenario: str | None = None
    dataset: str | None = None
    scenario_id: str | None = None
    data_seed: int = 0
    seed: int = 0
    chains: int = 4
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    out: str = "results"

    def __post_init__(self):
        if (self.scenario is None) == (self.dataset is None):
            raise ConfigError("config needs exactly one of 'scenario' or 'dataset'")
        if self.chains < 1:
            raise ConfigError("chains must be at least 1")
        if self.sampler.n_iters < 2 * self.sampler.thin:
            raise ConfigError("iters too small for the burn-in and thinning settings")

    def to_record(self) -> dict:
        return {
            "model": self.model.to_record(),
            "scenario": self.scenario,
            "dataset": self.dataset,
            "scenario_id": self.scenario_id,
            "data_seed": self.data_seed,
            "seed": self.seed,
            "chains": self.chains,
            "sampler": self.sampler.to_record(),
            "out": self.out,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ExperimentConfig":
        rec = dict(rec)
        try:
            model = rec.pop("model")
            if isinstance(model, str):
                model = {"kind": model}
            rec["model"] = ModelSettings.from_record(model)
            rec["sampler"] = SamplerSettings(**rec.get("sampler", {}))
            return cls(**rec)
        except KeyError as err:
            raise ConfigError(f"config is missing {err}") from None
        except TypeError as err:
            raise ConfigError(f"invalid config: {err}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            rec = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON (line {err.lineno}): {err.msg}") from None
        if not isinstance(rec, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_record(rec)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())
