"""Observation records and their CSV/JSON persistence."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

STATISTICS = ("u", "U", "F")
CSV_COLUMNS = ("scenario_id", "statistic", "time", "replicate", "value")


class DatasetFormatError(ValueError):
    pass


@dataclass(eq=False)
class Dataset:
    """Tagged observation records.

    ``statistic`` is ``"u"`` for ODE density data, ``"U"`` for overall
    density and ``"F"`` for front location.
    """

    scenario_id: np.ndarray
    statistic: np.ndarray
    time: np.ndarray
    replicate: np.ndarray
    value: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scenario_id = np.asarray(self.scenario_id, dtype=object)
        self.statistic = np.asarray(self.statistic, dtype=object)
        self.time = np.asarray(self.time, dtype=float)
        self.replicate = np.asarray(self.replicate, dtype=int)
        self.value = np.asarray(self.value, dtype=float)
        n = self.value.size
        for name in ("scenario_id", "statistic", "time", "replicate"):
            if getattr(self, name).shape != (n,):
                raise DatasetFormatError(f"column {name!r} has the wrong length")
        bad = set(self.statistic.tolist()) - set(STATISTICS)
        if bad:
            raise DatasetFormatError(f"unknown statistic kinds {sorted(bad)}")

    @classmethod
    def from_arrays(cls, time, value, replicate=None, statistic="u", scenario_id="",
                    metadata=None) -> "Dataset":
        time = np.asarray(time, dtype=float)
        n = time.size
        return cls(
            scenario_id=np.full(n, scenario_id, dtype=object) if np.ndim(scenario_id) == 0 else scenario_id,
            statistic=np.full(n, statistic, dtype=object) if np.ndim(statistic) == 0 else statistic,
            time=time,
            replicate=np.zeros(n, dtype=int) if replicate is None else replicate,
            value=value,
            metadata=dict(metadata or {}),
        )

    def __len__(self) -> int:
        return int(self.value.size)

    @property
    def kinds(self) -> list[str]:
        return sorted(set(self.statistic.tolist()))

    def mask(self, statistic: str) -> np.ndarray:
        return self.statistic == statistic

    def select(self, scenario_id: str | None = None, statistic: str | None = None) -> "Dataset":
        keep = np.ones(len(self), dtype=bool)
        if scenario_id is not None:
            keep &= self.scenario_id == scenario_id
        if statistic is not None:
            keep &= self.statistic == statistic
        meta = self.metadata
        if scenario_id is not None and scenario_id in meta.get("members", {}):
            meta = meta["members"][scenario_id]
        return Dataset(self.scenario_id[keep], self.statistic[keep], self.time[keep],
                       self.replicate[keep], self.value[keep], dict(meta))

    @staticmethod
    def concat(parts: list["Dataset"], metadata: dict | None = None) -> "Dataset":
        return Dataset(
            np.concatenate([p.scenario_id for p in parts]),
            np.concatenate([p.statistic for p in parts]),
            np.concatenate([p.time for p in parts]),
            np.concatenate([p.replicate for p in parts]),
            np.concatenate([p.value for p in parts]),
            dict(metadata or {}),
        )

    # -- persistence --------------------------------------------------------

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in zip(self.scenario_id, self.statistic, self.time, self.replicate, self.value):
                w.writerow([row[0], row[1], repr(float(row[2])), int(row[3]), repr(float(row[4]))])
        meta_path = sidecar_path(path)
        meta_path.write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path, scenario_id: str | None = None) -> "Dataset":
        path = Path(path)
        cols = {c: [] for c in CSV_COLUMNS}
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != CSV_COLUMNS:
                raise DatasetFormatError(f"{path}:1: expected header {','.join(CSV_COLUMNS)}")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(CSV_COLUMNS):
                    raise DatasetFormatError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields")
                try:
                    cols["scenario_id"].append(row[0])
                    cols["statistic"].append(row[1])
                    cols["time"].append(float(row[2]))
                    cols["replicate"].append(int(row[3]))
                    cols["value"].append(float(row[4]))
                except ValueError as err:
                    raise DatasetFormatError(f"{path}:{lineno}: {err}") from None
        meta_path = sidecar_path(path)
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        ds = cls(**{k: np.asarray(v) if k not in ("scenario_id", "statistic") else np.asarray(v, dtype=object)
                    for k, v in cols.items()}, metadata=meta)
        if scenario_id is not None:
            ds = ds.select(scenario_id=scenario_id)
        return ds


def sidecar_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_suffix(".json")
