"""Scenario configuration: built-in defaults, a flat key = value file, and overrides."""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .geometry import SUPPORTED_BETAS
from .semodel import Combiner, ModelOptions


def default_N_list() -> tuple[int, ...]:
    """13 log-spaced antenna counts from 10 to 10^4 (four per decade)."""
    return tuple(int(round(v)) for v in np.logspace(1, 4, 13))


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    tiers: int = 3
    radius: float = 1.0
    kappa: float = 3.5
    T: int = 1000
    snr_db: float = 10.0
    min_dist_fraction: float = 0.14
    n_samples: int = 1_000_000
    seed: int = 0
    beta_set: tuple[int, ...] = (1, 3)
    K_min: int = 1
    K_max: int = 500
    N_list: tuple[int, ...] = dataclasses.field(default_factory=default_N_list)
    combiners: tuple[Combiner, ...] = (Combiner.MRC, Combiner.PZFC)
    edge_mrc_load_factor: str = "printed"
    noncoherent: str = "all"
    chunk_size: int = 4096
    threads: int = 1

    def __post_init__(self):
        if any(b not in SUPPORTED_BETAS for b in self.beta_set) or not self.beta_set:
            raise InvalidArgument(f"beta_set must be a non-empty subset of {SUPPORTED_BETAS}")
        if not 1 <= self.K_min <= self.K_max:
            raise InvalidArgument(f"bad K range [{self.K_min}, {self.K_max}]")
        if self.n_samples < 1 or self.threads < 1:
            raise InvalidArgument("n_samples and threads must be positive")
        if not self.N_list or min(self.N_list) < 1:
            raise InvalidArgument("N_list must hold positive antenna counts")
        self.model_options  # validates the two option strings

    @property
    def inv_snr(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)

    @property
    def model_options(self) -> ModelOptions:
        return ModelOptions(noncoherent=self.noncoherent, edge_mrc_load_factor=self.edge_mrc_load_factor)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(float(x)) for x in text.replace(",", " ").split())


_PARSERS = {
    "tiers": int,
    "radius": float,
    "kappa": float,
    "T": int,
    "snr_db": float,
    "min_dist_fraction": float,
    "n_samples": lambda s: int(float(s)),
    "seed": int,
    "beta_set": _int_list,
    "K_min": int,
    "K_max": int,
    "N_list": _int_list,
    "combiners": lambda s: tuple(Combiner.parse(x) for x in s.replace(",", " ").split()),
    "edge_mrc_load_factor": str.strip,
    "noncoherent": str.strip,
    "chunk_size": int,
    "threads": int,
}


def parse_config_text(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse ``key = value`` lines (``#`` comments allowed, no section header needed)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    parser.read_string("[scenario]\n" + text)
    lookup = {k.lower(): k for k in _PARSERS}
    changes = {}
    for key, raw in parser["scenario"].items():
        name = lookup.get(key.lower())
        if name is None:
            raise InvalidArgument(f"unknown configuration key {key!r}")
        try:
            changes[name] = _PARSERS[name](raw)
        except ValueError as exc:
            raise InvalidArgument(f"bad value for {key}: {raw!r}") from exc
    return dataclasses.replace(base or ScenarioConfig(), **changes)


def load_config(path: str | Path | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    return parse_config_text(Path(path).read_text())
