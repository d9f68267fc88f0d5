"""Pure-pathloss channel variance and statistic-aware power control."""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import InvalidArgument, SingularityError


@dataclasses.dataclass(frozen=True)
class PropagationModel:
    kappa: float = 3.5

    def __post_init__(self):
        if not self.kappa >= 2:
            raise InvalidArgument(f"pathloss exponent must be >= 2, got {self.kappa!r}")


@dataclasses.dataclass(frozen=True)
class PowerControlPolicy:
    """Uplink power p = rho / d_l(z). Only the ratio rho / sigma^2 is kept."""

    rho_over_sigma2: float

    def __post_init__(self):
        if not self.rho_over_sigma2 > 0:
            raise InvalidArgument(f"rho/sigma^2 must be positive, got {self.rho_over_sigma2!r}")

    @classmethod
    def from_db(cls, snr_db: float) -> "PowerControlPolicy":
        return cls(10.0 ** (snr_db / 10.0))

    @property
    def inv_snr(self) -> float:
        """sigma^2 / rho"""
        return 1.0 / self.rho_over_sigma2


def _distance(z, b):
    d = np.linalg.norm(np.asarray(z, dtype=float) - np.asarray(b, dtype=float), axis=-1)
    if np.any(d == 0):
        raise SingularityError("user coordinate coincides with a base station")
    return d


def variance(model: PropagationModel, z, b):
    """Channel variance ||z - b||^-kappa. Scalar in, scalar out; arrays broadcast."""
    d = _distance(z, b)
    out = d ** (-model.kappa)
    return float(out) if np.ndim(out) == 0 else out


def relative_strength(model: PropagationModel, z, b_serving, b_victim, gamma: int = 1):
    """(d_victim(z) / d_serving(z)) ** gamma, the power-controlled interference at the victim BS."""
    if gamma not in (1, 2):
        raise InvalidArgument(f"gamma must be 1 or 2, got {gamma!r}")
    ds = _distance(z, b_serving)
    dv = _distance(z, b_victim)
    out = (ds / dv) ** (gamma * model.kappa)
    return float(out) if np.ndim(out) == 0 else out
