"""Closed-form uplink SINRs and spectral efficiency with fractional pilot reuse.

All four SINRs share the shape

    SINR = B / (B * coherent + noncoherent * (B * S + sigma2/rho))

where ``coherent`` sums mu2 + (mu2 - mu1^2) / D over the cells that reuse the
group's pilots (D = N for MRC, N - B for P-ZFC) and ``S`` is the pilot-sharing
sum of mu1 including the own cell. Interior users share their pilot subset
with every cell; edge users only with the pilot-sharing set L_j.

Non-coherent interference comes from the users of every cell. The default
``noncoherent="all"`` therefore sums the mu1 terms of the MRC and P-ZFC edge
expressions over all cells (P-ZFC only cancels the pilot-sharing part);
``noncoherent="printed"`` restricts those sums to L_j. Both coincide for the
interior group and for beta = 1.
"""

from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np

from .errors import DegenerateUnbounded, InfeasibleParameters, InsufficientAntennas, InvalidArgument
from .geometry import CellGrid
from .mustats import GroupStatistics, split_index

LN2 = math.log(2.0)


class Combiner(str, enum.Enum):
    MRC = "MRC"
    PZFC = "P-ZFC"

    @classmethod
    def parse(cls, value) -> "Combiner":
        if isinstance(value, Combiner):
            return value
        key = str(value).strip().upper().replace("_", "-")
        aliases = {"MRC": cls.MRC, "MR": cls.MRC, "P-ZFC": cls.PZFC, "PZFC": cls.PZFC, "P-ZF": cls.PZFC, "ZF": cls.PZFC}
        if key not in aliases:
            raise InvalidArgument(f"unknown combiner {value!r}; expected MRC or P-ZFC")
        return aliases[key]


@dataclasses.dataclass(frozen=True)
class ModelOptions:
    noncoherent: str = "all"  # "all" | "printed"
    edge_mrc_load_factor: str = "printed"  # "printed" -> K, "symmetric" -> (1 - beta_f) K

    def __post_init__(self):
        if self.noncoherent not in ("all", "printed"):
            raise InvalidArgument(f"noncoherent must be 'all' or 'printed', got {self.noncoherent!r}")
        if self.edge_mrc_load_factor not in ("printed", "symmetric"):
            raise InvalidArgument(
                f"edge_mrc_load_factor must be 'printed' or 'symmetric', got {self.edge_mrc_load_factor!r}"
            )


DEFAULT_OPTIONS = ModelOptions()


def pilot_book_size(K: int, beta: int, n_interior: int) -> int:
    """B = K (beta_f + (1 - beta_f) beta) = beta K - beta_f K (beta - 1), exact in integers."""
    return beta * K - n_interior * (beta - 1)


@dataclasses.dataclass(frozen=True)
class SystemParams:
    N: int
    K: int
    T: int = 1000
    beta: int = 1
    beta_f: float = 0.0
    inv_snr: float = 0.1  # sigma^2 / rho

    def __post_init__(self):
        for name in ("N", "T", "beta"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidArgument(f"{name} must be a positive integer, got {v!r}")
        if int(self.K) != self.K or self.K < 0:
            raise InvalidArgument(f"K must be a non-negative integer, got {self.K!r}")
        if not self.inv_snr > 0:
            raise InvalidArgument(f"sigma^2/rho must be positive, got {self.inv_snr!r}")
        if self.K:
            split_index(self.K, self.beta_f)
        elif self.beta_f:
            raise InvalidArgument("beta_f must be 0 when K = 0")
        if self.B > self.T:
            raise InfeasibleParameters(f"pilot book B={self.B} exceeds the coherence block T={self.T}")

    @classmethod
    def from_snr_db(cls, N, K, T=1000, beta=1, beta_f=0.0, snr_db=10.0) -> "SystemParams":
        return cls(N=N, K=K, T=T, beta=beta, beta_f=beta_f, inv_snr=10.0 ** (-snr_db / 10.0))

    @property
    def n_interior(self) -> int:
        return split_index(self.K, self.beta_f) if self.K else 0

    @property
    def B(self) -> int:
        return pilot_book_size(self.K, self.beta, self.n_interior)

    @property
    def prelog(self) -> float:
        return self.K * (1.0 - self.B / self.T)


@dataclasses.dataclass(frozen=True)
class EvaluationResult:
    combiner: Combiner
    sinr_interior: float | None  # None when beta_f = 0
    sinr_edge: float
    se: float
    se_asymptotic: float  # math.inf when an interference sum is empty
    B: int
    params: SystemParams | None = None


# --------------------------------------------------------------------------
# SINR core (vectorized over any leading axes; cells on the last axis)
# --------------------------------------------------------------------------


def _mask(n_cells: int, cells) -> np.ndarray:
    m = np.zeros(n_cells, dtype=bool)
    m[np.asarray(cells, dtype=np.int64)] = True
    return m


def _sinr(mu1, mu2, B, K_load, N, inv_snr, share, noncoh, victim, combiner):
    """Shared SINR skeleton. ``share``/``noncoh`` are boolean cell masks.

    ``mu1``/``mu2`` carry cells on the last axis; ``B`` and ``K_load`` may be
    arrays matching the leading axes.
    """
    B = np.asarray(B, dtype=float)
    K_load = np.asarray(K_load, dtype=float)
    others = share.copy()
    others[victim] = False
    pilot_sum = np.where(share, mu1, 0.0).sum(axis=-1)
    if combiner is Combiner.MRC:
        D = np.asarray(float(N))
        middle = np.where(noncoh, mu1, 0.0).sum(axis=-1) * K_load / N + inv_snr / N
    else:
        D = N - B
        denom = pilot_sum + inv_snr / B
        residual = np.where(share, mu1 * (1.0 - mu1 / denom[..., None]), np.where(noncoh, mu1, 0.0))
        middle = K_load / D * residual.sum(axis=-1)
    coherent = np.where(others, mu2 + (mu2 - mu1**2) / D[..., None], 0.0).sum(axis=-1)
    return B / (B * coherent + middle * (B * pilot_sum + inv_snr))


def _check(params: SystemParams, stats: GroupStatistics, combiner: Combiner):
    if stats.K != params.K or split_index(stats.K, stats.beta_f) != params.n_interior:
        raise InvalidArgument(
            f"statistics computed for (K={stats.K}, beta_f={stats.beta_f}) do not match "
            f"parameters (K={params.K}, beta_f={params.beta_f})"
        )
    if combiner is Combiner.PZFC and params.N <= params.B:
        raise InsufficientAntennas(f"P-ZFC needs N > B (N={params.N}, B={params.B})")


def _interior(params, stats, all_cells, combiner, victim):
    if not stats.has_interior:
        raise InvalidArgument("beta_f = 0: there is no interior group")
    _check(params, stats, combiner)
    n = len(stats.mu_I_1)
    share = _mask(n, all_cells)
    if combiner is Combiner.MRC:
        load = params.K
    else:
        load = params.n_interior
    return float(_sinr(stats.mu_I_1, stats.mu_I_2, params.B, load, params.N, params.inv_snr,
                       share, share, victim, combiner))


def _edge(params, stats, pilot_set, combiner, victim, options, all_cells):
    _check(params, stats, combiner)
    n = len(stats.mu_E_1)
    share = _mask(n, pilot_set)
    if not share[victim]:
        raise InvalidArgument("pilot-sharing set must contain the victim cell")
    if options.noncoherent == "all":
        noncoh = np.ones(n, dtype=bool) if all_cells is None else _mask(n, all_cells)
    else:
        noncoh = share
    n_edge = params.K - params.n_interior
    if combiner is Combiner.MRC:
        load = params.K if options.edge_mrc_load_factor == "printed" else n_edge
    else:
        load = n_edge
    return float(_sinr(stats.mu_E_1, stats.mu_E_2, params.B, load, params.N, params.inv_snr,
                       share, noncoh, victim, combiner))


def sinr_mrc_interior(params: SystemParams, stats: GroupStatistics, all_cells, victim: int = 0) -> float:
    return _interior(params, stats, all_cells, Combiner.MRC, victim)


def sinr_pzfc_interior(params: SystemParams, stats: GroupStatistics, all_cells, victim: int = 0) -> float:
    return _interior(params, stats, all_cells, Combiner.PZFC, victim)


def sinr_mrc_edge(params: SystemParams, stats: GroupStatistics, pilot_set, victim: int = 0,
                  options: ModelOptions = DEFAULT_OPTIONS, all_cells=None) -> float:
    return _edge(params, stats, pilot_set, Combiner.MRC, victim, options, all_cells)


def sinr_pzfc_edge(params: SystemParams, stats: GroupStatistics, pilot_set, victim: int = 0,
                   options: ModelOptions = DEFAULT_OPTIONS, all_cells=None) -> float:
    return _edge(params, stats, pilot_set, Combiner.PZFC, victim, options, all_cells)


def log2_1p(x):
    return np.log1p(x) / LN2


# --------------------------------------------------------------------------
# Spectral efficiency
# --------------------------------------------------------------------------


def _cells(grid: CellGrid, victim: int):
    return np.arange(grid.n_cells), grid.pilot_sharing_set(victim)


def asymptotic_se(params: SystemParams, stats: GroupStatistics, grid: CellGrid, victim: int = 0) -> float:
    """Large-antenna limit; the same for MRC and P-ZFC."""
    if params.K == 0 or params.B == params.T:
        return 0.0
    all_cells, pilot_set = _cells(grid, victim)
    edge_others = [l for l in pilot_set if l != victim]
    if not edge_others:
        raise DegenerateUnbounded("no other cell shares the edge pilots: the large-antenna SE diverges")
    beta_f = params.n_interior / params.K
    out = (1.0 - beta_f) * log2_1p(1.0 / float(np.sum(stats.mu_E_2[edge_others])))
    if params.n_interior:
        others = [l for l in all_cells if l != victim]
        if not others:
            raise DegenerateUnbounded("single-cell grid: the large-antenna SE diverges")
        out = beta_f * log2_1p(1.0 / float(np.sum(stats.mu_I_2[others]))) + out
    return float(params.prelog * out)


def spectral_efficiency(params: SystemParams, stats: GroupStatistics | None, grid: CellGrid, combiner,
                        options: ModelOptions = DEFAULT_OPTIONS, victim: int = 0) -> EvaluationResult:
    combiner = Combiner.parse(combiner)
    if params.K == 0:
        return EvaluationResult(combiner, None, 0.0, 0.0, 0.0, 0, params)
    if grid.colors is None or grid.beta != params.beta:
        raise InvalidArgument(f"grid must carry a beta={params.beta} reuse coloring")
    all_cells, pilot_set = _cells(grid, victim)
    sinr_e = _edge(params, stats, pilot_set, combiner, victim, options, all_cells)
    beta_f = params.n_interior / params.K
    rate = (1.0 - beta_f) * log2_1p(sinr_e)
    sinr_i = None
    if params.n_interior:
        sinr_i = _interior(params, stats, all_cells, combiner, victim)
        rate = beta_f * log2_1p(sinr_i) + rate
    se = float(params.prelog * rate)
    try:
        se_lim = asymptotic_se(params, stats, grid, victim)
    except DegenerateUnbounded:
        se_lim = math.inf
    return EvaluationResult(combiner, sinr_i, sinr_e, se, se_lim, params.B, params)


def baseline_spectral_efficiency(params: SystemParams, stats: GroupStatistics | None, grid: CellGrid, combiner,
                                 options: ModelOptions = DEFAULT_OPTIONS, victim: int = 0) -> EvaluationResult:
    """Pilot reuse without the fractional subset (beta_f = 0, B = beta K)."""
    if params.beta_f != 0:
        raise InvalidArgument("baseline evaluation requires beta_f = 0")
    return spectral_efficiency(params, stats, grid, combiner, options, victim)


def se_over_splits(table, N: int, K: int, beta: int, T: int, inv_snr: float, grid: CellGrid, combiner,
                   options: ModelOptions = DEFAULT_OPTIONS, victim: int = 0):
    """SE for every interior-group size m = 0..K-1 at fixed (N, K, beta), from one moment table.

    Returns (B, se) arrays indexed by m. Infeasible splits (B > T, or N <= B
    for P-ZFC) get se = -inf. Uses the same SINR core as
    ``spectral_efficiency``.
    """
    combiner = Combiner.parse(combiner)
    m = np.arange(K)
    B = beta * K - m * (beta - 1)
    feasible = B <= T
    if combiner is Combiner.PZFC:
        feasible &= N > B
    se = np.full(K, -np.inf)
    if not feasible.any():
        return B, se
    m, Bf = m[feasible], B[feasible]
    n = table.n_cells
    all_mask = np.ones(n, dtype=bool)
    share = _mask(n, grid.pilot_sharing_set(victim))
    noncoh = all_mask if options.noncoherent == "all" else share
    n_edge = K - m
    if combiner is Combiner.MRC:
        load_e = np.full(len(m), K) if options.edge_mrc_load_factor == "printed" else n_edge
        load_i = np.full(len(m), K)
    else:
        load_e, load_i = n_edge, m
    sinr_e = _sinr(table.mu_E[0, m], table.mu_E[1, m], Bf, load_e, N, inv_snr, share, noncoh, victim, combiner)
    beta_f = m / K
    rate = (1.0 - beta_f) * log2_1p(sinr_e)
    inner = m > 0
    if inner.any():
        mi = m[inner]
        sinr_i = _sinr(table.mu_I[0, mi], table.mu_I[1, mi], Bf[inner], load_i[inner], N, inv_snr,
                       all_mask, all_mask, victim, combiner)
        rate[inner] = beta_f[inner] * log2_1p(sinr_i) + rate[inner]
    se[feasible] = K * (1.0 - Bf / T) * rate
    return B, se


def se_stderr(params: SystemParams, stats: GroupStatistics, grid: CellGrid, combiner,
              options: ModelOptions = DEFAULT_OPTIONS, victim: int = 0) -> float:
    """Monte-Carlo uncertainty of the SE, by linear propagation of the moment standard errors.

    Each moment entry is shifted by one standard error; the SE changes are
    combined in quadrature. Returns 0 for statistics without errors.
    """
    base = spectral_efficiency(params, stats, grid, combiner, options, victim).se
    total = 0.0
    for group in ("E", "I"):
        for g in (1, 2):
            mu = stats.moments(group, g)
            err = stats.stderr(group, g)
            if mu is None or err is None:
                continue
            for l in np.flatnonzero(err > 0):
                bumped = mu.copy()
                bumped[l] += err[l]
                shifted = dataclasses.replace(stats, **{f"mu_{group}_{g}": bumped})
                total += (spectral_efficiency(params, shifted, grid, combiner, options, victim).se - base) ** 2
    return math.sqrt(total)
