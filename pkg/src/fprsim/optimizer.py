"""Exhaustive search over (K, beta, beta_f), N sweeps and gains over the beta_f = 0 baseline."""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import InvalidArgument, NoFeasiblePoint
from .geometry import SUPPORTED_BETAS, assign_reuse_coloring
from .mustats import Provenance
from .semodel import (
    DEFAULT_OPTIONS,
    Combiner,
    ModelOptions,
    SystemParams,
    se_over_splits,
    se_stderr,
    spectral_efficiency,
)

FPR = "FPR"
BASELINE = "baseline"


@dataclasses.dataclass(frozen=True)
class SearchSpace:
    """Grid of (K, beta, m) with m = beta_f * K interior users.

    ``fractional=False`` restricts the space to beta_f = 0 (plain pilot
    reuse). ``points`` replaces the grid with explicit (K, beta, m) triples.
    Points with B > T are dropped; for P-ZFC so are points with N <= B.
    """

    K_min: int = 1
    K_max: int = 500
    beta_set: tuple[int, ...] = (1, 3)
    T: int = 1000
    fractional: bool = True
    points: tuple[tuple[int, int, int], ...] | None = None

    def __post_init__(self):
        if int(self.K_min) != self.K_min or self.K_min < 1 or self.K_max < self.K_min:
            raise InvalidArgument(f"bad K range [{self.K_min}, {self.K_max}]")
        if not self.beta_set or any(b not in SUPPORTED_BETAS for b in self.beta_set):
            raise InvalidArgument(f"beta_set must be a non-empty subset of {SUPPORTED_BETAS}, got {self.beta_set!r}")
        if int(self.T) != self.T or self.T < 1:
            raise InvalidArgument(f"T must be a positive integer, got {self.T!r}")
        if self.points is not None:
            for K, beta, m in self.points:
                if K < 1 or not 0 <= m < K or beta not in SUPPORTED_BETAS:
                    raise InvalidArgument(f"bad search point {(K, beta, m)!r}")

    @property
    def scheme(self) -> str:
        return FPR if self.fractional else BASELINE

    def blocks(self, N: int, combiner: Combiner):
        """(K, beta, allowed m array) per block with at least one feasible point, in grid order."""
        if self.points is not None:
            grouped: dict[tuple[int, int], list[int]] = {}
            for K, beta, m in self.points:
                grouped.setdefault((int(K), int(beta)), []).append(int(m))
            for (K, beta), ms in sorted(grouped.items()):
                yield K, beta, np.array(sorted(set(ms)), dtype=np.int64)
            return
        for K in range(self.K_min, self.K_max + 1):
            for beta in sorted(self.beta_set):
                ms = np.arange(K) if self.fractional else np.zeros(1, dtype=np.int64)
                B = beta * K - ms * (beta - 1)
                ok = B <= self.T
                if combiner is Combiner.PZFC:
                    ok &= N > B
                if ok.any():
                    yield K, beta, ms

    def Ks(self) -> list[int]:
        if self.points is not None:
            return sorted({int(p[0]) for p in self.points})
        return list(range(self.K_min, self.K_max + 1))


@dataclasses.dataclass(frozen=True)
class SweepRecord:
    N: int
    combiner: Combiner
    scheme: str
    K: int
    beta: int
    beta_f: float
    B: int
    se: float
    se_asymptotic: float
    is_optimal: bool = True
    se_stderr: float = 0.0
    provenance: Provenance | None = None


@dataclasses.dataclass(frozen=True)
class GainRow:
    N: int
    combiner: Combiner
    se_fpr: float
    se_baseline: float
    gain_percent: float


class Evaluator:
    """Binds a moment provider to the fixed scenario constants (SNR, model options)."""

    def __init__(self, provider, inv_snr: float, options: ModelOptions = DEFAULT_OPTIONS):
        if not inv_snr > 0:
            raise InvalidArgument(f"sigma^2/rho must be positive, got {inv_snr!r}")
        self.provider = provider
        self.inv_snr = float(inv_snr)
        self.options = options
        self._grids = {}

    def grid(self, beta: int):
        if beta not in self._grids:
            self._grids[beta] = assign_reuse_coloring(self.provider.grid, beta)
        return self._grids[beta]

    def params(self, N, K, beta, m, T) -> SystemParams:
        return SystemParams(N=N, K=K, T=T, beta=beta, beta_f=m / K, inv_snr=self.inv_snr)

    def evaluate(self, params: SystemParams, combiner):
        stats = self.provider.statistics(params.K, params.n_interior / params.K)
        return spectral_efficiency(params, stats, self.grid(params.beta), combiner, self.options)

    def stderr(self, params: SystemParams, combiner) -> float:
        stats = self.provider.statistics(params.K, params.n_interior / params.K)
        return se_stderr(params, stats, self.grid(params.beta), combiner, self.options)

    def splits(self, N, K, beta, T, combiner):
        """(B, se) over m = 0..K-1; infeasible entries are -inf."""
        return se_over_splits(self.provider.table(K), N, K, beta, T, self.inv_snr, self.grid(beta),
                              combiner, self.options)

    def record(self, N, K, beta, m, T, combiner, scheme, is_optimal=True, with_stderr=False) -> SweepRecord:
        params = self.params(N, K, beta, m, T)
        res = self.evaluate(params, combiner)
        return SweepRecord(
            N=int(N), combiner=res.combiner, scheme=scheme, K=K, beta=beta, beta_f=m / K, B=params.B,
            se=res.se, se_asymptotic=res.se_asymptotic, is_optimal=is_optimal,
            se_stderr=self.stderr(params, combiner) if with_stderr else 0.0,
            provenance=self.provider.table(K).provenance,
        )


def _better(a, b) -> bool:
    """a beats b: larger SE, then smaller B, K, beta."""
    if b is None:
        return True
    if a[0] != b[0]:
        return a[0] > b[0]
    return a[1:] < b[1:]


def optimize(space: SearchSpace, N: int, combiner, evaluator: Evaluator, with_stderr: bool = False,
             all_points: list | None = None) -> SweepRecord:
    """Best feasible (K, beta, beta_f) at N. Appends every evaluated point to ``all_points`` if given."""
    combiner = Combiner.parse(combiner)
    best = None  # (se, B, K, beta, m)
    for K, beta, ms in space.blocks(N, combiner):
        B, se = evaluator.splits(N, K, beta, space.T, combiner)
        se, B = se[ms], B[ms]
        ok = np.isfinite(se)
        if all_points is not None:
            for m, b, v in zip(ms[ok], B[ok], se[ok]):
                all_points.append((K, beta, int(m), int(b), float(v)))
        if not ok.any():
            continue
        top = se[ok].max()
        cand = np.flatnonzero(ok & (se == top))
        i = cand[np.argmin(B[cand])]
        key = (float(top), int(B[i]), K, beta, int(ms[i]))
        if _better(key, best):
            best = key
    if best is None:
        raise NoFeasiblePoint(f"no feasible (K, beta, beta_f) at N={N} for {combiner.value}")
    _, _, K, beta, m = best
    rec = evaluator.record(N, K, beta, m, space.T, combiner, space.scheme, with_stderr=with_stderr)
    if rec.se != best[0]:
        raise AssertionError("vectorized and scalar SE evaluation disagree")
    return rec


def sweep(space: SearchSpace, N_list, combiner, evaluator: Evaluator, include_all: bool = False,
          with_stderr: bool = False) -> list[SweepRecord]:
    """Optimal record per N (plus every evaluated point when ``include_all``)."""
    combiner = Combiner.parse(combiner)
    if hasattr(evaluator.provider, "prefetch"):
        evaluator.provider.prefetch(space.Ks())
    out = []
    for N in N_list:
        pts = [] if include_all else None
        best = optimize(space, int(N), combiner, evaluator, with_stderr=with_stderr, all_points=pts)
        out.append(best)
        if include_all:
            for K, beta, m, B, v in pts:
                if (K, beta, m) == (best.K, best.beta, round(best.beta_f * best.K)):
                    continue
                params = evaluator.params(int(N), K, beta, m, space.T)
                res = evaluator.evaluate(params, combiner)
                out.append(SweepRecord(int(N), combiner, space.scheme, K, beta, m / K, B, res.se,
                                       res.se_asymptotic, is_optimal=False,
                                       provenance=evaluator.provider.table(K).provenance))
    return out


def compute_gains(fpr_records, baseline_records) -> list[GainRow]:
    """Relative gain (percent) of the FPR optimum over the baseline optimum per (N, combiner)."""
    base = {(r.N, r.combiner): r for r in baseline_records if r.is_optimal}
    rows = []
    for r in fpr_records:
        if not r.is_optimal:
            continue
        b = base.get((r.N, r.combiner))
        if b is None:
            raise InvalidArgument(f"no baseline record for N={r.N}, {r.combiner.value}")
        gain = 100.0 * (r.se - b.se) / b.se if b.se > 0 else float("nan")
        rows.append(GainRow(r.N, r.combiner, r.se, b.se, gain))
    return rows


@dataclasses.dataclass(frozen=True)
class ProfilePoint:
    N: int
    combiner: Combiner
    K: int
    beta: int
    beta_f: float
    B: int
    se: float
    se_stderr: float


def beta_f_profile(N: int, K: int, beta: int, combiner, evaluator: Evaluator, T: int = 1000,
                   with_stderr: bool = True) -> list[ProfilePoint]:
    """SE over the feasible beta_f = m / K grid at fixed (N, K, beta)."""
    combiner = Combiner.parse(combiner)
    B, se = evaluator.splits(N, K, beta, T, combiner)
    out = []
    for m in np.flatnonzero(np.isfinite(se)):
        m = int(m)
        params = evaluator.params(N, K, beta, m, T)
        res = evaluator.evaluate(params, combiner)
        err = evaluator.stderr(params, combiner) if with_stderr else 0.0
        out.append(ProfilePoint(int(N), combiner, K, beta, m / K, int(B[m]), res.se, err))
    if not out:
        raise NoFeasiblePoint(f"no feasible beta_f at N={N}, K={K}, beta={beta} for {combiner.value}")
    return out


def is_unimodal(values, errors, n_se: float = 2.0) -> bool:
    """True if no point lies significantly below both a point on its left and one on its right.

    Significance is ``n_se`` combined standard errors of the two values
    compared, so a noisy plateau is not mistaken for a second peak.
    """
    return unimodality_violation(values, errors, n_se) <= 0.0


def unimodality_violation(values, errors, n_se: float = 2.0) -> float:
    """Largest dip (beyond the noise band) between two higher points; <= 0 means unimodal."""
    v = np.asarray(values, dtype=float)
    e = np.asarray(errors, dtype=float)
    n = len(v)
    worst = -np.inf
    for j in range(1, n - 1):
        left = v[:j] - v[j] - n_se * np.hypot(e[:j], e[j])
        right = v[j + 1:] - v[j] - n_se * np.hypot(e[j + 1:], e[j])
        worst = max(worst, min(left.max(), right.max()))
    return float(worst) if n > 2 else -np.inf


def switching_point(records, from_beta: int = 3, to_beta: int = 1):
    """Smallest N from which the optimal beta is ``to_beta`` for all larger N, or None.

    Requires the sweep to start at ``from_beta``; returns None otherwise.
    """
    recs = sorted((r for r in records if r.is_optimal), key=lambda r: r.N)
    if not recs or recs[0].beta != from_beta:
        return None
    switch = None
    for r in reversed(recs):
        if r.beta != to_beta:
            break
        switch = r.N
    return switch
