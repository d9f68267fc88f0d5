"""Group interference moments mu^(gamma) for interior and edge users.

For a victim cell ``j = 0`` and every cell ``l`` the moments are

    mu_I[l] = E[(d_0(z) / d_l(z)) ** gamma]  over the beta_f*K users of cell l closest to b_l
    mu_E[l] = same expectation over the remaining (1 - beta_f)*K users

Monte Carlo: every drop places ``drop_size`` users in each cell (the same
offsets from the serving BS are reused for all cells). Users are ranked by
distance to their BS and the relative strength of the i-th closest user is
summed per rank. Tables for every K <= drop_size and every split
m = beta_f * K follow from these rank sums (order-statistic recurrence plus
prefix sums), so one pass serves a whole K sweep.

The quadrature oracle integrates the same quantities deterministically
using binomial inclusion weights and shares no code with the sampler.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor

import numba
import numpy as np
from scipy.special import roots_legendre
from scipy.stats import binom

from .errors import InvalidArgument, InvalidPartition
from .geometry import CellGrid, SQRT3, hexagon_area, sample_offsets
from .propagation import PropagationModel

DEFAULT_CHUNK = 4096


def split_index(K: int, beta_f: float) -> int:
    """Number of interior users beta_f * K, validated to be a whole count in [0, K-1]."""
    if int(K) != K or K < 1:
        raise InvalidArgument(f"K must be a positive integer, got {K!r}")
    if not 0.0 <= beta_f < 1.0:
        raise InvalidArgument(f"beta_f must lie in [0, 1), got {beta_f!r}")
    m = round(beta_f * K)
    if abs(beta_f * K - m) > 1e-9:
        raise InvalidPartition(f"beta_f * K = {beta_f * K!r} is not a whole number of users")
    return int(m)


@dataclasses.dataclass(frozen=True)
class Provenance:
    grid_hash: str
    kappa: float
    min_dist_fraction: float
    n_samples: int  # 0 for the quadrature oracle
    seed: int | None
    method: str = "montecarlo"
    chunk_size: int = DEFAULT_CHUNK
    drop_size: int = 0  # users drawn per cell and drop; tables for K < drop_size average K-subsets


@dataclasses.dataclass(frozen=True, eq=False)
class GroupStatistics:
    """Moments seen at the central cell, indexed by interfering cell.

    Interior arrays are ``None`` when ``beta_f == 0`` (no interior group).
    Standard errors are ``None`` for the quadrature oracle.
    """

    K: int
    beta_f: float
    mu_E_1: np.ndarray
    mu_E_2: np.ndarray
    mu_I_1: np.ndarray | None = None
    mu_I_2: np.ndarray | None = None
    stderr_E_1: np.ndarray | None = None
    stderr_E_2: np.ndarray | None = None
    stderr_I_1: np.ndarray | None = None
    stderr_I_2: np.ndarray | None = None
    n_samples: int = 0
    provenance: Provenance | None = None

    @property
    def n_interior(self) -> int:
        return split_index(self.K, self.beta_f)

    @property
    def has_interior(self) -> bool:
        return self.mu_I_1 is not None

    def moments(self, group: str, gamma: int) -> np.ndarray:
        return getattr(self, f"mu_{group}_{gamma}")

    def stderr(self, group: str, gamma: int) -> np.ndarray | None:
        return getattr(self, f"stderr_{group}_{gamma}")

    def whole_cell(self, gamma: int) -> np.ndarray:
        """beta_f * mu_I + (1 - beta_f) * mu_E, the group-independent moment."""
        m = self.n_interior
        out = (self.K - m) * self.moments("E", gamma)
        if m:
            out = out + m * self.moments("I", gamma)
        return out / self.K


@dataclasses.dataclass(frozen=True, eq=False)
class MomentTable:
    """Moments for one K and every split m = beta_f * K.

    ``mu_I[g, m, l]`` and ``mu_E[g, m, l]`` hold gamma = g + 1. Row m = 0 of
    the interior arrays and row m = K of the edge arrays are NaN (empty
    groups).
    """

    K: int
    mu_I: np.ndarray  # (2, K + 1, n_cells)
    mu_E: np.ndarray
    se_I: np.ndarray | None
    se_E: np.ndarray | None
    provenance: Provenance

    @property
    def n_cells(self) -> int:
        return self.mu_E.shape[2]

    def statistics(self, beta_f: float) -> GroupStatistics:
        m = split_index(self.K, beta_f)
        kw = {}
        for g in (1, 2):
            kw[f"mu_E_{g}"] = self.mu_E[g - 1, m].copy()
            if self.se_E is not None:
                kw[f"stderr_E_{g}"] = self.se_E[g - 1, m].copy()
            if m:
                kw[f"mu_I_{g}"] = self.mu_I[g - 1, m].copy()
                if self.se_I is not None:
                    kw[f"stderr_I_{g}"] = self.se_I[g - 1, m].copy()
        return GroupStatistics(
            K=self.K,
            beta_f=m / self.K,
            n_samples=self.provenance.n_samples,
            provenance=self.provenance,
            **kw,
        )


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------


def _power_split(half_kappa: float):
    """Write t ** half_kappa as t**a * sqrt(t)**b * t**(c/4) with b, c in {0, 1}.

    Returns (a, b, c, generic); generic is True when half_kappa is not a
    multiple of 1/4 and the plain power is used instead.
    """
    q = 4.0 * half_kappa
    if q == int(q) and 0 < q <= 64:
        q = int(q)
        return q // 4, (q % 4) // 2, q % 2, False
    return 0, 0, 0, True


@numba.njit(nogil=True, cache=True)
def _rank_sums(offsets, relx, rely, own, half_kappa, a, b, c, generic, drop_size, batch, out):
    """Per-batch sums of the relative strength of the i-th closest user.

    offsets: (n_drops * drop_size, 2) user positions relative to their BS
    out: (n_batches, 2, drop_size, n_cells); out[b, g, i, l] accumulates
    ratio ** (g + 1) of the i-th closest user of each drop in batch b.
    """
    n_drops = offsets.shape[0] // drop_size
    n_cells = relx.shape[0]
    rho2 = np.empty(drop_size)
    buf = np.empty(n_cells)
    for d in range(n_drops):
        o1 = out[d // batch, 0]
        o2 = out[d // batch, 1]
        base = d * drop_size
        for k in range(drop_size):
            x = offsets[base + k, 0]
            y = offsets[base + k, 1]
            rho2[k] = x * x + y * y
        order = np.argsort(rho2, kind="mergesort")  # stable: ties keep draw order
        for i in range(drop_size):
            k = order[i]
            x = offsets[base + k, 0]
            y = offsets[base + k, 1]
            p = rho2[k]
            for l in range(n_cells):
                zx = x + relx[l]
                zy = y + rely[l]
                buf[l] = p / (zx * zx + zy * zy)
            if generic:
                for l in range(n_cells):
                    buf[l] = buf[l] ** half_kappa
            else:
                # branch-free so the loop vectorizes
                for l in range(n_cells):
                    t = buf[l]
                    s = math.sqrt(t)
                    q = math.sqrt(s)
                    buf[l] = t**a * (b * s + (1 - b)) * (c * q + (1 - c))
            buf[own] = 1.0
            for l in range(n_cells):
                r = buf[l]
                o1[i, l] += r
                o2[i, l] += r * r


@numba.njit(nogil=True, cache=True)
def _reduce_batches(ranks, sizes, want, offs, acc_sum, acc_sq_pre, acc_sq_suf):
    """Fold batch rank sums into group-sum moments for every requested K.

    Rank sums for K users are derived from those for K + 1 by the order
    statistics recurrence
        E[f(X_(i:K))] = ((K - i) E[f(X_(i:K+1))] + (i + 1) E[f(X_(i+1:K+1))]) / (K + 1)
    (0-based i), which applied to sample sums equals averaging over every
    K-subset of each drop. For each K flagged in ``want`` the prefix sums S_m
    (interior group with m users) are accumulated as sum S_m, sum S_m^2 / n_b
    and sum (S_K - S_m)^2 / n_b, at flat offset offs[K].
    """
    n_batches, _, drop_size, n_cells = ranks.shape
    work = np.empty((2, drop_size, n_cells))
    pre = np.empty((drop_size + 1, n_cells))
    for b in range(n_batches):
        nb = sizes[b]
        if nb == 0:
            continue
        inv = 1.0 / nb
        work[:, :, :] = ranks[b]
        for K in range(drop_size, 0, -1):
            if K < drop_size:
                for g in range(2):
                    for i in range(K):
                        for l in range(n_cells):
                            work[g, i, l] = ((K - i) * work[g, i, l] + (i + 1) * work[g, i + 1, l]) / (K + 1)
            if not want[K]:
                continue
            base = offs[K]
            for g in range(2):
                for l in range(n_cells):
                    pre[0, l] = 0.0
                for i in range(K):
                    for l in range(n_cells):
                        pre[i + 1, l] = pre[i, l] + work[g, i, l]
                for m in range(K + 1):
                    row = base + m * n_cells
                    for l in range(n_cells):
                        s = pre[m, l]
                        e = pre[K, l] - s
                        acc_sum[g, row + l] += s
                        acc_sq_pre[g, row + l] += s * s * inv
                        acc_sq_suf[g, row + l] += e * e * inv


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    """Independent generator for one chunk, derived from (seed, chunk index) only."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(chunk),)))


def batch_size_for(n_samples: int) -> int:
    """Drops per batch-mean: a power of two in [8, 256] leaving >= 256 batches when possible."""
    b = 8
    while b < 256 and n_samples // (2 * b) >= 256:
        b *= 2
    return b


def estimate_moment_tables(
    grid: CellGrid,
    model: PropagationModel,
    Ks,
    n_samples: int,
    min_dist_fraction: float = 0.14,
    seed: int = 0,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    drop_size: int | None = None,
) -> dict[int, MomentTable]:
    """Monte-Carlo moment tables for several K from one set of drops.

    Every drop places ``drop_size`` (default ``max(Ks)``) users in each cell.
    Tables for smaller K average over all K-user subsets of each drop, so
    each table is unbiased and the tables share common random numbers.
    With ``drop_size == K`` the estimate is the plain per-drop procedure.
    """
    Ks = sorted({int(K) for K in Ks})
    if not Ks or Ks[0] < 1:
        raise InvalidArgument(f"K values must be positive integers, got {Ks!r}")
    if int(n_samples) != n_samples or n_samples < 1:
        raise InvalidArgument(f"n_samples must be a positive integer, got {n_samples!r}")
    if not 0.0 <= min_dist_fraction < 1.0:
        raise InvalidArgument(f"min_dist_fraction must lie in [0, 1), got {min_dist_fraction!r}")
    drop_size = Ks[-1] if drop_size is None else int(drop_size)
    if drop_size < Ks[-1]:
        raise InvalidArgument(f"drop_size {drop_size} is smaller than K={Ks[-1]}")
    n_samples = int(n_samples)
    batch = batch_size_for(n_samples)
    if chunk_size % batch:
        raise InvalidArgument(f"chunk_size {chunk_size} must be a multiple of the batch size {batch}")

    victim = 0
    n_cells = grid.n_cells
    rel = grid.centers - grid.centers[victim]
    relx = np.ascontiguousarray(rel[:, 0])
    rely = np.ascontiguousarray(rel[:, 1])
    half_kappa = model.kappa / 2.0
    pa, pb, pc, generic = _power_split(half_kappa)

    want = np.zeros(drop_size + 1, dtype=np.bool_)
    offs = np.zeros(drop_size + 1, dtype=np.int64)
    total = 0
    for K in Ks:
        want[K] = True
        offs[K] = total
        total += (K + 1) * n_cells
    acc_sum = np.zeros((2, total))
    acc_sq_pre = np.zeros((2, total))
    acc_sq_suf = np.zeros((2, total))

    n_chunks = -(-n_samples // chunk_size)

    def run(c):
        n_c = min(chunk_size, n_samples - c * chunk_size)
        offsets = sample_offsets(chunk_rng(seed, c), n_c * drop_size, grid.radius, min_dist_fraction)
        nb = -(-n_c // batch)
        ranks = np.zeros((nb, 2, drop_size, n_cells))
        _rank_sums(offsets, relx, rely, victim, half_kappa, pa, pb, pc, generic, drop_size, batch, ranks)
        sizes = np.full(nb, batch, dtype=np.int64)
        sizes[-1] = n_c - batch * (nb - 1)
        return ranks, sizes

    def fold(result):
        ranks, sizes = result
        _reduce_batches(ranks, sizes, want, offs, acc_sum, acc_sq_pre, acc_sq_suf)

    # chunks are folded strictly in index order, so sums are bit-identical for any thread count
    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for result in pool.map(run, range(n_chunks)):
                fold(result)
    else:
        for c in range(n_chunks):
            fold(run(c))

    n = float(n_samples)
    n_batches = -(-n_samples // batch)
    prov = Provenance(
        grid_hash=grid.geometry_hash(),
        kappa=float(model.kappa),
        min_dist_fraction=float(min_dist_fraction),
        n_samples=n_samples,
        seed=int(seed),
        method="montecarlo",
        chunk_size=int(chunk_size),
        drop_size=drop_size,
    )
    tables = {}
    for K in Ks:
        sl = slice(offs[K], offs[K] + (K + 1) * n_cells)
        s_pre = acc_sum[:, sl].reshape(2, K + 1, n_cells)
        s_suf = s_pre[:, K:K + 1, :] - s_pre
        counts = np.arange(K + 1, dtype=float)[None, :, None]
        mu = np.full((2, 2, K + 1, n_cells), np.nan)
        se = np.full_like(mu, np.nan)
        for grp, s, sq, cnt in (
            (0, s_pre, acc_sq_pre[:, sl].reshape(2, K + 1, n_cells), counts),
            (1, s_suf, acc_sq_suf[:, sl].reshape(2, K + 1, n_cells), K - counts),
        ):
            mean = s / n
            if n_batches > 1:
                # batch-means variance of a single drop's group sum
                var = np.maximum(sq - n * mean**2, 0.0) / (n_batches - 1)
                err = np.sqrt(var / n)
            else:
                err = np.full_like(mean, np.inf)
            with np.errstate(invalid="ignore", divide="ignore"):
                mu[grp] = np.where(cnt > 0, mean / cnt, np.nan)
                se[grp] = np.where(cnt > 0, err / cnt, np.nan)
        mu[0, :, 1:, victim] = 1.0
        mu[1, :, :K, victim] = 1.0
        se[0, :, 1:, victim] = 0.0
        se[1, :, :K, victim] = 0.0
        tables[K] = MomentTable(K=K, mu_I=mu[0], mu_E=mu[1], se_I=se[0], se_E=se[1], provenance=prov)
    return tables


def estimate_moment_table(
    grid: CellGrid,
    model: PropagationModel,
    K: int,
    n_samples: int,
    min_dist_fraction: float = 0.14,
    seed: int = 0,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    drop_size: int | None = None,
) -> MomentTable:
    """Monte-Carlo moments for every beta_f = m / K, m = 0..K-1."""
    if int(K) != K or K < 1:
        raise InvalidArgument(f"K must be a positive integer, got {K!r}")
    return estimate_moment_tables(
        grid, model, [K], n_samples, min_dist_fraction, seed, threads, chunk_size, drop_size
    )[int(K)]


def estimate_mu(
    grid: CellGrid,
    model: PropagationModel,
    K: int,
    beta_f: float,
    n_samples: int,
    min_dist_fraction: float = 0.14,
    seed: int = 0,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> GroupStatistics:
    """Monte-Carlo group moments for one (K, beta_f), drawing exactly K users per drop."""
    split_index(K, beta_f)
    table = estimate_moment_table(
        grid, model, K, n_samples, min_dist_fraction, seed, threads=threads, chunk_size=chunk_size
    )
    return table.statistics(beta_f)


# --------------------------------------------------------------------------
# Quadrature oracle
# --------------------------------------------------------------------------


def disk_hexagon_area(rho, radius: float = 1.0):
    """Area of {|u| <= rho} inside the hexagon of circumradius ``radius``."""
    rho = np.asarray(rho, dtype=float)
    apothem = SQRT3 / 2.0 * radius
    full = math.pi * rho**2
    over = np.clip(rho, apothem, None)
    caps = over**2 * np.arccos(apothem / over) - apothem * np.sqrt(over**2 - apothem**2)
    return np.where(rho >= radius, hexagon_area(radius), full - 6.0 * caps)


def distance_cdf(rho, radius: float = 1.0, min_dist_fraction: float = 0.14):
    """CDF of the user-to-BS distance for the uniform law on hexagon minus disk."""
    rmin = min_dist_fraction * radius
    inner = math.pi * rmin**2
    usable = hexagon_area(radius) - inner
    return np.clip((disk_hexagon_area(rho, radius) - inner) / usable, 0.0, 1.0)


def polar_nodes(radius: float, min_dist_fraction: float, resolution: int):
    """Gauss-Legendre product rule on the hexagon minus the exclusion disk.

    The hexagon is cut into 12 angular wedges (vertex to edge midpoint) and
    each wedge radially into [rmin, apothem] and [apothem, boundary], so the
    integrand is smooth on every piece. Returns points (P, 2), polar radius
    (P,) and weights (P,) summing to the usable area.
    """
    apothem = SQRT3 / 2.0 * radius
    rmin = min_dist_fraction * radius
    if rmin >= apothem:
        raise InvalidArgument("quadrature oracle requires the exclusion disk inside the inscribed circle")
    t, w = roots_legendre(resolution)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    pts, rhos, wts = [], [], []
    for wedge in range(12):
        th0 = wedge * math.pi / 6.0
        th = th0 + t * (math.pi / 6.0)
        wth = w * (math.pi / 6.0)
        # boundary distance along each direction; the nearest edge normal sits at 30 + 60k degrees
        normal = (math.floor(wedge / 2) * 2 + 1) * math.pi / 6.0
        rmax = apothem / np.cos(th - normal)
        for lo, hi in ((np.full_like(th, rmin), np.full_like(th, apothem)), (np.full_like(th, apothem), rmax)):
            span = hi - lo
            r = lo[:, None] + span[:, None] * t[None, :]
            jac = (wth * span)[:, None] * w[None, :] * r
            pts.append(np.stack([r * np.cos(th)[:, None], r * np.sin(th)[:, None]], axis=-1).reshape(-1, 2))
            rhos.append(r.ravel())
            wts.append(jac.ravel())
    return np.concatenate(pts), np.concatenate(rhos), np.concatenate(wts)


def quadrature_moment_table(
    grid: CellGrid,
    model: PropagationModel,
    K: int,
    min_dist_fraction: float = 0.14,
    grid_resolution: int = 48,
    victim: int = 0,
) -> MomentTable:
    """Deterministic moments from order-statistic inclusion weights.

    A user at distance rho from its BS belongs to the m closest of K i.i.d.
    users with probability BinomCDF(m - 1; K - 1, F(rho)), F being the
    distance CDF. Integrating the relative strength against these weights
    gives the interior moments without sampling; the edge weight is the
    complement.
    """
    if int(K) != K or K < 1:
        raise InvalidArgument(f"K must be a positive integer, got {K!r}")
    if grid_resolution < 4:
        raise InvalidArgument(f"grid_resolution {grid_resolution} is too coarse")
    K = int(K)
    pts, rho, wts = polar_nodes(grid.radius, min_dist_fraction, int(grid_resolution))
    area = wts.sum()
    dens = wts / area
    F = distance_cdf(rho, grid.radius, min_dist_fraction)
    ms = np.arange(K + 1)
    # P[user is among the m closest]; row m=0 is identically zero
    incl = binom.cdf(ms[:, None] - 1, K - 1, F[None, :])
    rel = grid.centers - grid.centers[victim]
    n_cells = grid.n_cells
    mu = np.full((2, 2, K + 1, n_cells), np.nan)
    for l in range(n_cells):
        if l == victim:
            continue
        z = pts + rel[l]
        ratio = (rho / np.hypot(z[:, 0], z[:, 1])) ** model.kappa
        for g in (1, 2):
            f = ratio**g * dens
            inner = incl @ f  # (K+1,) = E[ratio^g ; included] per user
            whole = f.sum()
            with np.errstate(invalid="ignore", divide="ignore"):
                mu[0, g - 1, :, l] = np.where(ms > 0, K * inner / ms, np.nan)
                mu[1, g - 1, :, l] = np.where(ms < K, K * (whole - inner) / (K - ms), np.nan)
    mu[0, :, 1:, victim] = 1.0
    mu[1, :, :K, victim] = 1.0
    prov = Provenance(
        grid_hash=grid.geometry_hash(),
        kappa=float(model.kappa),
        min_dist_fraction=float(min_dist_fraction),
        n_samples=0,
        seed=None,
        method=f"quadrature:{int(grid_resolution)}",
        chunk_size=0,
    )
    return MomentTable(K=K, mu_I=mu[0], mu_E=mu[1], se_I=None, se_E=None, provenance=prov)


def quadrature_mu_oracle(
    grid: CellGrid,
    model: PropagationModel,
    K: int,
    beta_f: float,
    min_dist_fraction: float = 0.14,
    grid_resolution: int = 48,
) -> GroupStatistics:
    split_index(K, beta_f)
    return quadrature_moment_table(grid, model, K, min_dist_fraction, grid_resolution).statistics(beta_f)


def moments_csv_rows(grid: CellGrid, stats: GroupStatistics):
    """Rows ``cell_index, tier, color, group, gamma, mu, stderr`` for CSV export."""
    rows = []
    for l in range(grid.n_cells):
        color = "" if grid.colors is None else int(grid.colors[l])
        for group in ("I", "E"):
            if group == "I" and not stats.has_interior:
                continue
            for g in (1, 2):
                se = stats.stderr(group, g)
                rows.append(
                    (l, int(grid.tier[l]), color, group, g,
                     float(stats.moments(group, g)[l]),
                     float("nan") if se is None else float(se[l]))
                )
    return rows
