"""Sources of moment tables for the optimizer: cached Monte Carlo or quadrature."""

from __future__ import annotations

import logging

from .cache import MomentCache
from .errors import ChecksumMismatch, InvalidArgument
from .geometry import CellGrid
from .mustats import (
    DEFAULT_CHUNK,
    GroupStatistics,
    MomentTable,
    Provenance,
    estimate_moment_tables,
    quadrature_moment_table,
)
from .propagation import PropagationModel

log = logging.getLogger(__name__)


class MonteCarloMuProvider:
    """Monte-Carlo tables for any K <= drop_size, all estimated from one set of drops.

    Tables are looked up in the on-disk cache first; the missing ones are
    computed together in a single pass and stored. Pass ``cache=None`` to
    keep everything in memory.
    """

    def __init__(
        self,
        grid: CellGrid,
        model: PropagationModel,
        n_samples: int,
        drop_size: int,
        min_dist_fraction: float = 0.14,
        seed: int = 0,
        threads: int = 1,
        chunk_size: int = DEFAULT_CHUNK,
        cache: MomentCache | None = None,
    ):
        if int(drop_size) != drop_size or drop_size < 1:
            raise InvalidArgument(f"drop_size must be a positive integer, got {drop_size!r}")
        self.grid = grid
        self.model = model
        self.n_samples = int(n_samples)
        self.drop_size = int(drop_size)
        self.min_dist_fraction = float(min_dist_fraction)
        self.seed = int(seed)
        self.threads = int(threads)
        self.chunk_size = int(chunk_size)
        self.cache = cache
        self._tables: dict[int, MomentTable] = {}

    @property
    def provenance(self) -> Provenance:
        return Provenance(
            grid_hash=self.grid.geometry_hash(),
            kappa=float(self.model.kappa),
            min_dist_fraction=self.min_dist_fraction,
            n_samples=self.n_samples,
            seed=self.seed,
            method="montecarlo",
            chunk_size=self.chunk_size,
            drop_size=self.drop_size,
        )

    def prefetch(self, Ks) -> None:
        Ks = sorted({int(K) for K in Ks} - set(self._tables))
        if Ks and Ks[-1] > self.drop_size:
            raise InvalidArgument(f"K={Ks[-1]} exceeds the provider's drop size {self.drop_size}")
        missing = []
        for K in Ks:
            table = None
            if self.cache is not None:
                try:
                    table = self.cache.load(self.provenance, K)
                except ChecksumMismatch as exc:
                    log.warning("discarding damaged cache entry: %s", exc)
                    self.cache.discard(self.provenance, K)
            if table is None:
                missing.append(K)
            else:
                self._tables[K] = table
        if not missing:
            return
        log.info("estimating moments for %d K values (%d drops of %d users)",
                 len(missing), self.n_samples, self.drop_size)
        fresh = estimate_moment_tables(
            self.grid, self.model, missing, self.n_samples, self.min_dist_fraction,
            seed=self.seed, threads=self.threads, chunk_size=self.chunk_size, drop_size=self.drop_size,
        )
        for K, table in fresh.items():
            if self.cache is not None:
                self.cache.store(table)
            self._tables[K] = table

    def table(self, K: int) -> MomentTable:
        if K not in self._tables:
            self.prefetch([K])
        return self._tables[int(K)]

    def statistics(self, K: int, beta_f: float) -> GroupStatistics:
        return self.table(K).statistics(beta_f)


class QuadratureMuProvider:
    """Deterministic tables from the quadrature oracle (no standard errors)."""

    def __init__(self, grid: CellGrid, model: PropagationModel, min_dist_fraction: float = 0.14,
                 grid_resolution: int = 48):
        self.grid = grid
        self.model = model
        self.min_dist_fraction = float(min_dist_fraction)
        self.grid_resolution = int(grid_resolution)
        self._tables: dict[int, MomentTable] = {}

    def prefetch(self, Ks) -> None:
        for K in Ks:
            self.table(K)

    def table(self, K: int) -> MomentTable:
        K = int(K)
        if K not in self._tables:
            self._tables[K] = quadrature_moment_table(
                self.grid, self.model, K, self.min_dist_fraction, self.grid_resolution
            )
        return self._tables[K]

    def statistics(self, K: int, beta_f: float) -> GroupStatistics:
        return self.table(K).statistics(beta_f)
