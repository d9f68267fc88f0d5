"""Hexagonal multi-cell layout, pilot-reuse coloring and user drops.

Cells are flat-top hexagons of circumradius ``radius`` (one vertex on the
positive x axis). Neighbouring base stations are ``sqrt(3) * radius`` apart.
Cells are addressed internally by axial lattice coordinates ``(q, s)`` with
``x = 1.5 * radius * q`` and ``y = sqrt(3) * radius * (s + q / 2)``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math

import numpy as np

from .errors import InvalidArgument, UnsupportedReuseFactor

SQRT3 = math.sqrt(3.0)
SUPPORTED_BETAS = (1, 3, 4, 7)

# axial offsets of the six neighbours of (0, 0)
NEIGHBOR_OFFSETS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


@dataclasses.dataclass(frozen=True, eq=False)
class CellGrid:
    """Immutable description of the cell layout.

    ``centers[0]`` is the measured cell at the origin. ``colors`` and
    ``beta`` are ``None`` until :func:`assign_reuse_coloring` is applied.
    """

    radius: float
    tiers: int
    centers: np.ndarray  # (n_cells, 2)
    axial: np.ndarray  # (n_cells, 2) int
    tier: np.ndarray  # (n_cells,) int
    colors: np.ndarray | None = None
    beta: int | None = None

    @property
    def n_cells(self) -> int:
        return len(self.centers)

    @property
    def inter_site_distance(self) -> float:
        return SQRT3 * self.radius

    def pilot_sharing_set(self, j: int = 0) -> np.ndarray:
        """Indices of the cells whose edge group reuses cell ``j``'s pilots."""
        if self.colors is None:
            raise InvalidArgument("grid has no reuse coloring; call assign_reuse_coloring first")
        return np.flatnonzero(self.colors == self.colors[j])

    def neighbors(self, j: int) -> list[int]:
        lookup = self._axial_lookup()
        q, s = self.axial[j]
        out = []
        for dq, ds in NEIGHBOR_OFFSETS:
            k = lookup.get((int(q + dq), int(s + ds)))
            if k is not None:
                out.append(k)
        return sorted(out)

    def adjacent_pairs(self) -> list[tuple[int, int]]:
        return [(i, k) for i in range(self.n_cells) for k in self.neighbors(i) if i < k]

    def geometry_hash(self) -> str:
        """Content hash of the layout (colors excluded; moments do not depend on them)."""
        h = hashlib.sha256()
        h.update(repr((float(self.radius), int(self.tiers))).encode())
        h.update(np.ascontiguousarray(self.centers, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def dump(self) -> str:
        """Plain-text debug listing: ``index x y tier color`` per line."""
        lines = []
        for i, (x, y) in enumerate(self.centers):
            color = "-" if self.colors is None else str(int(self.colors[i]))
            lines.append(f"{i} {x:.6f} {y:.6f} {int(self.tier[i])} {color}")
        return "\n".join(lines) + "\n"

    def _axial_lookup(self) -> dict[tuple[int, int], int]:
        return {(int(q), int(s)): i for i, (q, s) in enumerate(self.axial)}


def axial_to_xy(q, s, radius: float):
    q = np.asarray(q, dtype=float)
    s = np.asarray(s, dtype=float)
    return np.stack([1.5 * radius * q, SQRT3 * radius * (s + q / 2.0)], axis=-1)


def build_hex_grid(radius: float, tiers: int) -> CellGrid:
    """Central cell plus ``tiers`` rings of surrounding cells.

    Cells are ordered by (tier, polar angle in [0, 2*pi)) so that indices are
    reproducible.
    """
    if not radius > 0:
        raise InvalidArgument(f"radius must be positive, got {radius!r}")
    if int(tiers) != tiers or tiers < 0:
        raise InvalidArgument(f"tiers must be a non-negative integer, got {tiers!r}")
    tiers = int(tiers)

    cells = []
    for q in range(-tiers, tiers + 1):
        for s in range(-tiers, tiers + 1):
            t = max(abs(q), abs(s), abs(q + s))
            if t > tiers:
                continue
            # angle from the unit-radius position keeps ordering scale-free
            x, y = axial_to_xy(q, s, 1.0)
            angle = math.atan2(y, x) % (2 * math.pi) if t else 0.0
            cells.append((t, round(angle, 9), q, s))
    cells.sort()
    axial = np.array([(q, s) for _, _, q, s in cells], dtype=np.int64)
    tier = np.array([t for t, _, _, _ in cells], dtype=np.int64)
    centers = axial_to_xy(axial[:, 0], axial[:, 1], float(radius))
    centers[0] = 0.0
    for arr in (axial, tier, centers):
        arr.setflags(write=False)
    return CellGrid(radius=float(radius), tiers=tiers, centers=centers, axial=axial, tier=tier)


def reuse_colors(axial: np.ndarray, beta: int) -> np.ndarray:
    """Lattice reuse pattern: a group homomorphism from the axial lattice onto the colors.

    Its kernel is the co-pilot sublattice, so cells of one color are at least
    ``sqrt(3 * beta) * radius`` apart for beta in {3, 7}; beta = 4 uses the
    (2, 0) cluster shift.
    """
    q = axial[:, 0]
    s = axial[:, 1]
    if beta == 1:
        colors = np.zeros(len(axial), dtype=np.int64)
    elif beta == 3:
        colors = np.mod(q - s, 3)
    elif beta == 4:
        colors = np.mod(q, 2) + 2 * np.mod(s, 2)
    elif beta == 7:
        colors = np.mod(3 * q + s, 7)
    else:
        raise UnsupportedReuseFactor(
            f"beta={beta!r} has no hexagonal lattice reuse pattern; use one of {SUPPORTED_BETAS}"
        )
    return colors.astype(np.int64)


def assign_reuse_coloring(grid: CellGrid, beta: int) -> CellGrid:
    if beta not in SUPPORTED_BETAS or isinstance(beta, bool):
        raise UnsupportedReuseFactor(
            f"beta={beta!r} has no hexagonal lattice reuse pattern; use one of {SUPPORTED_BETAS}"
        )
    colors = reuse_colors(grid.axial, int(beta))
    colors.setflags(write=False)
    return dataclasses.replace(grid, colors=colors, beta=int(beta))


def in_hexagon(points, radius: float) -> np.ndarray:
    """Membership test for the flat-top hexagon of circumradius ``radius`` at the origin."""
    points = np.asarray(points, dtype=float)
    ax = np.abs(points[..., 0])
    ay = np.abs(points[..., 1])
    half_height = SQRT3 / 2.0 * radius
    return (ay <= half_height) & (SQRT3 * ax + ay <= SQRT3 * radius)


def hexagon_area(radius: float) -> float:
    return 1.5 * SQRT3 * radius**2


def acceptance_probability(min_dist_fraction: float) -> float:
    """Fraction of the bounding box [-r, r] x [-sqrt(3)/2 r, sqrt(3)/2 r] kept by the sampler."""
    usable = hexagon_area(1.0) - math.pi * min_dist_fraction**2
    return usable / (2.0 * SQRT3)


def _check_min_dist(min_dist_fraction: float) -> None:
    if not 0.0 <= min_dist_fraction < 1.0:
        raise InvalidArgument(f"min_dist_fraction must lie in [0, 1), got {min_dist_fraction!r}")


def sample_offsets(rng: np.random.Generator, n: int, radius: float, min_dist_fraction: float) -> np.ndarray:
    """Draw ``n`` points uniformly on hexagon minus exclusion disk, relative to the BS.

    Rejection sampling from the bounding box. Accepted points are returned in
    draw order, so the output is a deterministic function of the generator
    state.
    """
    _check_min_dist(min_dist_fraction)
    out = np.empty((n, 2))
    filled = 0
    rate = acceptance_probability(min_dist_fraction)
    rmin2 = (min_dist_fraction * radius) ** 2
    half_height = SQRT3 / 2.0 * radius
    while filled < n:
        need = n - filled
        batch = int(need / rate * 1.05) + 16
        pts = rng.random((batch, 2))
        pts[:, 0] = (2.0 * pts[:, 0] - 1.0) * radius
        pts[:, 1] = (2.0 * pts[:, 1] - 1.0) * half_height
        keep = in_hexagon(pts, radius) & (np.einsum("ij,ij->i", pts, pts) >= rmin2)
        pts = pts[keep][:need]
        out[filled:filled + len(pts)] = pts
        filled += len(pts)
    return out


def sample_user_position(grid: CellGrid, cell: int, min_dist_fraction: float, rng: np.random.Generator) -> np.ndarray:
    """One uniformly distributed user coordinate in ``cell``."""
    _check_min_dist(min_dist_fraction)
    rmin2 = (min_dist_fraction * grid.radius) ** 2
    half_height = SQRT3 / 2.0 * grid.radius
    while True:
        u = rng.random(2)
        p = np.array([(2.0 * u[0] - 1.0) * grid.radius, (2.0 * u[1] - 1.0) * half_height])
        if in_hexagon(p, grid.radius) and p @ p >= rmin2:
            return grid.centers[cell] + p
