"""Dense voxel field storing, per voxel, the index of the nearest map point."""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from numpy.typing import NDArray

from steinloc.exceptions import MapError
from steinloc.mapping.cloud import GaussianCloud

logger = logging.getLogger(__name__)

EMPTY = -1
DEFAULT_MAX_CELLS = 2**30


@njit(cache=True)
def _stamp(cells, dist2, points, origin, resolution, max_query_dist):
    """Every point claims the voxels whose centers lie within max_query_dist.

    Points are visited in index order and only a strictly closer point replaces
    a claim, so ties resolve to the lowest index.
    """
    r2 = max_query_dist * max_query_dist
    reach = int(math.ceil(max_query_dist / resolution)) + 1
    nx, ny, nz = cells.shape
    for p in range(points.shape[0]):
        px = points[p, 0]
        py = points[p, 1]
        pz = points[p, 2]
        cx = int(math.floor((px - origin[0]) / resolution))
        cy = int(math.floor((py - origin[1]) / resolution))
        cz = int(math.floor((pz - origin[2]) / resolution))
        for ix in range(max(cx - reach, 0), min(cx + reach + 1, nx)):
            dx = origin[0] + (ix + 0.5) * resolution - px
            dx2 = dx * dx
            if dx2 > r2:
                continue
            for iy in range(max(cy - reach, 0), min(cy + reach + 1, ny)):
                dy = origin[1] + (iy + 0.5) * resolution - py
                dxy2 = dx2 + dy * dy
                if dxy2 > r2:
                    continue
                for iz in range(max(cz - reach, 0), min(cz + reach + 1, nz)):
                    dz = origin[2] + (iz + 0.5) * resolution - pz
                    d2 = dx * dx + dy * dy + dz * dz
                    if d2 <= r2 and d2 < dist2[ix, iy, iz]:
                        dist2[ix, iy, iz] = d2
                        cells[ix, iy, iz] = p


@njit(cache=True)
def lookup_index(cells, origin, resolution, x, y, z):
    """Stored map index of the voxel containing (x, y, z), or EMPTY."""
    ix = int(math.floor((x - origin[0]) / resolution))
    iy = int(math.floor((y - origin[1]) / resolution))
    iz = int(math.floor((z - origin[2]) / resolution))
    if ix < 0 or iy < 0 or iz < 0:
        return EMPTY
    if ix >= cells.shape[0] or iy >= cells.shape[1] or iz >= cells.shape[2]:
        return EMPTY
    return cells[ix, iy, iz]


@dataclass(frozen=True, eq=False)
class NearestNeighborField:
    origin: NDArray[np.float64]
    resolution: float
    dims: tuple[int, int, int]
    cells: NDArray[np.int32]
    max_query_dist: float

    @property
    def n_filled(self) -> int:
        return int(np.count_nonzero(self.cells != EMPTY))

    def cell_centers(self, index: NDArray[np.int64]) -> NDArray[np.float64]:
        """Centers of the voxels with integer coordinates `index` (M, 3)."""
        return self.origin + (np.asarray(index) + 0.5) * self.resolution

    def lookup(self, point: NDArray[np.float64]) -> int | None:
        found = lookup_index(
            self.cells, self.origin, self.resolution, float(point[0]), float(point[1]), float(point[2])
        )
        return None if found == EMPTY else int(found)


def build_nnf(
    cloud: GaussianCloud,
    resolution: float,
    padding: float,
    max_query_dist: float = 1.0,
    max_cells: int = DEFAULT_MAX_CELLS,
) -> NearestNeighborField:
    """Precompute the nearest-map-point field over the padded map bounds.

    Args:
        cloud (GaussianCloud): map cloud.
        resolution (float): voxel edge in meters.
        padding (float): margin added around the map bounds in meters.
        max_query_dist (float, optional): voxels whose center is farther than this
            from every map point stay empty. Defaults to 1.0.
        max_cells (int, optional): cell count cap. Defaults to 2**30.

    Raises:
        MapError: bad resolution/padding, empty map, or too many cells.

    Returns:
        NearestNeighborField: the filled field.
    """
    if resolution <= 0.0:
        raise MapError(f"NNF resolution must be positive, got {resolution}")
    if padding < 0.0:
        raise MapError(f"NNF padding must be non-negative, got {padding}")
    if cloud.is_empty:
        raise MapError("Cannot build a nearest neighbor field over an empty map")
    origin = np.asarray(cloud.bounds.lo) - padding
    extent = np.asarray(cloud.bounds.hi) + padding - origin
    dims = tuple(int(v) for v in np.floor(extent / resolution).astype(np.int64) + 1)
    n_cells = dims[0] * dims[1] * dims[2]
    if n_cells > max_cells:
        raise MapError(f"NNF needs {n_cells} cells {dims}, cap is {max_cells}")

    cells = np.full(dims, EMPTY, dtype=np.int32)
    dist2 = np.full(dims, np.inf)
    _stamp(cells, dist2, cloud.means, origin, float(resolution), float(max_query_dist))
    field = NearestNeighborField(origin, float(resolution), dims, cells, float(max_query_dist))
    logger.info(
        f"NNF built: dims={dims} resolution={resolution} filled={field.n_filled}/{n_cells}"
    )
    return field


def lookup_nearest(field: NearestNeighborField, point: NDArray[np.float64]) -> int | None:
    return field.lookup(point)
