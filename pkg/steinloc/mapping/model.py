import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from steinloc.mapping.cloud import EPS_PLANE, GaussianCloud, estimate_covariances
from steinloc.mapping.nnf import DEFAULT_MAX_CELLS, NearestNeighborField, build_nnf

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MapModel:
    """Map Gaussians together with their nearest neighbor field."""

    cloud: GaussianCloud
    field: NearestNeighborField

    @classmethod
    def build(
        cls,
        cloud: GaussianCloud,
        resolution: float,
        max_query_dist: float,
        padding: float | None = None,
        max_cells: int = DEFAULT_MAX_CELLS,
    ) -> "MapModel":
        padding = max_query_dist if padding is None else padding
        return cls(cloud, build_nnf(cloud, resolution, padding, max_query_dist, max_cells))

    @classmethod
    def from_points(
        cls,
        points: NDArray[np.float64],
        resolution: float,
        max_query_dist: float,
        k: int = 10,
        eps_plane: float = EPS_PLANE,
        padding: float | None = None,
        max_cells: int = DEFAULT_MAX_CELLS,
    ) -> "MapModel":
        cloud = estimate_covariances(points, k, eps_plane)
        logger.info(f"Map with {len(cloud)} points, bounds {cloud.bounds}")
        return cls.build(cloud, resolution, max_query_dist, padding, max_cells)

    def __len__(self) -> int:
        return len(self.cloud)
