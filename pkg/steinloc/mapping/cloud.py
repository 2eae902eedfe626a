import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from steinloc.exceptions import MapError
from steinloc.lie.se3 import Pose

logger = logging.getLogger(__name__)

EPS_PLANE = 1e-3
MIN_SCALE = 1e-6
MIN_SCAN_POINTS = 5


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned box [lo, hi] in meters."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    @classmethod
    def of(cls, points: NDArray[np.float64]) -> "Bounds":
        return cls(tuple(points.min(axis=0).tolist()), tuple(points.max(axis=0).tolist()))

    @property
    def extent(self) -> NDArray[np.float64]:
        return np.asarray(self.hi) - np.asarray(self.lo)

    def is_degenerate(self) -> bool:
        return bool(np.any(self.extent <= 0.0))

    def contains(self, points: NDArray[np.float64], tol: float = 0.0) -> NDArray[np.bool_]:
        points = np.atleast_2d(points)
        return np.all(
            (points >= np.asarray(self.lo) - tol) & (points <= np.asarray(self.hi) + tol),
            axis=1,
        )

    def padded(self, margin: float) -> "Bounds":
        return Bounds(
            tuple((np.asarray(self.lo) - margin).tolist()),
            tuple((np.asarray(self.hi) + margin).tolist()),
        )


@dataclass(frozen=True)
class PointGaussian:
    mu: NDArray[np.float64]
    sigma: NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class GaussianCloud:
    """Points modeled as Gaussians, stored column-wise.

    `means` is (N, 3) and `covariances` is (N, 3, 3). Scan clouds may be empty,
    map clouds never are.
    """

    means: NDArray[np.float64]
    covariances: NDArray[np.float64]
    bounds: Bounds

    @classmethod
    def empty(cls) -> "GaussianCloud":
        return cls(np.zeros((0, 3)), np.zeros((0, 3, 3)), Bounds((0.0,) * 3, (0.0,) * 3))

    @classmethod
    def from_arrays(
        cls, means: NDArray[np.float64], covariances: NDArray[np.float64]
    ) -> "GaussianCloud":
        means = np.ascontiguousarray(means, dtype=np.float64).reshape(-1, 3)
        covariances = np.ascontiguousarray(covariances, dtype=np.float64).reshape(-1, 3, 3)
        if len(means) != len(covariances):
            raise MapError(f"{len(means)} means but {len(covariances)} covariances")
        if len(means) == 0:
            return cls.empty()
        return cls(means, covariances, Bounds.of(means))

    def __len__(self) -> int:
        return len(self.means)

    def __getitem__(self, index: int) -> PointGaussian:
        return PointGaussian(self.means[index], self.covariances[index])

    def __iter__(self) -> Iterator[PointGaussian]:
        return (self[i] for i in range(len(self)))

    @property
    def is_empty(self) -> bool:
        return len(self.means) == 0

    def transformed(self, pose: Pose) -> "GaussianCloud":
        """Same Gaussians expressed in another frame: mu -> T mu, S -> R S R^T."""
        if self.is_empty:
            return self
        rot = pose.rotation
        return GaussianCloud.from_arrays(
            pose.transform_points(self.means),
            np.einsum("ij,njk,lk->nil", rot, self.covariances, rot),
        )


def regularize_plane(
    covariances: NDArray[np.float64], eps_plane: float = EPS_PLANE
) -> NDArray[np.float64]:
    """Replace eigenvalues by lambda_max * (eps_plane, 1, 1), keeping eigenvectors."""
    vals, vecs = np.linalg.eigh(covariances)
    scale = np.maximum(vals[:, 2], MIN_SCALE)
    diag = np.stack([eps_plane * scale, scale, scale], axis=1)
    out = np.einsum("nij,nj,nkj->nik", vecs, diag, vecs)
    return 0.5 * (out + np.transpose(out, (0, 2, 1)))


def estimate_covariances(
    points: NDArray[np.float64], k: int = 10, eps_plane: float = EPS_PLANE
) -> GaussianCloud:
    """Per-point plane-model covariances from the k nearest neighbors.

    Args:
        points (NDArray): (N, 3) point positions in meters.
        k (int, optional): Neighbors per point, the point itself excluded. Defaults to 10.
        eps_plane (float, optional): Normal-to-plane eigenvalue ratio. Defaults to 1e-3.

    Raises:
        MapError: k < 4 or fewer than k + 1 points.

    Returns:
        GaussianCloud: means are the input points, covariances are regularized.
    """
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    if k < 4:
        raise MapError(f"k must be at least 4, got {k}")
    if len(points) < k + 1:
        raise MapError(f"Need at least {k + 1} points for k={k}, got {len(points)}")
    _, index = cKDTree(points).query(points, k=k + 1, workers=-1)
    neighbors = points[index]
    centered = neighbors - neighbors.mean(axis=1, keepdims=True)
    covariances = np.einsum("nki,nkj->nij", centered, centered) / k
    return GaussianCloud.from_arrays(points, regularize_plane(covariances, eps_plane))


def voxel_downsample(points: NDArray[np.float64], voxel: float) -> NDArray[np.float64]:
    """Centroid of the points falling in each voxel, ordered by voxel key."""
    if len(points) == 0:
        return points.reshape(0, 3)
    keys = np.floor(points / voxel).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    centroids = np.zeros((len(counts), 3))
    np.add.at(centroids, inverse, points)
    return centroids / counts[:, None]


def prepare_scan(
    points: NDArray[np.float64],
    max_points: int = 1000,
    voxel: float = 0.1,
    k: int = 10,
    eps_plane: float = EPS_PLANE,
) -> GaussianCloud:
    """Downsample a raw scan to at most `max_points` and attach covariances.

    Scans that end up with fewer than five points are returned empty and are
    handled like an occluded frame.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    points = points[np.all(np.isfinite(points), axis=1)]
    if len(points) > max_points:
        points = voxel_downsample(points, voxel)
    if len(points) > max_points:
        points = points[np.linspace(0, len(points) - 1, max_points).astype(np.int64)]
    if len(points) < MIN_SCAN_POINTS:
        if len(points):
            logger.warning(f"Scan with {len(points)} points treated as empty")
        return GaussianCloud.empty()
    return estimate_covariances(points, max(min(k, len(points) - 1), 4), eps_plane)


def cap_scan(scan: GaussianCloud, max_points: int, voxel: float, k: int = 10) -> GaussianCloud:
    """Re-prepare a scan cloud only when it exceeds the point budget."""
    if len(scan) <= max_points:
        return scan
    return prepare_scan(scan.means, max_points=max_points, voxel=voxel, k=k)
