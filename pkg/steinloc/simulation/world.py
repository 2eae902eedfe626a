"""Synthetic worlds made of axis-aligned rectangles, sampled into map clouds
and ray-cast exactly for scan simulation.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from steinloc.exceptions import ScenarioError
from steinloc.mapping.cloud import GaussianCloud, estimate_covariances
from steinloc.mapping.ply import read_ply
from steinloc.simulation.models import BoxSpec, DoorSpec, RoomSpec, WorldSpec

logger = logging.getLogger(__name__)

# In-plane axes (u, v) of a rectangle lying on a plane normal to `axis`.
PLANE_AXES = {0: (1, 2), 1: (0, 2), 2: (0, 1)}
WALLS = {"x-": (0, 0), "x+": (0, 1), "y-": (1, 0), "y+": (1, 1)}


@dataclass(frozen=True)
class Rect:
    """Rectangle {x[axis] = offset, u0 <= x[u] <= u1, v0 <= x[v] <= v1}."""

    axis: int
    offset: float
    u0: float
    u1: float
    v0: float
    v1: float

    @property
    def area(self) -> float:
        return (self.u1 - self.u0) * (self.v1 - self.v0)

    def sample(self, spacing: float) -> NDArray[np.float64]:
        """Cell-centred grid with about one point per spacing^2."""
        n_u = max(1, int(round((self.u1 - self.u0) / spacing)))
        n_v = max(1, int(round((self.v1 - self.v0) / spacing)))
        u = self.u0 + (np.arange(n_u) + 0.5) * (self.u1 - self.u0) / n_u
        v = self.v0 + (np.arange(n_v) + 0.5) * (self.v1 - self.v0) / n_v
        uu, vv = np.meshgrid(u, v, indexing="ij")
        points = np.empty((uu.size, 3))
        a_u, a_v = PLANE_AXES[self.axis]
        points[:, self.axis] = self.offset
        points[:, a_u] = uu.ravel()
        points[:, a_v] = vv.ravel()
        return points


def _wall(axis: int, offset: float, u: tuple, v: tuple, doors: list[DoorSpec]) -> list[Rect]:
    pieces = []
    cursor = u[0]
    for door in sorted(doors, key=lambda d: d.center):
        a = max(door.center - 0.5 * door.width, u[0])
        b = min(door.center + 0.5 * door.width, u[1])
        if b <= a:
            continue
        if a > cursor:
            pieces.append(Rect(axis, offset, cursor, a, v[0], v[1]))
        top = min(v[0] + door.height, v[1])
        if top < v[1]:
            pieces.append(Rect(axis, offset, a, b, top, v[1]))
        cursor = max(cursor, b)
    if cursor < u[1]:
        pieces.append(Rect(axis, offset, cursor, u[1], v[0], v[1]))
    return pieces


def room_rects(room: RoomSpec) -> list[Rect]:
    lo, hi = room.lo, room.hi
    rects = [
        Rect(2, lo[2], lo[0], hi[0], lo[1], hi[1]),
        Rect(2, hi[2], lo[0], hi[0], lo[1], hi[1]),
    ]
    for name, (axis, side) in WALLS.items():
        a_u, a_v = PLANE_AXES[axis]
        doors = [d for d in room.doors if d.wall == name]
        rects += _wall(
            axis,
            hi[axis] if side else lo[axis],
            (lo[a_u], hi[a_u]),
            (lo[a_v], hi[a_v]),
            doors,
        )
    return rects


def box_rects(box: BoxSpec) -> list[Rect]:
    rects = []
    for axis in range(3):
        a_u, a_v = PLANE_AXES[axis]
        for offset in (box.lo[axis], box.hi[axis]):
            rects.append(Rect(axis, offset, box.lo[a_u], box.hi[a_u], box.lo[a_v], box.hi[a_v]))
    return rects


@dataclass(eq=False)
class World:
    """Map cloud plus the geometry scans are cast against.

    Analytic worlds carry rectangles. Point-cloud worlds carry a k-d tree and
    are cast approximately: a ray hits the first map point within
    `tube_radius` of a sample along it.
    """

    cloud: GaussianCloud
    rects: list[Rect] = field(default_factory=list)
    tree: cKDTree | None = None
    tube_radius: float = 0.05

    def __post_init__(self):
        self._axis = np.array([r.axis for r in self.rects], dtype=np.int64)
        self._offset = np.array([r.offset for r in self.rects])
        self._u_axis = np.array([PLANE_AXES[r.axis][0] for r in self.rects], dtype=np.int64)
        self._v_axis = np.array([PLANE_AXES[r.axis][1] for r in self.rects], dtype=np.int64)
        self._u = np.array([(r.u0, r.u1) for r in self.rects]).reshape(-1, 2)
        self._v = np.array([(r.v0, r.v1) for r in self.rects]).reshape(-1, 2)

    @property
    def is_analytic(self) -> bool:
        return bool(self.rects)

    @property
    def surface_area(self) -> float:
        return float(sum(r.area for r in self.rects))

    def cast(
        self,
        origin: NDArray[np.float64],
        directions: NDArray[np.float64],
        min_range: float,
        max_range: float,
    ) -> NDArray[np.float64]:
        """Range along each unit direction to the first surface, inf on a miss."""
        origin = np.asarray(origin, dtype=np.float64)
        if self.is_analytic:
            return self._cast_analytic(origin, directions, min_range, max_range)
        return self._cast_points(origin, directions, min_range, max_range)

    def _cast_analytic(self, origin, directions, min_range, max_range):
        n_rays = len(directions)
        d_axis = directions[:, self._axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self._offset - origin[self._axis]) / d_axis
        u = origin[self._u_axis] + t * directions[:, self._u_axis]
        v = origin[self._v_axis] + t * directions[:, self._v_axis]
        valid = (
            np.isfinite(t)
            & (t > min_range)
            & (t <= max_range)
            & (u >= self._u[:, 0])
            & (u <= self._u[:, 1])
            & (v >= self._v[:, 0])
            & (v <= self._v[:, 1])
        )
        ranges = np.where(valid, t, np.inf).min(axis=1) if len(self.rects) else np.full(n_rays, np.inf)
        return ranges

    def _cast_points(self, origin, directions, min_range, max_range):
        samples = np.arange(max(min_range, self.tube_radius), max_range, self.tube_radius)
        along = origin + directions[:, None, :] * samples[None, :, None]
        dist, _ = self.tree.query(along.reshape(-1, 3), distance_upper_bound=self.tube_radius, workers=-1)
        found = np.isfinite(dist).reshape(len(directions), len(samples))
        first = np.argmax(found, axis=1)
        return np.where(found.any(axis=1), samples[first], np.inf)


def generate_world(spec: WorldSpec) -> World:
    """Sample the world surfaces at `spec.density` and fit the map Gaussians.

    Args:
        spec (WorldSpec): rooms, solid boxes, or a PLY point cloud.

    Raises:
        ScenarioError: the world has no surfaces.

    Returns:
        World: map cloud and cast geometry.
    """
    if spec.map_ply:
        points = read_ply(spec.map_ply)
        cloud = estimate_covariances(points, spec.cov_k)
        logger.info(f"Point-cloud world from {spec.map_ply}: {len(cloud)} points")
        return World(cloud, tree=cKDTree(points), tube_radius=spec.tube_radius)

    rects = [r for room in spec.rooms for r in room_rects(room)]
    rects += [r for box in spec.boxes for r in box_rects(box)]
    rects = [r for r in rects if r.area > 0.0]
    if not rects:
        raise ScenarioError("World description has no surfaces")
    spacing = 1.0 / np.sqrt(spec.density)
    points = np.concatenate([r.sample(spacing) for r in rects])
    cloud = estimate_covariances(points, spec.cov_k)
    world = World(cloud, rects)
    logger.info(
        f"World with {len(rects)} surfaces, {world.surface_area:.1f} m^2, {len(cloud)} points"
    )
    return world
