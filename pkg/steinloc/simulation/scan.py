import numpy as np
from numpy.typing import NDArray

from steinloc.lie.se3 import Pose
from steinloc.mapping.cloud import GaussianCloud, prepare_scan
from steinloc.simulation.models import SensorSpec
from steinloc.simulation.world import World


def sensor_directions(sensor: SensorSpec) -> NDArray[np.float64]:
    """Unit ray directions in the sensor frame, azimuth-major, shape (n_rays, 3)."""
    azimuth = np.linspace(0.0, 2.0 * np.pi, sensor.n_azimuth, endpoint=False)
    if sensor.n_elevation == 1:
        elevation = np.array([np.radians(0.5 * (sensor.elevation_min_deg + sensor.elevation_max_deg))])
    else:
        elevation = np.radians(
            np.linspace(sensor.elevation_min_deg, sensor.elevation_max_deg, sensor.n_elevation)
        )
    az, el = np.meshgrid(azimuth, elevation, indexing="ij")
    az, el = az.ravel(), el.ravel()
    return np.column_stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def cast_scan(
    world: World, pose: Pose, sensor: SensorSpec, rng: np.random.Generator
) -> NDArray[np.float64]:
    """Noisy hit points in the sensor frame, misses dropped."""
    directions = sensor_directions(sensor)
    ranges = world.cast(pose.translation, directions @ pose.rotation.T, sensor.min_range, sensor.max_range)
    noise = rng.normal(0.0, sensor.range_noise, len(ranges)) if sensor.range_noise > 0 else 0.0
    ranges = ranges + noise
    hit = np.isfinite(ranges) & (ranges > 0.0)
    return directions[hit] * ranges[hit, None]


def simulate_scan(
    world: World,
    pose: Pose,
    sensor: SensorSpec,
    rng: np.random.Generator,
    occluded: bool = False,
    cov_k: int = 10,
) -> GaussianCloud:
    """Ray-cast one scan from `pose` against the world surfaces.

    Args:
        world (World): geometry to cast against.
        pose (Pose): sensor pose in the map frame.
        sensor (SensorSpec): ray pattern, range limits and range noise.
        rng (np.random.Generator): range noise stream.
        occluded (bool, optional): a blocked sensor returns nothing. Defaults to False.
        cov_k (int, optional): neighbors for the scan covariances. Defaults to 10.

    Returns:
        GaussianCloud: raw hits in the sensor frame with covariances, empty when
        occluded or when fewer than five rays hit.
    """
    if occluded:
        return GaussianCloud.empty()
    points = cast_scan(world, pose, sensor, rng)
    return prepare_scan(points, max_points=max(len(points), 1), k=cov_k)
