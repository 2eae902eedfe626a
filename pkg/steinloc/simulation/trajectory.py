"""Ground-truth trajectories, simulated odometry, and their text formats.

TUM rows:      timestamp tx ty tz qx qy qz qw
Odometry rows: tx ty tz qx qy qz qw, 21 upper-triangular covariance entries
               (row-major, [omega; v] order), valid flag. 29 columns.
"""

import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.spatial.transform import Rotation

from steinloc.exceptions import TrajectoryError
from steinloc.lie.se3 import Pose, exp
from steinloc.localization.models import OdometryInput
from steinloc.simulation.models import Scenario, TrajectorySpec

logger = logging.getLogger(__name__)

TUM_COLUMNS = ["timestamp", "tx", "ty", "tz", "qx", "qy", "qz", "qw"]
UPPER = np.triu_indices(6)
ODOMETRY_COLUMNS = (
    ["tx", "ty", "tz", "qx", "qy", "qz", "qw"]
    + [f"c{i}{j}" for i, j in zip(*UPPER)]
    + ["valid"]
)
FLOAT_FORMAT = "%.9f"


def _pose_at(x: float, y: float, z: float, yaw: float) -> Pose:
    return Pose(Rotation.from_euler("z", yaw).as_matrix(), (x, y, z))


def generate_trajectory(spec: TrajectorySpec) -> list[Pose]:
    """Constant-speed walk through the waypoints, yaw interpolated the short way."""
    first = spec.waypoints[0]
    poses = [_pose_at(first.x, first.y, first.z, first.yaw)]
    counts = spec.segment_frames()
    for prev, cur, count in zip(spec.waypoints, spec.waypoints[1:], counts[1:]):
        if cur.teleport:
            poses.append(_pose_at(cur.x, cur.y, cur.z, cur.yaw))
            continue
        dyaw = math.remainder(cur.yaw - prev.yaw, 2.0 * math.pi)
        for s in np.arange(1, count + 1) / count:
            poses.append(
                _pose_at(
                    prev.x + s * (cur.x - prev.x),
                    prev.y + s * (cur.y - prev.y),
                    prev.z + s * (cur.z - prev.z),
                    prev.yaw + s * dyaw,
                )
            )
    return poses


def simulate_odometry(
    truth: list[Pose],
    scenario: Scenario,
    rng: np.random.Generator,
) -> list[OdometryInput]:
    """Noisy increments dT_true exp(n), n ~ N(0, cov); blocked while occluded.

    Frame 0 gets an identity increment with zero covariance.
    """
    noise = scenario.odometry
    cov = np.diag([noise.rot_sigma**2] * 3 + [noise.trans_sigma**2] * 3)
    std = np.sqrt(np.diag(cov))
    out = [OdometryInput()]
    for frame in range(1, len(truth)):
        sample = rng.normal(0.0, 1.0, 6) * std
        if scenario.is_occluded(frame):
            out.append(OdometryInput.blocked())
            continue
        delta = truth[frame - 1].inverse().compose(truth[frame])
        out.append(OdometryInput(delta=delta.compose(exp(sample)), cov=cov, valid=True))
    return out


def _pose_rows(poses: list[Pose]) -> NDArray[np.float64]:
    return np.array([np.concatenate([p.translation, p.quaternion]) for p in poses]).reshape(-1, 7)


def write_tum(path: str | Path, stamps: NDArray[np.float64], poses: list[Pose]) -> Path:
    path = Path(path)
    if len(stamps) != len(poses):
        raise TrajectoryError(f"{len(stamps)} timestamps for {len(poses)} poses")
    table = pd.DataFrame(np.column_stack([stamps, _pose_rows(poses)]), columns=TUM_COLUMNS)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, sep=" ", header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _read_table(path: Path, columns: list[str]) -> pd.DataFrame:
    if not path.is_file():
        raise TrajectoryError(f"{path} does not exist")
    try:
        table = pd.read_csv(path, sep=r"\s+", header=None, comment="#", engine="python")
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=columns, dtype=float)
    except (ValueError, pd.errors.ParserError) as e:
        raise TrajectoryError(f"Cannot parse {path}: {e}") from e
    if table.shape[1] != len(columns):
        raise TrajectoryError(f"{path}: expected {len(columns)} columns, got {table.shape[1]}")
    table.columns = columns
    try:
        table = table.astype(float)
    except ValueError as e:
        raise TrajectoryError(f"{path}: non-numeric value: {e}") from e
    return table


def read_tum(path: str | Path) -> tuple[NDArray[np.float64], list[Pose]]:
    """Read a TUM trajectory.

    Raises:
        TrajectoryError: missing file, wrong column count, or non-numeric entries.

    Returns:
        tuple: timestamps (N,) and poses.
    """
    table = _read_table(Path(path), TUM_COLUMNS)
    poses = [
        Pose.from_quaternion(row[["tx", "ty", "tz"]].to_numpy(), row[["qx", "qy", "qz", "qw"]].to_numpy())
        for _, row in table.iterrows()
    ]
    return table["timestamp"].to_numpy(), poses


def write_odometry(path: str | Path, odometry: list[OdometryInput]) -> Path:
    path = Path(path)
    rows = [
        np.concatenate([o.delta.translation, o.delta.quaternion, o.cov[UPPER], [float(o.valid)]])
        for o in odometry
    ]
    table = pd.DataFrame(np.array(rows).reshape(-1, len(ODOMETRY_COLUMNS)), columns=ODOMETRY_COLUMNS)
    table["valid"] = table["valid"].astype(int)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, sep=" ", header=False, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_odometry(path: str | Path) -> list[OdometryInput]:
    """Read a per-frame odometry file (29 columns).

    Raises:
        TrajectoryError: malformed rows or a covariance that is not PSD.
    """
    table = _read_table(Path(path), ODOMETRY_COLUMNS)
    out = []
    for frame, row in enumerate(table.to_numpy()):
        cov = np.zeros((6, 6))
        cov[UPPER] = row[7:28]
        cov = cov + np.triu(cov, 1).T
        try:
            odo = OdometryInput(
                delta=Pose.from_quaternion(row[:3], row[3:7]), cov=cov, valid=bool(row[28])
            )
        except ValueError as e:
            raise TrajectoryError(f"{path}: frame {frame}: {e}") from e
        out.append(odo)
    logger.debug(f"Read {len(out)} odometry rows from {path}")
    return out
