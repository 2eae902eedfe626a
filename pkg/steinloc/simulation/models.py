import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Vec3 = tuple[float, float, float]


class DoorSpec(BaseModel):
    """Rectangular hole in one room wall, from the floor up to `height`."""

    wall: Literal["x-", "x+", "y-", "y+"]
    center: float = Field(description="position along the wall, world coordinate")
    width: float = Field(1.0, gt=0.0)
    height: float = Field(2.1, gt=0.0)


class RoomSpec(BaseModel):
    """Hollow box seen from the inside: floor, ceiling and four walls."""

    lo: Vec3
    hi: Vec3
    doors: list[DoorSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _ordered(self):
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"room bounds must satisfy lo < hi, got {self.lo} {self.hi}")
        return self


class BoxSpec(BaseModel):
    """Solid obstacle seen from the outside."""

    lo: Vec3
    hi: Vec3

    @model_validator(mode="after")
    def _ordered(self):
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"box bounds must satisfy lo < hi, got {self.lo} {self.hi}")
        return self


class WorldSpec(BaseModel):
    rooms: list[RoomSpec] = Field(default_factory=list)
    boxes: list[BoxSpec] = Field(default_factory=list)
    density: float = Field(50.0, gt=0.0, description="surface samples per m^2")
    cov_k: int = Field(10, ge=4)
    map_ply: Optional[str] = Field(None, description="use this point cloud instead of analytic surfaces")
    tube_radius: float = Field(0.05, gt=0.0, description="ray tube for point-cloud worlds")


class SensorSpec(BaseModel):
    n_azimuth: int = Field(180, ge=1)
    n_elevation: int = Field(16, ge=1)
    elevation_min_deg: float = Field(-15.0, ge=-90.0, le=90.0)
    elevation_max_deg: float = Field(15.0, ge=-90.0, le=90.0)
    min_range: float = Field(0.1, ge=0.0)
    max_range: float = Field(30.0, gt=0.0)
    range_noise: float = Field(0.01, ge=0.0)

    @model_validator(mode="after")
    def _ranges(self):
        if self.elevation_max_deg < self.elevation_min_deg:
            raise ValueError("elevation_max_deg must be >= elevation_min_deg")
        if self.max_range <= self.min_range:
            raise ValueError("max_range must exceed min_range")
        return self

    @property
    def n_rays(self) -> int:
        return self.n_azimuth * self.n_elevation


class OdometryNoiseSpec(BaseModel):
    """Per-frame tangent noise on the true increment, also reported as its covariance."""

    rot_sigma: float = Field(0.002, ge=0.0, description="rad per frame")
    trans_sigma: float = Field(0.01, ge=0.0, description="m per frame")


class Waypoint(BaseModel):
    x: float
    y: float
    z: float = 1.2
    yaw: float = 0.0
    teleport: bool = Field(False, description="jump here in one frame instead of walking")


class TrajectorySpec(BaseModel):
    waypoints: list[Waypoint] = Field(min_length=1)
    step: float = Field(0.1, gt=0.0, description="m per frame")
    yaw_step: float = Field(0.05, gt=0.0, description="rad per frame")
    frame_period: float = Field(0.1, gt=0.0, description="s per frame")

    def segment_frames(self) -> list[int]:
        """Frames used to reach each waypoint from the previous one (first is 1)."""
        counts = [1]
        for prev, cur in zip(self.waypoints, self.waypoints[1:]):
            if cur.teleport:
                counts.append(1)
                continue
            dist = math.dist((prev.x, prev.y, prev.z), (cur.x, cur.y, cur.z))
            dyaw = abs(math.remainder(cur.yaw - prev.yaw, 2.0 * math.pi))
            counts.append(max(math.ceil(dist / self.step - 1e-9), math.ceil(dyaw / self.yaw_step - 1e-9), 1))
        return counts

    def n_frames(self) -> int:
        return sum(self.segment_frames())

    def waypoint_frames(self) -> list[int]:
        """Frame index at which each waypoint is reached."""
        out, total = [], -1
        for count in self.segment_frames():
            total += count
            out.append(total)
        return out


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    world: WorldSpec
    trajectory: TrajectorySpec
    occlusions: list[tuple[int, int]] = Field(default_factory=list, description="[start, end) frames")
    sensor: SensorSpec = Field(default_factory=SensorSpec)
    odometry: OdometryNoiseSpec = Field(default_factory=OdometryNoiseSpec)
    seed: int = Field(0, ge=0)

    @field_validator("occlusions")
    @classmethod
    def _ordered_windows(cls, value):
        for start, end in value:
            if start < 0 or end <= start:
                raise ValueError(f"occlusion window ({start}, {end}) is empty or negative")
        return sorted(value)

    @model_validator(mode="after")
    def _windows_inside(self):
        n = self.trajectory.n_frames()
        for start, end in self.occlusions:
            if end > n:
                raise ValueError(f"occlusion ({start}, {end}) exceeds trajectory length {n}")
        return self

    def is_occluded(self, frame: int) -> bool:
        return any(start <= frame < end for start, end in self.occlusions)


class EvalReport(BaseModel):
    n_frames: int
    skip: int = 0
    aligned: bool = False
    ate_rmse: float = Field(ge=0.0)
    ate_mean: float = Field(ge=0.0)
    ate_std: float = Field(ge=0.0)
    ate_median: float = Field(ge=0.0)
    ate_max: float = Field(ge=0.0)
    rot_rmse_deg: float = Field(ge=0.0)
    convergence_frame: Optional[int] = Field(None, description="None means never")
    recovery_frames: list[Optional[int]] = Field(default_factory=list)
    timings: dict[str, float] = Field(default_factory=dict, exclude=True)

    @property
    def converged(self) -> bool:
        return self.convergence_frame is not None

    @property
    def recovered(self) -> bool:
        return all(frames is not None for frames in self.recovery_frames)
