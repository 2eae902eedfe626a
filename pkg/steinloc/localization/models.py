from typing import Literal, Optional

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from steinloc.helper.miscellaneous import next_prime
from steinloc.lie.se3 import Pose

PROFILES: dict[str, dict[str, float]] = {
    "indoor": {"nnf_resolution": 0.1, "max_query_dist": 1.0},
    "outdoor": {"nnf_resolution": 0.2, "max_query_dist": 2.0},
}

LOG_LIK_SENTINEL = -1.0e6
LOG_POST_FLOOR = -80.0


class KernelParams(BaseModel):
    """Weights of the SE3 kernel k = exp(-d^T W d), W = diag(sr, sr, sr, st, st, st)."""

    model_config = ConfigDict(frozen=True)

    sigma_r: float = Field(5.0, gt=0.0, description="rad^-1")
    sigma_t: float = Field(2.5, gt=0.0, description="m^-1")

    @property
    def weights(self) -> NDArray[np.float64]:
        return np.array([self.sigma_r] * 3 + [self.sigma_t] * 3)


class LshConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(0.125, gt=0.0)
    noise_sigma: tuple[float, float, float, float, float, float] = (0.5,) * 6
    n_buckets: Optional[int] = Field(None, ge=1)
    bucket_capacity: int = Field(64, ge=1)
    k_neighbors: int = Field(20, ge=1)

    @field_validator("noise_sigma")
    @classmethod
    def _non_negative(cls, value):
        if any(v < 0.0 for v in value):
            raise ValueError(f"noise_sigma must be non-negative, got {value}")
        return value

    def buckets_for(self, n_particles: int) -> int:
        """Configured bucket count, or the next prime >= 2 * n_particles."""
        return self.n_buckets if self.n_buckets is not None else next_prime(2 * n_particles)


class FilterConfig(BaseModel):
    """Flat filter configuration, the keys of the `key = value` config file.

    `nnf_resolution` and `max_query_dist` default to the selected profile.
    Unknown keys are rejected.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_particles: int = Field(10_000, ge=1)
    profile: Literal["indoor", "outdoor"] = "indoor"
    full_rotation: bool = True
    seed: int = Field(0, ge=0)

    sigma_r: float = Field(5.0, gt=0.0)
    sigma_t: float = Field(2.5, gt=0.0)

    k_neighbors: int = Field(20, ge=1)
    lsh_alpha: float = Field(0.125, gt=0.0)
    lsh_noise_sigma: float = Field(0.5, ge=0.0)
    lsh_n_buckets: Optional[int] = Field(None, ge=1)
    lsh_bucket_capacity: int = Field(64, ge=1)

    nnf_resolution: float = Field(None, gt=0.0)
    max_query_dist: float = Field(None, gt=0.0)
    nnf_padding: Optional[float] = Field(None, ge=0.0)

    n_scan_max: int = Field(1000, ge=5)
    scan_voxel: float = Field(0.1, gt=0.0)
    cov_k: int = Field(10, ge=4)
    eps_plane: float = Field(1e-3, gt=0.0, le=1.0)

    smooth_iters: int = Field(10, ge=0)
    beta: float = Field(2.0, ge=0.0)
    n_svgd_iters: int = Field(1, ge=1)
    omega_max: float = Field(0.5, gt=0.0)
    v_max: float = Field(1.0, gt=0.0)
    damping: float = Field(1e-3, ge=0.0, description="lambda = damping * trace(H) / 6")
    log_lik_sentinel: float = Field(LOG_LIK_SENTINEL, lt=0.0)
    log_post_floor: float = Field(LOG_POST_FLOOR, lt=0.0)

    diffusion_rot_sigma: float = Field(0.02, ge=0.0)
    diffusion_trans_sigma: float = Field(0.5, ge=0.0)

    @model_validator(mode="before")
    @classmethod
    def _profile_defaults(cls, data):
        if not isinstance(data, dict):
            return data
        defaults = PROFILES.get(data.get("profile", "indoor"), PROFILES["indoor"])
        for key, value in defaults.items():
            if data.get(key) is None:
                data = {**data, key: value}
        return data

    @property
    def kernel(self) -> KernelParams:
        return KernelParams(sigma_r=self.sigma_r, sigma_t=self.sigma_t)

    @property
    def lsh(self) -> LshConfig:
        return LshConfig(
            alpha=self.lsh_alpha,
            noise_sigma=(self.lsh_noise_sigma,) * 6,
            n_buckets=self.lsh_n_buckets,
            bucket_capacity=self.lsh_bucket_capacity,
            k_neighbors=self.k_neighbors,
        )

    @property
    def padding(self) -> float:
        return self.max_query_dist if self.nnf_padding is None else self.nnf_padding

    @property
    def diffusion_cov(self) -> NDArray[np.float64]:
        return np.diag(
            [self.diffusion_rot_sigma**2] * 3 + [self.diffusion_trans_sigma**2] * 3
        )


class OdometryInput(BaseModel):
    """Motion increment between two frames with its tangent-space covariance."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    delta: Pose = Field(default_factory=Pose.identity)
    cov: NDArray[np.float64] = Field(default_factory=lambda: np.zeros((6, 6)))
    valid: bool = True

    @field_validator("cov", mode="before")
    @classmethod
    def _psd(cls, value):
        cov = np.asarray(value, dtype=np.float64)
        if cov.shape != (6, 6):
            raise ValueError(f"odometry covariance must be 6x6, got {cov.shape}")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("odometry covariance is not symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-9:
            raise ValueError("odometry covariance is not positive semi-definite")
        return cov

    @classmethod
    def blocked(cls) -> "OdometryInput":
        return cls(valid=False)


class NeighborPassStats(BaseModel):
    n_buckets: int
    occupancy: list[int] = Field(description="occupancy[c] = number of buckets holding c particles")
    overflow: int = 0
    mean_kernel: float = 0.0


class FrameResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    frame: int
    pose: Pose
    log_post: float
    index: int
    n_scan: int
    n_matched_mean: float = 0.0
    empty_scan: bool = False
    observation_rejected: bool = False
    neighbor_stats: Optional[NeighborPassStats] = None
    timings: dict[str, float] = Field(default_factory=dict)
