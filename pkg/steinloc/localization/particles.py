from dataclasses import dataclass

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.spatial.transform import Rotation

from steinloc.lie.se3 import Pose
from steinloc.localization.neighbors import NeighborGraph
from steinloc.localization.posterior import PosteriorState

SNAPSHOT_COLUMNS = ["idx", "tx", "ty", "tz", "qx", "qy", "qz", "qw", "log_post"]


@dataclass(eq=False)
class ParticleSet:
    """Structure of arrays: rotations (N, 3, 3), translations (N, 3), posteriors and lists."""

    rotations: NDArray[np.float64]
    translations: NDArray[np.float64]
    posterior: PosteriorState
    graph: NeighborGraph

    @classmethod
    def from_poses(
        cls, rotations: NDArray[np.float64], translations: NDArray[np.float64], k_neighbors: int = 20, n_smooth_iters: int = 10
    ) -> "ParticleSet":
        rotations = np.ascontiguousarray(rotations, dtype=np.float64).reshape(-1, 3, 3)
        translations = np.ascontiguousarray(translations, dtype=np.float64).reshape(-1, 3)
        if len(rotations) != len(translations) or len(rotations) == 0:
            raise ValueError(f"{len(rotations)} rotations / {len(translations)} translations")
        n = len(rotations)
        return cls(
            rotations,
            translations,
            PosteriorState.uniform(n, n_smooth_iters),
            NeighborGraph.self_only(n, k_neighbors),
        )

    def __len__(self) -> int:
        return len(self.rotations)

    def pose(self, index: int) -> Pose:
        return Pose(self.rotations[index], self.translations[index])

    def poses(self) -> list[Pose]:
        return [self.pose(i) for i in range(len(self))]

    def quaternions(self) -> NDArray[np.float64]:
        """(N, 4) xyzw quaternions with w >= 0."""
        quat = Rotation.from_matrix(self.rotations).as_quat()
        quat[quat[:, 3] < 0] *= -1.0
        return quat

    def snapshot(self) -> pd.DataFrame:
        """One row per particle: idx tx ty tz qx qy qz qw log_post."""
        table = pd.DataFrame(
            np.column_stack([self.translations, self.quaternions(), self.posterior.log_post]),
            columns=SNAPSHOT_COLUMNS[1:],
        )
        table.insert(0, "idx", np.arange(len(self)))
        return table
