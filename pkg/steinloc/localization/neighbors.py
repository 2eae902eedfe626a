"""Iterative K-neighbor particle search in SE3 with locality sensitive hashing.

Every pass draws a random reference frame and one random grid offset, hashes
each particle's scaled tangent coordinates in that frame, and offers every
co-bucket particle to each particle's neighbor list. Lists keep the K largest
kernel values seen so far and persist across frames.
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numba import njit, prange
from numpy.typing import NDArray
from scipy.spatial.transform import Rotation

from steinloc.lie.se3 import Pose, relative_log
from steinloc.localization.models import KernelParams, LshConfig, NeighborPassStats
from steinloc.localization.svgd import kernel_value
from steinloc.mapping.cloud import Bounds

if TYPE_CHECKING:
    from steinloc.localization.particles import ParticleSet

logger = logging.getLogger(__name__)

HASH_PRIMES = np.array(
    [73856093, 19349663, 83492791, 49979687, 39916801, 15485863], dtype=np.int64
)
FREE = -1


@njit(cache=True)
def _cell_hash(rot_f, trans_f, rot, trans, noise, scale, primes):
    """XOR of floor(zeta_c) * prime_c, wrapping in int64."""
    d = relative_log(rot_f, trans_f, rot, trans)
    h = np.int64(0)
    for c in range(6):
        cell = np.int64(math.floor(scale[c] * d[c] + noise[c]))
        h ^= cell * primes[c]
    return h


@njit(cache=True, parallel=True)
def _bucket_all(rot_f, trans_f, rotations, translations, noise, scale, primes, n_buckets, out):
    for i in prange(rotations.shape[0]):
        out[i] = _cell_hash(rot_f, trans_f, rotations[i], translations[i], noise, scale, primes) % n_buckets


@njit(cache=True, parallel=True)
def _gather(
    rotations, translations, indices, kernels, members, member_start, member_end,
    weights, refreshed_sum, refreshed_count,
):
    k_slots = indices.shape[1]
    for i in prange(rotations.shape[0]):
        row = indices[i]
        values = kernels[i]
        total = 0.0
        count = 0
        for slot in range(k_slots):
            j = row[slot]
            if j < 0:
                continue
            if j == i:
                values[slot] = 1.0
                continue
            values[slot] = kernel_value(
                rotations[i], translations[i], rotations[j], translations[j], weights
            )
            total += values[slot]
            count += 1
        refreshed_sum[i] = total
        refreshed_count[i] = count

        for m in range(member_start[i], member_end[i]):
            j = members[m]
            if j == i:
                continue
            present = False
            for slot in range(k_slots):
                if row[slot] == j:
                    present = True
                    break
            if present:
                continue
            k = kernel_value(rotations[i], translations[i], rotations[j], translations[j], weights)
            free = -1
            worst = -1
            worst_k = np.inf
            for slot in range(k_slots):
                if row[slot] < 0:
                    if free < 0:
                        free = slot
                elif row[slot] != i and values[slot] < worst_k:
                    worst_k = values[slot]
                    worst = slot
            if free >= 0:
                row[free] = j
                values[free] = k
            elif worst >= 0 and k > worst_k:
                row[worst] = j
                values[worst] = k


@dataclass(eq=False)
class NeighborGraph:
    """Fixed-capacity neighbor lists, row i of `indices` holds particle i's list.

    Slot 0 is the particle itself with kernel 1, free slots hold -1.
    """

    indices: NDArray[np.int32]
    kernels: NDArray[np.float64]

    @classmethod
    def self_only(cls, n_particles: int, k_neighbors: int) -> "NeighborGraph":
        indices = np.full((n_particles, k_neighbors), FREE, dtype=np.int32)
        indices[:, 0] = np.arange(n_particles, dtype=np.int32)
        kernels = np.zeros((n_particles, k_neighbors))
        kernels[:, 0] = 1.0
        return cls(indices, kernels)

    def __len__(self) -> int:
        return self.indices.shape[0]

    @property
    def capacity(self) -> int:
        return self.indices.shape[1]

    def neighbors_of(self, i: int) -> list[tuple[int, float]]:
        keep = self.indices[i] != FREE
        return list(zip(self.indices[i][keep].tolist(), self.kernels[i][keep].tolist()))


def random_lsh_frame(rng: np.random.Generator, bounds: Bounds) -> Pose:
    """Uniform rotation (normalized Gaussian quaternion) and uniform translation in bounds."""
    rotation = Rotation.random(random_state=rng).as_matrix()
    translation = rng.uniform(np.asarray(bounds.lo), np.asarray(bounds.hi))
    return Pose(rotation, translation)


def hash_scale(cfg: LshConfig, kp: KernelParams) -> NDArray[np.float64]:
    """alpha * diag(W), the tangent-to-grid scaling."""
    return cfg.alpha * kp.weights


def lsh_hash(
    pose: Pose, frame: Pose, noise: NDArray[np.float64], cfg: LshConfig, kp: KernelParams
) -> int:
    """Hash of floor(alpha W log(frame^-1 pose) + noise); reduce modulo the bucket count.

    Args:
        pose (Pose): particle pose.
        frame (Pose): random reference frame of the pass.
        noise (NDArray): (6,) grid offset of the pass, in cells.
        cfg (LshConfig): LSH configuration.
        kp (KernelParams): kernel weights.

    Returns:
        int: signed 64-bit hash.
    """
    return int(
        _cell_hash(
            frame.rotation, frame.translation, pose.rotation, pose.translation,
            np.asarray(noise, dtype=np.float64), hash_scale(cfg, kp), HASH_PRIMES,
        )
    )


def _claim_buckets(
    buckets: NDArray[np.int64], capacity: int, rng: np.random.Generator
) -> tuple[NDArray[np.int32], NDArray[np.int64], NDArray[np.int64], int]:
    """Bucket members in a random claim order, at most `capacity` per bucket.

    Returns:
        tuple: members (M,), per-particle [start, end) into members, overflow count.
    """
    n = len(buckets)
    order = rng.permutation(n)
    claim = order[np.argsort(buckets[order], kind="stable")]
    claim_buckets = buckets[claim]
    rank = np.arange(n) - np.searchsorted(claim_buckets, claim_buckets, side="left")
    kept = rank < capacity
    members = claim[kept].astype(np.int32)
    member_buckets = claim_buckets[kept]

    start = np.searchsorted(member_buckets, buckets, side="left")
    end = np.searchsorted(member_buckets, buckets, side="right")
    dropped = claim[~kept]
    start[dropped] = 0
    end[dropped] = 0
    return members, start, end, int(np.count_nonzero(~kept))


def update_neighbors(
    particles: "ParticleSet",
    graph: NeighborGraph,
    cfg: LshConfig,
    kp: KernelParams,
    rng: np.random.Generator,
    bounds: Bounds | None = None,
) -> NeighborPassStats:
    """One pass of the iterative neighbor search, updating `graph` in place.

    Args:
        particles (ParticleSet): current particle poses.
        graph (NeighborGraph): lists to refresh and extend.
        cfg (LshConfig): LSH configuration.
        kp (KernelParams): kernel weights.
        rng (np.random.Generator): stream for the frame, offset and claim order.
        bounds (Bounds, optional): region the random frame origin is drawn from.
            Defaults to the bounding box of the particle translations.

    Returns:
        NeighborPassStats: bucket occupancy, overflow and mean refreshed kernel.
    """
    rotations, translations = particles.rotations, particles.translations
    n = len(rotations)
    if len(graph) != n:
        raise ValueError(f"graph has {len(graph)} lists for {n} particles")
    n_buckets = cfg.buckets_for(n)
    if bounds is None:
        bounds = Bounds.of(translations)
    frame = random_lsh_frame(rng, bounds)
    noise = rng.normal(0.0, np.asarray(cfg.noise_sigma))

    buckets = np.empty(n, dtype=np.int64)
    _bucket_all(
        frame.rotation, frame.translation, rotations, translations, noise,
        hash_scale(cfg, kp), HASH_PRIMES, n_buckets, buckets,
    )
    members, start, end, overflow = _claim_buckets(buckets, cfg.bucket_capacity, rng)

    refreshed_sum = np.zeros(n)
    refreshed_count = np.zeros(n, dtype=np.int64)
    _gather(
        rotations, translations, graph.indices, graph.kernels, members, start, end,
        kp.weights, refreshed_sum, refreshed_count,
    )
    n_refreshed = int(refreshed_count.sum())
    stats = NeighborPassStats(
        n_buckets=n_buckets,
        occupancy=np.bincount(np.bincount(buckets, minlength=n_buckets)).tolist(),
        overflow=overflow,
        mean_kernel=float(refreshed_sum.sum() / n_refreshed) if n_refreshed else 0.0,
    )
    logger.debug(
        f"Neighbor pass: buckets={n_buckets} overflow={overflow} "
        f"max occupancy={len(stats.occupancy) - 1} mean kernel={stats.mean_kernel:.4f}"
    )
    return stats
