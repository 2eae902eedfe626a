import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numba import njit, prange
from numpy.typing import NDArray
from scipy.special import logsumexp

from steinloc.lie.se3 import Pose
from steinloc.localization.models import LOG_POST_FLOOR
from steinloc.localization.neighbors import NeighborGraph

if TYPE_CHECKING:
    from steinloc.localization.particles import ParticleSet

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class PosteriorState:
    """Per-particle log posterior, normalized to log-sum-exp 0."""

    log_post: NDArray[np.float64]
    n_smooth_iters: int = 10
    floor: float = LOG_POST_FLOOR

    @classmethod
    def uniform(cls, n_particles: int, n_smooth_iters: int = 10, floor: float = LOG_POST_FLOOR) -> "PosteriorState":
        return cls(np.full(n_particles, -np.log(n_particles)), n_smooth_iters, floor)

    def __len__(self) -> int:
        return len(self.log_post)

    def reset(self) -> None:
        self.log_post[:] = -np.log(len(self.log_post))

    def normalize(self) -> None:
        """Shift to log-sum-exp 0 with every value at or above the floor.

        Floored entries are pinned and only the remaining mass is rescaled, until
        no rescaled entry falls below the floor. A floor too high for the particle
        count leaves the posterior uniform.
        """
        self.log_post -= logsumexp(self.log_post)
        floored = self.log_post <= self.floor
        while floored.any():
            budget = -np.expm1(np.log(np.count_nonzero(floored)) + self.floor)
            if floored.all() or budget <= 0.0:
                logger.warning(f"Posterior floor {self.floor} is infeasible for {len(self)} particles, reset")
                self.reset()
                return
            self.log_post[floored] = self.floor
            free = ~floored
            self.log_post[free] += np.log(budget) - logsumexp(self.log_post[free])
            dropped = free & (self.log_post < self.floor)
            if not dropped.any():
                return
            floored |= dropped

    @property
    def probabilities(self) -> NDArray[np.float64]:
        return np.exp(self.log_post)


@njit(cache=True, parallel=True)
def _smooth_round(prob, indices, kernels, out):
    for i in prange(prob.shape[0]):
        num = 0.0
        den = 0.0
        for slot in range(indices.shape[1]):
            j = indices[i, slot]
            if j < 0:
                continue
            num += kernels[i, slot] * prob[j]
            den += kernels[i, slot]
        out[i] = num / den if den > 0.0 else prob[i]


def smooth_probabilities(
    prob: NDArray[np.float64], graph: NeighborGraph, iters: int
) -> NDArray[np.float64]:
    """Jacobi rounds of p'_i = sum_j k_ij p_j / sum_j k_ij, no renormalization."""
    if iters < 0:
        raise ValueError(f"iters must be non-negative, got {iters}")
    current = np.array(prob, dtype=np.float64)
    scratch = np.empty_like(current)
    for _ in range(iters):
        _smooth_round(current, graph.indices, graph.kernels, scratch)
        current, scratch = scratch, current
    return current


def bayes_update(
    post: PosteriorState,
    log_liks: NDArray[np.float64],
    n_matched: NDArray[np.int64],
    beta: float,
) -> bool:
    """Add the tempered per-point log-likelihood to the log posterior.

    Args:
        post (PosteriorState): updated in place.
        log_liks (NDArray): raw GICP log-likelihoods.
        n_matched (NDArray): matched scan points per particle.
        beta (float): temperature on the per-point average.

    Raises:
        ValueError: negative beta or mismatched lengths.

    Returns:
        bool: True when no particle matched anything and the posterior was reset
        to uniform.
    """
    if beta < 0.0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    if len(log_liks) != len(post) or len(n_matched) != len(post):
        raise ValueError("log_liks / n_matched do not match the particle count")
    n_matched = np.asarray(n_matched)
    if not np.any(n_matched > 0):
        logger.info("Observation rejected: no particle matched the scan, posterior reset")
        post.reset()
        return True
    post.log_post += beta * np.asarray(log_liks) / np.maximum(n_matched, 1)
    post.normalize()
    return False


def smooth(post: PosteriorState, graph: NeighborGraph, iters: int | None = None) -> None:
    """Kernel-weighted averaging of posteriors over the neighbor graph, then renormalize."""
    iters = post.n_smooth_iters if iters is None else iters
    if iters == 0:
        return
    prob = smooth_probabilities(post.probabilities, graph, iters)
    post.log_post[:] = np.log(prob)
    post.normalize()


def representative(post: PosteriorState, particles: "ParticleSet") -> tuple[Pose, float, int]:
    """Pose and log posterior of the most probable particle, lowest index on ties."""
    index = int(np.argmax(post.log_post))
    return particles.pose(index), float(post.log_post[index]), index
