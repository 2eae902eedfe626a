"""Gauss-Newton Stein variational update over the particle neighbor graph.

Each particle moves by

    phi_i = sum_j (k_ij psi_j + grad_j k_ij) / sum_j k_ij

over its neighbor list (itself included), with k_ij = exp(-d^T W d) and
d = log(T_i^-1 T_j). The gradient term is taken in the normal-coordinate chart
centred at particle i, where it is exactly -2 k W d and pushes i away from j.
"""

import math

import numpy as np
from numba import njit, prange
from numpy.typing import NDArray

from steinloc.lie.se3 import Pose, Tangent, relative_log, right_update
from steinloc.localization.models import KernelParams


@njit(cache=True)
def kernel_value(rot_a, trans_a, rot_b, trans_b, weights):
    d = relative_log(rot_a, trans_a, rot_b, trans_b)
    q = 0.0
    for r in range(6):
        q += weights[r] * d[r] * d[r]
    return math.exp(-q)


@njit(cache=True)
def _phi_one(i, steps, rotations, translations, neighbors, weights, out):
    for r in range(6):
        out[r] = steps[i, r]
    total = 1.0
    for slot in range(neighbors.shape[0]):
        j = neighbors[slot]
        if j < 0 or j == i:
            continue
        d = relative_log(rotations[i], translations[i], rotations[j], translations[j])
        q = 0.0
        for r in range(6):
            q += weights[r] * d[r] * d[r]
        k = math.exp(-q)
        for r in range(6):
            out[r] += k * steps[j, r] - 2.0 * k * weights[r] * d[r]
        total += k
    for r in range(6):
        out[r] /= total


@njit(cache=True, parallel=True)
def _phi_all(steps, rotations, translations, neighbors, weights, phis):
    for i in prange(rotations.shape[0]):
        _phi_one(i, steps, rotations, translations, neighbors[i], weights, phis[i])


def kernel(a: Pose, b: Pose, kp: KernelParams) -> float:
    """k(a, b) = exp(-d^T W d), d = log(a^-1 b), in (0, 1]."""
    return float(
        kernel_value(a.rotation, a.translation, b.rotation, b.translation, kp.weights)
    )


def kernel_grad(a: Pose, b: Pose, kp: KernelParams) -> Tangent:
    """Gradient of k(a, b) with respect to b = a exp(d), taken in d."""
    d = relative_log(a.rotation, a.translation, b.rotation, b.translation)
    weights = kp.weights
    return -2.0 * kernel(a, b, kp) * weights * d


def compute_phi(
    i: int,
    steps: NDArray[np.float64],
    rotations: NDArray[np.float64],
    translations: NDArray[np.float64],
    neighbors: NDArray[np.int32],
    kp: KernelParams,
) -> Tangent:
    """Update direction of particle `i` from its neighbor list.

    Args:
        i (int): particle index.
        steps (NDArray): (N, 6) Gauss-Newton steps of every particle.
        rotations (NDArray): (N, 3, 3) particle rotations.
        translations (NDArray): (N, 3) particle translations.
        neighbors (NDArray): neighbor indices of `i`, -1 marks a free slot.
            The particle itself is always counted, with kernel 1.
        kp (KernelParams): kernel weights.

    Returns:
        Tangent: phi_i.
    """
    out = np.empty(6)
    _phi_one(
        int(i), steps, rotations, translations,
        np.asarray(neighbors, dtype=np.int32), kp.weights, out,
    )
    return out


def compute_phis(
    steps: NDArray[np.float64],
    rotations: NDArray[np.float64],
    translations: NDArray[np.float64],
    neighbors: NDArray[np.int32],
    kp: KernelParams,
) -> NDArray[np.float64]:
    """compute_phi for every particle, reading one frozen snapshot of the poses."""
    phis = np.empty_like(steps)
    _phi_all(steps, rotations, translations, neighbors, kp.weights, phis)
    return phis


def apply_updates(
    rotations: NDArray[np.float64],
    translations: NDArray[np.float64],
    phis: NDArray[np.float64],
) -> None:
    """In place T_i <- T_i exp(phi_i)."""
    if len(phis) != len(rotations):
        raise ValueError(f"{len(phis)} updates for {len(rotations)} particles")
    right_update(rotations, translations, np.ascontiguousarray(phis, dtype=np.float64))
