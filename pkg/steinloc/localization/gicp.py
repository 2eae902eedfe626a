"""GICP distribution-to-distribution likelihood and its Gauss-Newton system.

For a scan point mu_s matched to map point mu_m under pose T = (R, t):

    e     = mu_m - T mu_s
    Omega = (Sigma_m + R Sigma_s R^T)^-1
    J     = [R [mu_s]x | -R]          (right perturbation, [omega; v])

The kernels accumulate everything in the body frame, e' = R^T e,
Omega' = (R^T Sigma_m R + Sigma_s)^-1 and J' = [[mu_s]x | -I], which gives the
same H, b and cost without forming R-dependent Jacobians.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from numpy.typing import NDArray
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt

from steinloc.lie.se3 import Pose, Tangent, skew
from steinloc.localization.models import LOG_LIK_SENTINEL, FilterConfig
from steinloc.mapping.cloud import GaussianCloud
from steinloc.mapping.model import MapModel
from steinloc.mapping.nnf import NearestNeighborField, lookup_index

logger = logging.getLogger(__name__)

DAMPING_RETRIES = 3


@dataclass(frozen=True, eq=False)
class GnSystem:
    hessian: NDArray[np.float64]
    gradient: NDArray[np.float64]
    log_lik: float
    n_matched: int

    @property
    def cost(self) -> float:
        return 0.0 if self.n_matched == 0 else -self.log_lik


@njit(cache=True)
def _inv3(a, out):
    """Inverse of a symmetric 3x3 matrix into `out`; False unless det > 0."""
    c00 = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    c01 = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    c02 = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    det = a[0, 0] * c00 + a[0, 1] * c01 + a[0, 2] * c02
    if not det > 0.0:
        return False
    inv_det = 1.0 / det
    out[0, 0] = c00 * inv_det
    out[1, 0] = c01 * inv_det
    out[2, 0] = c02 * inv_det
    out[0, 1] = (a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]) * inv_det
    out[1, 1] = (a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]) * inv_det
    out[2, 1] = (a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]) * inv_det
    out[0, 2] = (a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]) * inv_det
    out[1, 2] = (a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]) * inv_det
    out[2, 2] = (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) * inv_det
    return True


@njit(cache=True)
def accumulate_system(
    rot, trans, scan_means, scan_covs, map_means, map_covs, cells, origin, resolution, hess, grad
):
    """Fill hess (6, 6) and grad (6,) for one pose; returns (cost, n_matched)."""
    for r in range(6):
        grad[r] = 0.0
        for c in range(6):
            hess[r, c] = 0.0
    q = np.empty(3)
    e = np.empty(3)
    eb = np.empty(3)
    cov = np.empty((3, 3))
    omega = np.empty((3, 3))
    oe = np.empty(3)
    oj = np.empty((3, 6))
    jac = np.zeros((3, 6))
    for a in range(3):
        jac[a, 3 + a] = -1.0

    cost = 0.0
    n_matched = 0
    for k in range(scan_means.shape[0]):
        p = scan_means[k]
        for r in range(3):
            q[r] = rot[r, 0] * p[0] + rot[r, 1] * p[1] + rot[r, 2] * p[2] + trans[r]
        idx = lookup_index(cells, origin, resolution, q[0], q[1], q[2])
        if idx < 0:
            continue
        m = map_means[idx]
        for r in range(3):
            e[r] = m[r] - q[r]
        for r in range(3):
            eb[r] = rot[0, r] * e[0] + rot[1, r] * e[1] + rot[2, r] * e[2]
        sm = map_covs[idx]
        for a in range(3):
            for b in range(3):
                s = 0.0
                for u in range(3):
                    ru = rot[u, a]
                    for v in range(3):
                        s += ru * sm[u, v] * rot[v, b]
                cov[a, b] = s + scan_covs[k, a, b]
        if not _inv3(cov, omega):
            continue

        jac[0, 1] = -p[2]
        jac[0, 2] = p[1]
        jac[1, 0] = p[2]
        jac[1, 2] = -p[0]
        jac[2, 0] = -p[1]
        jac[2, 1] = p[0]

        for a in range(3):
            oe[a] = omega[a, 0] * eb[0] + omega[a, 1] * eb[1] + omega[a, 2] * eb[2]
            for c in range(6):
                oj[a, c] = omega[a, 0] * jac[0, c] + omega[a, 1] * jac[1, c] + omega[a, 2] * jac[2, c]
        for r in range(6):
            grad[r] += jac[0, r] * oe[0] + jac[1, r] * oe[1] + jac[2, r] * oe[2]
            for c in range(r, 6):
                hess[r, c] += jac[0, r] * oj[0, c] + jac[1, r] * oj[1, c] + jac[2, r] * oj[2, c]
        cost += eb[0] * oe[0] + eb[1] * oe[1] + eb[2] * oe[2]
        n_matched += 1

    for r in range(6):
        for c in range(r + 1, 6):
            hess[c, r] = hess[r, c]
    return cost, n_matched


@njit(cache=True)
def _cholesky_solve6(a, rhs, out):
    """Solve a x = rhs for SPD 6x6 `a`; False when a pivot is not positive."""
    low = np.zeros((6, 6))
    for j in range(6):
        s = a[j, j]
        for k in range(j):
            s -= low[j, k] * low[j, k]
        if not s > 0.0:
            return False
        low[j, j] = math.sqrt(s)
        for i in range(j + 1, 6):
            s = a[i, j]
            for k in range(j):
                s -= low[i, k] * low[j, k]
            low[i, j] = s / low[j, j]
    y = np.empty(6)
    for i in range(6):
        s = rhs[i]
        for k in range(i):
            s -= low[i, k] * y[k]
        y[i] = s / low[i, i]
    for i in range(5, -1, -1):
        s = y[i]
        for k in range(i + 1, 6):
            s -= low[k, i] * out[k]
        out[i] = s / low[i, i]
    return True


@njit(cache=True)
def damped_step(hess, grad, damping, omega_max, v_max, out):
    """psi = -(H + lambda I)^-1 b clamped, lambda = damping * trace(H) / 6.

    Lambda doubles on a failed factorization, at most three times, after which
    the step is zero and False is returned.
    """
    for r in range(6):
        out[r] = 0.0
    nonzero = False
    for r in range(6):
        if grad[r] != 0.0:
            nonzero = True
    if not nonzero:
        return True
    trace = 0.0
    for r in range(6):
        trace += hess[r, r]
    lam = damping * trace / 6.0
    a = hess.copy()
    for attempt in range(4):
        for r in range(6):
            a[r, r] = hess[r, r] + lam * 2.0**attempt
        if _cholesky_solve6(a, grad, out):
            for r in range(3):
                out[r] = min(max(-out[r], -omega_max), omega_max)
            for r in range(3, 6):
                out[r] = min(max(-out[r], -v_max), v_max)
            return True
    for r in range(6):
        out[r] = 0.0
    return False


@njit(cache=True, parallel=True)
def _evaluate_batch(
    rotations, translations, scan_means, scan_covs, map_means, map_covs, cells, origin,
    resolution, sentinel, damping, omega_max, v_max, steps, log_liks, n_matched, solved,
):
    for i in prange(rotations.shape[0]):
        hess = np.empty((6, 6))
        grad = np.empty(6)
        cost, n = accumulate_system(
            rotations[i], translations[i], scan_means, scan_covs, map_means, map_covs,
            cells, origin, resolution, hess, grad,
        )
        n_matched[i] = n
        if n == 0:
            log_liks[i] = sentinel
            for r in range(6):
                steps[i, r] = 0.0
            solved[i] = True
        else:
            log_liks[i] = -cost
            solved[i] = damped_step(hess, grad, damping, omega_max, v_max, steps[i])


def residual(map_mu: NDArray[np.float64], scan_mu: NDArray[np.float64], pose: Pose) -> NDArray[np.float64]:
    """e = mu_m - T mu_s"""
    return np.asarray(map_mu, dtype=np.float64) - pose.transform_point(scan_mu)


def residual_jacobian(scan_mu: NDArray[np.float64], pose: Pose) -> NDArray[np.float64]:
    """d e(T exp(xi)) / d xi at xi = 0, shape (3, 6)."""
    rot = pose.rotation
    return np.hstack([rot @ skew(np.asarray(scan_mu, dtype=np.float64)), -rot])


def default_damping(hessian: NDArray[np.float64], scale: float = 1e-3) -> float:
    return scale * float(np.trace(hessian)) / 6.0


def evaluate(
    cloud: GaussianCloud,
    field: NearestNeighborField,
    scan: GaussianCloud,
    pose: Pose,
    sentinel: float = LOG_LIK_SENTINEL,
) -> GnSystem:
    """Gauss-Newton system of the GICP cost for one pose.

    Args:
        cloud (GaussianCloud): map Gaussians.
        field (NearestNeighborField): map correspondence lookup.
        scan (GaussianCloud): scan Gaussians in the sensor frame.
        pose (Pose): sensor pose in the map frame.
        sentinel (float, optional): log_lik reported when nothing matches.

    Returns:
        GnSystem: H, b, log_lik = -sum e^T Omega e and the matched point count.
    """
    hess = np.empty((6, 6))
    grad = np.empty(6)
    if scan.is_empty:
        return GnSystem(np.zeros((6, 6)), np.zeros(6), sentinel, 0)
    cost, n_matched = accumulate_system(
        np.ascontiguousarray(pose.rotation),
        np.ascontiguousarray(pose.translation),
        scan.means,
        scan.covariances,
        cloud.means,
        cloud.covariances,
        field.cells,
        field.origin,
        field.resolution,
        hess,
        grad,
    )
    if n_matched == 0:
        return GnSystem(hess, grad, sentinel, 0)
    return GnSystem(hess, grad, -cost, int(n_matched))


def evaluate_model(map_model: MapModel, scan: GaussianCloud, pose: Pose, sentinel: float = LOG_LIK_SENTINEL) -> GnSystem:
    return evaluate(map_model.cloud, map_model.field, scan, pose, sentinel)


def solve_step(
    system: GnSystem, lam: float, omega_max: float = 0.5, v_max: float = 1.0
) -> Tangent:
    """Damped Gauss-Newton displacement psi = -(H + lam I)^-1 b, clamped per component.

    Args:
        system (GnSystem): linearized system.
        lam (float): damping, doubled on each failed Cholesky factorization.
        omega_max (float, optional): rotation clamp in rad. Defaults to 0.5.
        v_max (float, optional): translation clamp in m. Defaults to 1.0.

    Raises:
        ValueError: negative damping.

    Returns:
        Tangent: the step, applied as T exp(psi). Zero if the system stays
        indefinite after three doublings.
    """
    if lam < 0.0:
        raise ValueError(f"damping must be non-negative, got {lam}")
    if not np.any(system.gradient):
        return np.zeros(6)
    eye = np.eye(6)
    try:
        for attempt in Retrying(
            stop=stop_after_attempt(DAMPING_RETRIES + 1),
            retry=retry_if_exception_type(np.linalg.LinAlgError),
        ):
            with attempt:
                damping = lam * 2.0 ** (attempt.retry_state.attempt_number - 1)
                low = np.linalg.cholesky(system.hessian + damping * eye)
    except RetryError:
        logger.warning(f"H + lambda I not positive definite after {DAMPING_RETRIES} doublings of {lam}")
        return np.zeros(6)
    step = -np.linalg.solve(low.T, np.linalg.solve(low, system.gradient))
    step[:3] = np.clip(step[:3], -omega_max, omega_max)
    step[3:] = np.clip(step[3:], -v_max, v_max)
    return step


def evaluate_particles(
    rotations: NDArray[np.float64],
    translations: NDArray[np.float64],
    map_model: MapModel,
    scan: GaussianCloud,
    cfg: FilterConfig,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.int64]]:
    """Likelihood and clamped Gauss-Newton step of every particle in one pass.

    Returns:
        tuple: steps (N, 6), log_liks (N,), n_matched (N,).
    """
    n = rotations.shape[0]
    steps = np.zeros((n, 6))
    log_liks = np.full(n, cfg.log_lik_sentinel)
    n_matched = np.zeros(n, dtype=np.int64)
    solved = np.ones(n, dtype=np.bool_)
    if scan.is_empty:
        return steps, log_liks, n_matched
    field = map_model.field
    _evaluate_batch(
        rotations, translations, scan.means, scan.covariances, map_model.cloud.means,
        map_model.cloud.covariances, field.cells, field.origin, field.resolution,
        cfg.log_lik_sentinel, cfg.damping, cfg.omega_max, cfg.v_max,
        steps, log_liks, n_matched, solved,
    )
    failed = int(n - np.count_nonzero(solved))
    if failed:
        logger.warning(f"{failed} particles kept a zero step after damping retries")
    return steps, log_liks, n_matched
