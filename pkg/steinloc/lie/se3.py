"""SE3 / SO3 algebra on rotation matrices.

Tangent vectors are 6-vectors ordered [omega; v] in [rad; m]. Perturbations
are always applied on the right, T * exp(xi).

The numba kernels below are shared by the scalar `Pose` API and by the batched
particle code, so a single particle and a batch of one go through the same
arithmetic.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange
from numpy.typing import NDArray
from scipy.spatial.transform import Rotation

Tangent = NDArray[np.float64]

TAYLOR_ANGLE = 1e-4
NEAR_PI = 1e-6
DRIFT_TOLERANCE = 1e-7


# 3x3 helpers, written out so they stay allocation-light inside prange loops.


@njit(cache=True)
def skew(v):
    """[v]x such that skew(v) @ p == cross(v, p)."""
    out = np.zeros((3, 3))
    out[0, 1] = -v[2]
    out[0, 2] = v[1]
    out[1, 0] = v[2]
    out[1, 2] = -v[0]
    out[2, 0] = -v[1]
    out[2, 1] = v[0]
    return out


@njit(cache=True)
def mat3_mul(a, b):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = a[i, 0] * b[0, j] + a[i, 1] * b[1, j] + a[i, 2] * b[2, j]
    return out


@njit(cache=True)
def mat3_tmul(a, b):
    """a.T @ b"""
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = a[0, i] * b[0, j] + a[1, i] * b[1, j] + a[2, i] * b[2, j]
    return out


@njit(cache=True)
def mat3_vec(a, v):
    out = np.empty(3)
    for i in range(3):
        out[i] = a[i, 0] * v[0] + a[i, 1] * v[1] + a[i, 2] * v[2]
    return out


@njit(cache=True)
def mat3_tvec(a, v):
    """a.T @ v"""
    out = np.empty(3)
    for i in range(3):
        out[i] = a[0, i] * v[0] + a[1, i] * v[1] + a[2, i] * v[2]
    return out


@njit(cache=True)
def _exp_coefficients(theta):
    """(sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3)"""
    t2 = theta * theta
    if theta < TAYLOR_ANGLE:
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    half = math.sin(0.5 * theta)
    return (
        math.sin(theta) / theta,
        2.0 * half * half / t2,
        (theta - math.sin(theta)) / (t2 * theta),
    )


@njit(cache=True)
def so3_exp(omega):
    theta = math.sqrt(omega[0] ** 2 + omega[1] ** 2 + omega[2] ** 2)
    a, b, _ = _exp_coefficients(theta)
    k = skew(omega)
    k2 = mat3_mul(k, k)
    out = np.eye(3)
    for i in range(3):
        for j in range(3):
            out[i, j] += a * k[i, j] + b * k2[i, j]
    return out


@njit(cache=True)
def se3_exp(xi):
    """Returns (R, t) of exp(xi)."""
    omega = xi[:3]
    theta = math.sqrt(omega[0] ** 2 + omega[1] ** 2 + omega[2] ** 2)
    a, b, c = _exp_coefficients(theta)
    k = skew(omega)
    k2 = mat3_mul(k, k)
    rot = np.eye(3)
    v_mat = np.eye(3)
    for i in range(3):
        for j in range(3):
            rot[i, j] += a * k[i, j] + b * k2[i, j]
            v_mat[i, j] += b * k[i, j] + c * k2[i, j]
    return rot, mat3_vec(v_mat, xi[3:])


@njit(cache=True)
def so3_log(rot):
    """Principal-branch rotation vector of `rot`.

    Near pi the axis comes from the column of (R + I) / 2 with the largest
    diagonal entry, signed to agree with the antisymmetric part when it is
    non-zero.
    """
    w0 = 0.5 * (rot[2, 1] - rot[1, 2])
    w1 = 0.5 * (rot[0, 2] - rot[2, 0])
    w2 = 0.5 * (rot[1, 0] - rot[0, 1])
    sin_t = math.sqrt(w0 * w0 + w1 * w1 + w2 * w2)
    cos_t = 0.5 * (rot[0, 0] + rot[1, 1] + rot[2, 2] - 1.0)
    theta = math.atan2(sin_t, cos_t)
    out = np.empty(3)
    if theta < TAYLOR_ANGLE:
        scale = 1.0 + theta * theta / 6.0
        out[0] = w0 * scale
        out[1] = w1 * scale
        out[2] = w2 * scale
        return out
    if theta < math.pi - NEAR_PI:
        scale = theta / sin_t
        out[0] = w0 * scale
        out[1] = w1 * scale
        out[2] = w2 * scale
        return out

    k = 0
    for i in range(1, 3):
        if rot[i, i] > rot[k, k]:
            k = i
    diag = 0.5 * (rot[k, k] + 1.0)
    denom = math.sqrt(max(diag, 1e-300))
    axis = np.empty(3)
    for i in range(3):
        sym = 0.5 * (0.5 * (rot[i, k] + rot[k, i]) + (1.0 if i == k else 0.0))
        axis[i] = sym / denom
    norm = math.sqrt(axis[0] ** 2 + axis[1] ** 2 + axis[2] ** 2)
    if axis[0] * w0 + axis[1] * w1 + axis[2] * w2 < 0.0:
        norm = -norm
    for i in range(3):
        out[i] = theta * axis[i] / norm
    return out


@njit(cache=True)
def se3_log(rot, trans):
    omega = so3_log(rot)
    theta = math.sqrt(omega[0] ** 2 + omega[1] ** 2 + omega[2] ** 2)
    if theta < TAYLOR_ANGLE:
        d = 1.0 / 12.0 + theta * theta / 720.0
    else:
        half = 0.5 * theta
        d = (1.0 - half * math.cos(half) / math.sin(half)) / (theta * theta)
    k = skew(omega)
    k2 = mat3_mul(k, k)
    v_inv = np.eye(3)
    for i in range(3):
        for j in range(3):
            v_inv[i, j] += -0.5 * k[i, j] + d * k2[i, j]
    out = np.empty(6)
    out[:3] = omega
    out[3:] = mat3_vec(v_inv, trans)
    return out


@njit(cache=True)
def relative_log(rot_a, trans_a, rot_b, trans_b):
    """log(a^-1 b)"""
    rot = mat3_tmul(rot_a, rot_b)
    diff = np.empty(3)
    for i in range(3):
        diff[i] = trans_b[i] - trans_a[i]
    return se3_log(rot, mat3_tvec(rot_a, diff))


@njit(cache=True)
def orthonormal_drift(rot):
    worst = 0.0
    for i in range(3):
        for j in range(3):
            dot = rot[0, i] * rot[0, j] + rot[1, i] * rot[1, j] + rot[2, i] * rot[2, j]
            if i == j:
                dot -= 1.0
            worst = max(worst, abs(dot))
    return worst


@njit(cache=True)
def orthonormalize(rot):
    """Nearest rotation matrix (polar projection), determinant +1."""
    u, _, vt = np.linalg.svd(rot)
    out = mat3_mul(u, vt)
    if np.linalg.det(out) < 0.0:
        for i in range(3):
            u[i, 2] = -u[i, 2]
        out = mat3_mul(u, vt)
    return out


@njit(cache=True)
def compose_rt(rot_a, trans_a, rot_b, trans_b):
    rot = mat3_mul(rot_a, rot_b)
    if orthonormal_drift(rot) > DRIFT_TOLERANCE:
        rot = orthonormalize(rot)
    trans = mat3_vec(rot_a, trans_b)
    for i in range(3):
        trans[i] += trans_a[i]
    return rot, trans


@njit(cache=True, parallel=True)
def right_update(rotations, translations, xis):
    """In place T_i <- T_i exp(xi_i) for every particle."""
    for i in prange(rotations.shape[0]):
        rot_d, trans_d = se3_exp(xis[i])
        rot, trans = compose_rt(rotations[i], translations[i], rot_d, trans_d)
        rotations[i] = rot
        translations[i] = trans


@njit(cache=True, parallel=True)
def right_compose(rotations, translations, rot_d, trans_d):
    """In place T_i <- T_i D for a shared transform D."""
    for i in prange(rotations.shape[0]):
        rot, trans = compose_rt(rotations[i], translations[i], rot_d, trans_d)
        rotations[i] = rot
        translations[i] = trans


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform p -> R p + t. Arrays are copied and frozen."""

    rotation: NDArray[np.float64]
    translation: NDArray[np.float64]

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=np.float64, order="C").reshape(3, 3)
        trans = np.array(self.translation, dtype=np.float64, order="C").reshape(3)
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: NDArray[np.float64]) -> "Pose":
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(matrix[:3, :3], matrix[:3, 3])

    @classmethod
    def from_quaternion(
        cls, translation: NDArray[np.float64], quat_xyzw: NDArray[np.float64]
    ) -> "Pose":
        """Build from a translation and an (x, y, z, w) quaternion, as in TUM files."""
        return cls(Rotation.from_quat(quat_xyzw).as_matrix(), translation)

    @property
    def matrix(self) -> NDArray[np.float64]:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    @property
    def quaternion(self) -> NDArray[np.float64]:
        """(x, y, z, w), w >= 0."""
        quat = Rotation.from_matrix(self.rotation).as_quat()
        return -quat if quat[3] < 0 else quat

    def compose(self, other: "Pose") -> "Pose":
        rot, trans = compose_rt(
            self.rotation, self.translation, other.rotation, other.translation
        )
        return Pose(rot, trans)

    def inverse(self) -> "Pose":
        rot_t = self.rotation.T
        return Pose(rot_t, -rot_t @ self.translation)

    def transform_point(self, point: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.rotation @ np.asarray(point, dtype=np.float64) + self.translation

    def transform_points(self, points: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def log(self) -> Tangent:
        return se3_log(
            np.ascontiguousarray(self.rotation), np.ascontiguousarray(self.translation)
        )

    def perturb(self, xi: Tangent) -> "Pose":
        """self * exp(xi)"""
        return self.compose(exp(xi))

    def __repr__(self) -> str:
        t = ", ".join(f"{v:.4f}" for v in self.translation)
        r = ", ".join(f"{v:.4f}" for v in so3_log(np.ascontiguousarray(self.rotation)))
        return f"Pose(t=[{t}], r=[{r}])"


def exp(xi: Tangent) -> Pose:
    rot, trans = se3_exp(np.asarray(xi, dtype=np.float64).reshape(6))
    return Pose(rot, trans)


def log(pose: Pose) -> Tangent:
    return pose.log()


def compose(a: Pose, b: Pose) -> Pose:
    return a.compose(b)


def inverse(a: Pose) -> Pose:
    return a.inverse()


def transform_point(a: Pose, point: NDArray[np.float64]) -> NDArray[np.float64]:
    return a.transform_point(point)


def rotation_angle(rot: NDArray[np.float64]) -> float:
    """Geodesic angle of a rotation matrix, in radians."""
    return float(np.linalg.norm(so3_log(np.ascontiguousarray(rot))))
