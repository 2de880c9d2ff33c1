"""Rigid-motion primitives: quaternions, rotation matrices, poses, point clouds.

Conventions used everywhere in this package: quaternions are stored in
``(w, x, y, z)`` order and canonicalized to ``w >= 0`` after normalization;
angles are radians; lengths are meters.  Functions on quaternions and poses
accept either plain arrays or :class:`rede_core.diff.Dual` values so the same
code serves primal and derivative evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diff
from .diff import Dual, value

__all__ = [
    "Pose",
    "PointCloud",
    "normalize_quat",
    "quat_to_rotmat",
    "rotmat_to_quat",
    "quat_multiply",
    "apply_pose",
    "rotate_vectors",
    "compose_pose",
    "invert_pose",
    "geodesic_angle",
    "random_pose",
    "cloud_diameter",
]


@dataclass(frozen=True)
class Pose:
    """Rigid transform: unit quaternion ``quat`` (w, x, y, z) plus translation ``t``."""

    quat: object
    t: object

    def __post_init__(self):
        if not diff.is_dual(self.quat):
            object.__setattr__(self, "quat", np.asarray(self.quat, dtype=np.float64))
        if not diff.is_dual(self.t):
            object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(quat=np.array([1.0, 0.0, 0.0, 0.0]), t=np.zeros(3))

    @classmethod
    def from_vector(cls, v) -> "Pose":
        v = np.asarray(v, dtype=np.float64).reshape(7)
        return cls(quat=normalize_quat(v[:4]), t=v[4:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([value(self.quat), value(self.t)])

    def primal(self) -> "Pose":
        return Pose(quat=value(self.quat), t=value(self.t))


@dataclass(frozen=True)
class PointCloud:
    """Ordered 3D points in meters with an optional cached diameter."""

    points: np.ndarray
    diameter: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise ValueError(f"points must be a nonempty (N, 3) array, got shape {pts.shape}")
        object.__setattr__(self, "points", pts)

    def with_diameter(self) -> "PointCloud":
        if self.diameter is not None:
            return self
        return PointCloud(self.points, cloud_diameter(self.points))

    def __len__(self) -> int:
        return self.points.shape[0]


def normalize_quat(q):
    """Scale to unit norm and flip to the ``w >= 0`` hemisphere."""
    n = diff.norm(q, axis=-1)
    if np.any(value(n) < 1e-12):
        raise ValueError("cannot normalize a zero-norm quaternion")
    unit = q / n[..., None]
    sign = np.where(np.asarray(value(unit))[..., 0] < 0.0, -1.0, 1.0)
    return unit * sign[..., None]


def quat_to_rotmat(q):
    """Rotation matrix of ``q / ||q||``; raises on zero-norm input."""
    n = diff.norm(q, axis=-1)
    nv = np.asarray(value(n))
    if not np.all(np.isfinite(nv)) or np.any(nv < 1e-12):
        raise ValueError("quaternion must be finite with positive norm")
    q = q / n[..., None]
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    r0 = diff.stack(
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        axis=-1,
    )
    r1 = diff.stack(
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        axis=-1,
    )
    r2 = diff.stack(
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        axis=-1,
    )
    return diff.stack([r0, r1, r2], axis=-2)


def _check_rotation(R: np.ndarray, tol: float) -> None:
    gram = R @ np.swapaxes(R, -1, -2)
    eye = np.eye(3)
    if np.max(np.abs(gram - eye)) > tol or np.max(np.abs(np.linalg.det(R) - 1.0)) > tol:
        raise ValueError("input is not a rotation matrix within tolerance")


def rotmat_to_quat(R, tol: float = 1e-6):
    """Unit quaternion (w >= 0) of a rotation matrix, batched over leading axes.

    Uses largest-diagonal branch selection, which stays well conditioned near
    180-degree rotations.  Accepts Dual input; the branch is chosen on the
    primal part.
    """
    Rv = value(R)
    if Rv.shape[-2:] != (3, 3):
        raise ValueError(f"expected (..., 3, 3) rotation matrices, got {Rv.shape}")
    _check_rotation(Rv.reshape(-1, 3, 3), tol)

    single = Rv.ndim == 2
    if single:
        R = R[None] if diff.is_dual(R) else Rv[None]
        Rv = value(R)

    r00, r11, r22 = Rv[..., 0, 0], Rv[..., 1, 1], Rv[..., 2, 2]
    trace = r00 + r11 + r22
    branch = np.argmax(np.stack([trace, r00, r11, r22], axis=-1), axis=-1)

    flat = R.reshape(-1, 3, 3) if diff.is_dual(R) else Rv.reshape(-1, 3, 3)
    branch = branch.reshape(-1)
    pieces = []
    orders = []
    for b in range(4):
        idx = np.nonzero(branch == b)[0]
        if idx.size == 0:
            continue
        M = flat[idx]
        if b == 0:
            s = np.sqrt(1.0 + M[:, 0, 0] + M[:, 1, 1] + M[:, 2, 2]) * 2.0
            w = 0.25 * s
            x = (M[:, 2, 1] - M[:, 1, 2]) / s
            y = (M[:, 0, 2] - M[:, 2, 0]) / s
            z = (M[:, 1, 0] - M[:, 0, 1]) / s
        elif b == 1:
            s = np.sqrt(1.0 + M[:, 0, 0] - M[:, 1, 1] - M[:, 2, 2]) * 2.0
            w = (M[:, 2, 1] - M[:, 1, 2]) / s
            x = 0.25 * s
            y = (M[:, 0, 1] + M[:, 1, 0]) / s
            z = (M[:, 0, 2] + M[:, 2, 0]) / s
        elif b == 2:
            s = np.sqrt(1.0 + M[:, 1, 1] - M[:, 0, 0] - M[:, 2, 2]) * 2.0
            w = (M[:, 0, 2] - M[:, 2, 0]) / s
            x = (M[:, 0, 1] + M[:, 1, 0]) / s
            y = 0.25 * s
            z = (M[:, 1, 2] + M[:, 2, 1]) / s
        else:
            s = np.sqrt(1.0 + M[:, 2, 2] - M[:, 0, 0] - M[:, 1, 1]) * 2.0
            w = (M[:, 1, 0] - M[:, 0, 1]) / s
            x = (M[:, 0, 2] + M[:, 2, 0]) / s
            y = (M[:, 1, 2] + M[:, 2, 1]) / s
            z = 0.25 * s
        pieces.append(diff.stack([w, x, y, z], axis=-1))
        orders.append(idx)
    order = np.concatenate(orders)
    quats = diff.concat(pieces, axis=0)[np.argsort(order, kind="stable")]
    quats = normalize_quat(quats).reshape(Rv.shape[:-2] + (4,))
    return quats[0] if single else quats


def quat_multiply(a, b):
    """Hamilton product in (w, x, y, z) order."""
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return diff.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def rotate_vectors(quat, points):
    """Rotate ``(..., 3)`` points by a quaternion (no translation)."""
    R = quat_to_rotmat(quat)
    return (points[..., None, :] * R).sum(-1)


def apply_pose(pose: Pose, points):
    """Map points through ``R p + t``, preserving order and count."""
    return rotate_vectors(pose.quat, points) + pose.t


def compose_pose(a: Pose, b: Pose) -> Pose:
    """Pose performing ``b`` first, then ``a``."""
    return Pose(
        quat=normalize_quat(quat_multiply(a.quat, b.quat)),
        t=rotate_vectors(a.quat, b.t) + a.t,
    )


def invert_pose(p: Pose) -> Pose:
    q = value(p.quat)
    conj = np.array([q[0], -q[1], -q[2], -q[3]])
    conj = conj / np.linalg.norm(conj)
    return Pose(quat=conj, t=-rotate_vectors(conj, value(p.t)))


def geodesic_angle(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Rotation angle between two rotation matrices, in [0, pi].

    Evaluates arccos((trace(Ra^T Rb) - 1) / 2) in its atan2 form, which keeps
    full precision near 0 and pi.
    """
    M = np.asarray(value(Ra)).T @ np.asarray(value(Rb))
    cos = np.clip((np.trace(M) - 1.0) / 2.0, -1.0, 1.0)
    axis_vec = 0.5 * np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])
    sin = float(np.linalg.norm(axis_vec))
    return float(np.arctan2(sin, cos))


def random_pose(seed, max_translation: float) -> Pose:
    """Uniform random pose: Haar-uniform rotation, translation uniform in a cube.

    ``seed`` may be an integer or a ``numpy.random.Generator``.  The rotation
    is a normalized 4-d Gaussian quaternion, which is exactly uniform on SO(3).
    """
    if max_translation < 0:
        raise ValueError("max_translation must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    q = rng.standard_normal(4)
    while np.linalg.norm(q) < 1e-9:
        q = rng.standard_normal(4)
    t = rng.uniform(-max_translation, max_translation, size=3) if max_translation > 0 else np.zeros(3)
    return Pose(quat=normalize_quat(q), t=t)


def cloud_diameter(points: np.ndarray) -> float:
    """Exact maximum pairwise distance of a point cloud."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] > 1500:
        try:
            from scipy.spatial import ConvexHull

            pts = pts[ConvexHull(pts).vertices]
        except Exception:
            pass
    best = 0.0
    step = 512
    for start in range(0, pts.shape[0], step):
        block = pts[start : start + step]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))
