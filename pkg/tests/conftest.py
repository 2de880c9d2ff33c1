"""Shared helpers for the test suite."""

import numpy as np
import pytest

from rede_core import Pose, geodesic_angle, quat_to_rotmat


def axis_angle_quat(axis, angle: float) -> np.ndarray:
    """Unit quaternion (w, x, y, z) for a rotation about ``axis``."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    return np.concatenate([[np.cos(angle / 2.0)], np.sin(angle / 2.0) * axis])


def pose_errors(a: Pose, b: Pose) -> tuple[float, float]:
    """(rotation error in radians, translation error in meters)."""
    rot = geodesic_angle(quat_to_rotmat(np.asarray(a.quat)), quat_to_rotmat(np.asarray(b.quat)))
    return rot, float(np.linalg.norm(np.asarray(a.t) - np.asarray(b.t)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
