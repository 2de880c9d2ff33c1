"""Rigid-motion primitive tests."""

import numpy as np
import pytest
from scipy.integrate import quad

from rede_core import (
    Pose,
    apply_pose,
    cloud_diameter,
    compose_pose,
    geodesic_angle,
    invert_pose,
    normalize_quat,
    quat_to_rotmat,
    random_pose,
    rotmat_to_quat,
)

from conftest import axis_angle_quat


def test_quat_to_rotmat_identity():
    assert np.allclose(quat_to_rotmat(np.array([1.0, 0, 0, 0])), np.eye(3))


def test_quat_to_rotmat_z180():
    R = quat_to_rotmat(np.array([0.0, 0, 0, 1]))
    assert np.allclose(R, np.diag([-1.0, -1.0, 1.0]))


def test_quat_to_rotmat_zero_norm_raises():
    with pytest.raises(ValueError):
        quat_to_rotmat(np.zeros(4))


def test_rotmat_to_quat_identity():
    assert np.allclose(rotmat_to_quat(np.eye(3)), [1.0, 0, 0, 0])


def test_rotmat_to_quat_x180():
    q = rotmat_to_quat(np.diag([1.0, -1.0, -1.0]))
    assert np.allclose(q, [0.0, 1.0, 0.0, 0.0])


def test_rotmat_to_quat_rejects_non_rotation():
    with pytest.raises(ValueError):
        rotmat_to_quat(np.eye(3) * 1.5)
    with pytest.raises(ValueError):
        rotmat_to_quat(np.diag([1.0, 1.0, -1.0]))  # det -1


def test_quat_roundtrip_1000_seeds():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        q = rng.standard_normal(4)
        q /= np.linalg.norm(q)
        if q[0] < 0:
            q = -q
        R = quat_to_rotmat(q)
        # rotation constraints
        assert np.abs(R @ R.T - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(R) - 1.0) < 1e-9
        q2 = rotmat_to_quat(R)
        assert q2[0] >= 0.0
        assert np.abs(q2 - q).max() < 1e-9
        assert np.abs(quat_to_rotmat(q2) - R).max() < 1e-12


def test_normalize_quat_canonical_hemisphere():
    q = normalize_quat(np.array([-2.0, 0.0, 2.0, 0.0]))
    assert q[0] >= 0
    assert abs(np.linalg.norm(q) - 1.0) < 1e-9
    with pytest.raises(ValueError):
        normalize_quat(np.zeros(4))


def test_apply_pose_identity_and_translation(rng):
    cloud = rng.standard_normal((20, 3))
    out = apply_pose(Pose.identity(), cloud)
    assert np.array_equal(out, cloud)
    p = Pose(quat=[1.0, 0, 0, 0], t=[1.0, 2.0, 3.0])
    assert np.allclose(apply_pose(p, np.zeros((1, 3))), [[1.0, 2.0, 3.0]])


def test_apply_pose_inverse_composition(rng):
    for seed in range(50):
        p = random_pose(seed, 0.8)
        cloud = rng.standard_normal((15, 3))
        back = apply_pose(p, apply_pose(invert_pose(p), cloud))
        assert np.abs(back - cloud).max() < 1e-12


def test_apply_pose_is_isometry(rng):
    p = random_pose(3, 0.5)
    cloud = rng.standard_normal((30, 3))
    moved = apply_pose(p, cloud)
    d0 = np.linalg.norm(cloud[:, None] - cloud[None, :], axis=-1)
    d1 = np.linalg.norm(moved[:, None] - moved[None, :], axis=-1)
    assert np.abs(d0 - d1).max() < 1e-9


def test_compose_pose_matches_sequential(rng):
    a, b = random_pose(1, 0.5), random_pose(2, 0.5)
    cloud = rng.standard_normal((10, 3))
    assert np.abs(apply_pose(compose_pose(a, b), cloud) - apply_pose(a, apply_pose(b, cloud))).max() < 1e-12


def test_geodesic_angle_zero_and_pi():
    R = quat_to_rotmat(axis_angle_quat([0.3, 0.4, 0.5], 1.0))
    assert geodesic_angle(R, R) == 0.0
    Rz = np.diag([-1.0, -1.0, 1.0])
    assert abs(geodesic_angle(np.eye(3), Rz) - np.pi) < 1e-12


def test_geodesic_angle_axis_angle_construction():
    for axis in ([1, 0, 0], [0, 1, 0], [1, 1, 1], [0.2, -0.5, 0.7]):
        R = quat_to_rotmat(axis_angle_quat(axis, np.deg2rad(10.0)))
        assert abs(geodesic_angle(np.eye(3), R) - np.deg2rad(10.0)) < 1e-9


def test_geodesic_angle_symmetry(rng):
    Ra = quat_to_rotmat(normalize_quat(rng.standard_normal(4)))
    Rb = quat_to_rotmat(normalize_quat(rng.standard_normal(4)))
    assert abs(geodesic_angle(Ra, Rb) - geodesic_angle(Rb, Ra)) < 1e-12


def test_random_pose_determinism_and_zero_translation():
    a = random_pose(9, 0.7)
    b = random_pose(9, 0.7)
    assert np.array_equal(a.quat, b.quat) and np.array_equal(a.t, b.t)
    z = random_pose(4, 0.0)
    assert np.array_equal(z.t, np.zeros(3))
    with pytest.raises(ValueError):
        random_pose(0, -1.0)


def test_random_pose_mean_rotation_angle_matches_haar_density():
    # analytic oracle: E[theta] under the uniform-rotation density (1 - cos t) / pi
    expected, err = quad(lambda t: t * (1.0 - np.cos(t)) / np.pi, 0.0, np.pi)
    assert err < 1e-10
    assert abs(expected - (np.pi / 2.0 + 2.0 / np.pi)) < 1e-12
    angles = [
        geodesic_angle(np.eye(3), quat_to_rotmat(random_pose(seed, 0.0).quat))
        for seed in range(10_000)
    ]
    assert abs(np.mean(angles) - expected) < 0.05


def test_cloud_diameter_cube():
    cube = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float)
    assert abs(cloud_diameter(cube) - np.sqrt(3.0)) < 1e-12


def test_point_cloud_validation():
    from rede_core import PointCloud

    with pytest.raises(ValueError):
        PointCloud(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        PointCloud(np.zeros((4, 2)))
    cloud = PointCloud(np.zeros((4, 3))).with_diameter()
    assert cloud.diameter == 0.0
    assert len(cloud) == 4
