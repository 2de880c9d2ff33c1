"""Point-to-point ICP refinement tests."""

import numpy as np

from rede_core import Pose, apply_pose, compose_pose, icp_refine, random_pose, residue
from rede_core.harness import make_model

from conftest import axis_angle_quat, pose_errors


def _perturb(pose: Pose, angle_rad: float, shift_m: float, seed: int) -> Pose:
    rng = np.random.default_rng(seed)
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    delta = Pose(quat=axis_angle_quat(axis, angle_rad), t=shift_m * direction)
    return compose_pose(delta, pose)


def test_icp_fixed_point_at_truth():
    model = make_model("ellipsoid", 200, 0)
    truth = random_pose(3, 0.4)
    scene = apply_pose(truth, model.points)
    refined, trace = icp_refine(truth, scene, model.points, return_trace=True)
    rot, trans = pose_errors(refined, truth)
    assert rot < 1e-12 and trans < 1e-12
    assert len(trace) == 1
    assert trace[0] < 1e-12


def test_icp_recovers_small_perturbation():
    model = make_model("ellipsoid", 500, 0)
    for seed in range(10):
        truth = random_pose(seed, 0.4)
        scene = apply_pose(truth, model.points)
        init = _perturb(truth, np.deg2rad(5.0), 0.01, seed)
        refined = icp_refine(init, scene, model.points, max_iters=50, tol=1e-12)
        rot, trans = pose_errors(refined, truth)
        assert rot < 1e-6 and trans < 1e-6


def test_icp_trace_monotone_and_never_worse_than_init(rng):
    model = make_model("gauss", 150, 2)
    for seed in range(8):
        truth = random_pose(seed, 0.3)
        scene = apply_pose(truth, model.points) + rng.normal(0, 0.01, (150, 3))
        init = _perturb(truth, np.deg2rad(25.0), 0.08, seed + 100)
        refined, trace = icp_refine(init, scene, model.points, return_trace=True)
        assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))
        assert residue(refined, scene, model.points, max_scene_points=None) <= trace[0] + 1e-15
