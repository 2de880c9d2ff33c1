"""ADD/ADD-S/AUC/accuracy metric tests."""

import numpy as np
import pytest

from rede_core import (
    EvalReport,
    Pose,
    accuracy_at,
    add_metric,
    add_s_metric,
    apply_pose,
    auc,
    evaluate_poses,
    random_pose,
)

from conftest import axis_angle_quat


def brute_force_add(pred, truth, pts):
    total = 0.0
    for p in pts:
        a = apply_pose(truth, p[None])[0]
        b = apply_pose(pred, p[None])[0]
        total += float(np.linalg.norm(a - b))
    return total / len(pts)


def test_add_trivials(rng):
    model = rng.standard_normal((30, 3))
    p = random_pose(4, 0.5)
    assert add_metric(p, p, model) == 0.0
    shifted = Pose(quat=p.quat, t=np.asarray(p.t) + np.array([0.02, 0, 0]))
    assert abs(add_metric(shifted, p, model) - 0.02) < 1e-12


def test_add_matches_brute_force_oracle(rng):
    model = rng.standard_normal((50, 3))
    for seed in range(20):
        a, b = random_pose(seed, 0.5), random_pose(seed + 1000, 0.5)
        assert abs(add_metric(a, b, model) - brute_force_add(a, b, model)) < 1e-12
        # symmetry in (pred, truth)
        assert abs(add_metric(a, b, model) - add_metric(b, a, model)) < 1e-12


def test_add_s_zero_and_octagon_symmetry():
    angles = np.arange(8) * (2 * np.pi / 8)
    ring = np.stack([np.cos(angles), np.sin(angles), np.zeros(8)], axis=1)
    truth = Pose.identity()
    pred = Pose(quat=axis_angle_quat([0, 0, 1], 2 * np.pi / 8), t=np.zeros(3))
    assert add_s_metric(pred, truth, ring) <= 1e-9
    assert add_metric(pred, truth, ring) > 0.1


def test_add_s_never_exceeds_add(rng):
    model = rng.standard_normal((40, 3))
    for seed in range(200):
        a, b = random_pose(seed, 0.4), random_pose(seed + 5000, 0.4)
        assert add_s_metric(a, b, model) <= add_metric(a, b, model) + 1e-12


def test_auc_trivials_and_uniform():
    assert auc(np.zeros(10), 0.1) == 1.0
    assert auc(np.full(10, 0.5), 0.1) == 0.0
    n = 10_000
    T = 0.1
    stratified = (np.arange(n) + 0.5) / n * T
    assert abs(auc(stratified, T) - 0.5) < 0.01
    with pytest.raises(ValueError):
        auc(np.array([]), 0.1)
    with pytest.raises(ValueError):
        auc(np.array([0.1]), 0.0)


def test_auc_matches_riemann_approximation(rng):
    d = np.abs(rng.standard_normal(300)) * 0.06
    T = 0.1
    taus = (np.arange(100_000) + 0.5) / 100_000 * T
    riemann = np.mean([(d < t).mean() for t in taus])
    assert abs(auc(d, T) - riemann) < 1e-4


def test_auc_monotone_under_threshold_truncation(rng):
    d = np.abs(rng.standard_normal(500)) * 0.08
    full = auc(d, 0.1)
    kept = d[d <= 0.05]
    assert auc(kept, 0.1) >= full


def test_accuracy_at():
    assert accuracy_at(np.array([0.01, 0.03]), 0.02) == 0.5
    assert accuracy_at(np.zeros(5), 0.02) == 1.0
    # strict inequality: boundary samples are incorrect
    assert accuracy_at(np.array([0.02, 0.01]), 0.02) == 0.5
    diameter = 0.37
    d = np.array([0.01, 0.05, 0.036])
    assert accuracy_at(d, 0.1 * diameter) == (d < 0.1 * diameter).mean()
    with pytest.raises(ValueError):
        accuracy_at(np.array([]), 0.1)


def test_eval_report_invariants():
    with pytest.raises(ValueError):
        EvalReport(
            add=np.array([0.01]),
            add_s=np.array([0.02]),
            correct_at_2cm=np.array([True]),
            correct_at_10pct_diameter=np.array([True]),
            auc_add_s=0.5,
            accuracy_2cm=0.5,
            accuracy_10pct=0.5,
        )
    with pytest.raises(ValueError):
        EvalReport(
            add=np.array([0.02]),
            add_s=np.array([0.01]),
            correct_at_2cm=np.array([True]),
            correct_at_10pct_diameter=np.array([True]),
            auc_add_s=1.5,
            accuracy_2cm=0.5,
            accuracy_10pct=0.5,
        )


def test_evaluate_poses_perfect_predictions(rng):
    model = rng.standard_normal((25, 3))
    poses = [random_pose(s, 0.4) for s in range(6)]
    report = evaluate_poses(poses, poses, model)
    assert report.auc_add_s == 1.0
    assert report.accuracy_2cm == 1.0
    assert report.accuracy_10pct == 1.0
    assert report.n_samples == 6
