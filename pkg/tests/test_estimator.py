"""Scikit-learn facade tests."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rede_core import Pose, RobustPoseEstimator, apply_pose, random_pose
from rede_core.harness import make_model

from conftest import pose_errors


@pytest.fixture(scope="module")
def fitted():
    model = make_model("ellipsoid", 100, 0)
    truth = random_pose(5, 0.4)
    scene = apply_pose(truth, model.points)
    est = RobustPoseEstimator(model_points=model.points, n_fps_keypoints=4, n_iter=60)
    est.fit(scene, truth.as_vector())
    return est, scene, truth


def test_get_set_params_and_clone():
    est = RobustPoseEstimator(n_fps_keypoints=5, temperature=0.02)
    params = est.get_params()
    assert params["n_fps_keypoints"] == 5
    assert params["temperature"] == 0.02
    est.set_params(beta=0.25)
    assert est.beta == 0.25
    cloned = clone(est)
    assert cloned.get_params()["beta"] == 0.25


def test_fit_recovers_pose(fitted):
    est, scene, truth = fitted
    pred = Pose.from_vector(est.predict(scene))
    rot, trans = pose_errors(pred, truth)
    assert rot < 1e-3 and trans < 1e-4
    assert est.score(scene, truth.as_vector()) > -1e-3
    assert len(est.loss_trace_) <= 60
    assert est.keypoints_.shape == (5, 3)


def test_fit_predict_equals_fit_then_predict():
    model = make_model("gauss", 60, 1)
    truth = random_pose(8, 0.3)
    scene = apply_pose(truth, model.points)
    a = RobustPoseEstimator(model_points=model.points, n_fps_keypoints=3, n_iter=30)
    b = RobustPoseEstimator(model_points=model.points, n_fps_keypoints=3, n_iter=30)
    assert np.array_equal(a.fit_predict(scene, truth.as_vector()), b.fit(scene, truth.as_vector()).predict(scene))


def test_unfitted_and_bad_inputs():
    est = RobustPoseEstimator()
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((5, 3)))
    with pytest.raises(ValueError):
        est.fit(np.zeros((5, 3)), np.array([1.0, 0, 0, 0, 0, 0, 0]))  # no model_points


def test_predict_rejects_wrong_point_count(fitted):
    est, scene, truth = fitted
    with pytest.raises(ValueError):
        est.predict(scene[:-1])
