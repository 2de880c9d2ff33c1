"""Synthetic scene generation and the run configuration.

A scene sample stands in for a segmented RGB-D frame at desk scale: a
procedural object model is posed randomly, a contiguous spherical-cap region
is removed to mimic single-view occlusion, and isotropic Gaussian noise is
added.  Vote synthesis then plays the role of the learned predictor: true
offsets perturbed by distance-dependent noise, optionally with planted
corruption at the vote level (a fraction of votes per keypoint displaced) and
at the keypoint level (every vote of a keypoint displaced consistently).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import ConfigError
from ..geometry import PointCloud, Pose, apply_pose, cloud_diameter, random_pose
from ..keypoints import OffsetField, true_offsets
from ..validation import as_points

__all__ = [
    "SceneSample",
    "RunConfig",
    "make_model",
    "model_from_id",
    "generate_scene",
    "synth_votes",
    "scene_to_dict",
    "scene_from_dict",
    "save_scene",
    "load_scene",
]


# ---------------------------------------------------------------------------
# procedural object models


def make_model(kind: str = "ellipsoid", n_points: int = 500, seed: int = 0) -> PointCloud:
    """Deterministic synthetic object model, rescaled to unit diameter.

    ``gauss`` is a volumetric anisotropic blob, ``ellipsoid`` a bumpy closed
    surface (good for occlusion by a viewing cap), ``cube`` the 8 corners of
    a unit cube (``n_points`` ignored).
    """
    rng = np.random.default_rng(np.random.SeedSequence((0xC10D, seed)))
    if kind == "cube":
        pts = np.array(
            [[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)]
        )
        return PointCloud(pts, cloud_diameter(pts))
    if n_points < 8:
        raise ConfigError("procedural models need n_points >= 8")
    if kind == "gauss":
        pts = rng.standard_normal((n_points, 3)) * np.array([0.5, 0.35, 0.25])
    elif kind == "ellipsoid":
        i = np.arange(n_points)
        golden = (1.0 + 5.0**0.5) / 2.0
        z = 1.0 - 2.0 * (i + 0.5) / n_points
        theta = 2.0 * np.pi * i / golden
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        unit = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)
        bump = 1.0 + 0.18 * np.sin(3.1 * unit[:, 0] + 1.3) * np.cos(2.3 * unit[:, 1] - 0.7)
        bump += 0.1 * np.sin(4.7 * unit[:, 2] + float(rng.uniform(0, 2 * np.pi)))
        pts = unit * bump[:, None] * np.array([0.5, 0.38, 0.27])
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    pts = pts - pts.mean(axis=0)
    pts = pts / cloud_diameter(pts)
    return PointCloud(pts, cloud_diameter(pts))


def model_id(kind: str, n_points: int, seed: int) -> str:
    return f"{kind}-{n_points}-{seed}"


def model_from_id(mid: str) -> PointCloud:
    try:
        kind, n_points, seed = mid.rsplit("-", 2)
        return make_model(kind, int(n_points), int(seed))
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"cannot rebuild model from id {mid!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# scene samples


@dataclass
class SceneSample:
    """One synthetic observation of a model under an unknown pose."""

    model_id: str
    true_pose: Pose
    scene_points: np.ndarray
    visibility_mask: np.ndarray
    noise_sigma: float
    occlusion_fraction: float
    seed: int

    def __post_init__(self):
        self.scene_points = as_points(self.scene_points, "scene_points")
        self.visibility_mask = np.asarray(self.visibility_mask, dtype=bool)
        if int(self.visibility_mask.sum()) != self.scene_points.shape[0]:
            raise ValueError("visibility mask does not match the scene point count")


def generate_scene(
    model: PointCloud,
    *,
    model_id: str,
    noise_sigma: float = 0.0,
    occlusion_fraction: float = 0.0,
    seed: int = 0,
    max_translation: float = 0.5,
) -> SceneSample:
    """Pose the model, cut a spherical-cap region, add noise; fully seeded.

    The cap is taken around a random direction: the occluded points are the
    ones whose centered coordinates project highest onto it, sized so that
    exactly ``ceil((1 - occlusion) * N)`` points stay visible.
    """
    pts = model.points
    n = pts.shape[0]
    if not 0.0 <= occlusion_fraction < 1.0:
        raise ConfigError("occlusion_fraction must lie in [0, 1)")
    if noise_sigma < 0.0:
        raise ConfigError("noise_sigma must be >= 0")
    n_visible = math.ceil((1.0 - occlusion_fraction) * n)
    if n_visible < 10:
        raise ConfigError(f"occlusion leaves {n_visible} points; need at least 10")

    rng = np.random.default_rng(np.random.SeedSequence((0x5CEE, seed)))
    pose = random_pose(rng, max_translation)

    visibility = np.ones(n, dtype=bool)
    n_occluded = n - n_visible
    if n_occluded > 0:
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        heights = (pts - pts.mean(axis=0)) @ direction
        occluded = np.argsort(-heights, kind="stable")[:n_occluded]
        visibility[occluded] = False

    scene = apply_pose(pose, pts[visibility])
    if noise_sigma > 0.0:
        scene = scene + rng.normal(0.0, noise_sigma, size=scene.shape)
    return SceneSample(
        model_id=model_id,
        true_pose=pose,
        scene_points=scene,
        visibility_mask=visibility,
        noise_sigma=float(noise_sigma),
        occlusion_fraction=float(occlusion_fraction),
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# synthetic vote fields (the stand-in for the learned predictor)


def synth_votes(
    sample: SceneSample,
    scene_keypoints: np.ndarray,
    diameter: float,
    *,
    vote_noise_sigma: float = 0.0,
    vote_shrink: float = 0.0,
    corrupt_vote_fraction: float = 0.0,
    corrupt_keypoint_count: int = 0,
    corruption_scale: float = 0.5,
    informative: bool = True,
    informative_logit_gap: float = 8.0,
    informative_dist_weight: float = 2.0,
) -> tuple[OffsetField, dict]:
    """Synthesize an offset/confidence field around the ground truth.

    Two error sources imitate a learned predictor.  ``vote_noise_sigma`` adds
    Gaussian noise that grows with the true offset length; ``vote_shrink``
    shortens long offsets multiplicatively (regression toward the mean), a
    bias that no amount of vote averaging removes, so accuracy genuinely
    degrades when occlusion strips the near votes of a keypoint.

    Vote-level corruption displaces a random subset of votes per keypoint;
    keypoint-level corruption displaces every vote of the chosen keypoints by
    one shared vector, i.e. a confidently wrong keypoint that per-vote
    confidence cannot repair.

    With ``informative`` set, logits imitate a trained confidence head: higher
    for near votes, ``informative_logit_gap`` lower for corrupted votes.
    Otherwise logits are zero (uniform confidence).
    """
    scene = sample.scene_points
    kps = as_points(scene_keypoints, "scene_keypoints")
    n, k = scene.shape[0], kps.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence((0x0FFE, sample.seed)))

    truth = true_offsets(kps, scene)
    rel_dist = np.linalg.norm(truth, axis=-1) / diameter
    offsets = truth.copy()
    if vote_shrink > 0.0:
        offsets = offsets * (1.0 - vote_shrink * rel_dist[:, :, None])
    if vote_noise_sigma > 0.0:
        sigma = vote_noise_sigma * diameter * (0.25 + 1.5 * rel_dist)
        offsets = offsets + rng.standard_normal((n, k, 3)) * sigma[:, :, None]

    vote_mask = np.zeros((n, k), dtype=bool)
    if corrupt_vote_fraction > 0.0:
        m = int(math.floor(corrupt_vote_fraction * n))
        for col in range(k):
            rows = rng.choice(n, size=m, replace=False)
            vote_mask[rows, col] = True
        dirs = rng.standard_normal((n, k, 3))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        offsets = np.where(
            vote_mask[:, :, None],
            offsets + corruption_scale * diameter * dirs,
            offsets,
        )

    corrupted_keypoints = np.zeros(k, dtype=bool)
    if corrupt_keypoint_count > 0:
        cols = rng.choice(k, size=min(corrupt_keypoint_count, k), replace=False)
        corrupted_keypoints[cols] = True
        for col in cols:
            direction = rng.standard_normal(3)
            direction /= np.linalg.norm(direction)
            offsets[:, col, :] += corruption_scale * diameter * direction

    if informative:
        logits = -informative_dist_weight * rel_dist
        logits = np.where(vote_mask, logits - informative_logit_gap, logits)
    else:
        logits = np.zeros((n, k))

    field = OffsetField(offsets=offsets, confidence_logits=logits)
    info = {"vote_mask": vote_mask, "corrupted_keypoints": corrupted_keypoints}
    return field, info


# ---------------------------------------------------------------------------
# JSON serialization


def scene_to_dict(sample: SceneSample) -> dict:
    return {
        "model_id": sample.model_id,
        "seed": sample.seed,
        "pose": {
            "quat": [float(v) for v in np.asarray(sample.true_pose.quat)],
            "t": [float(v) for v in np.asarray(sample.true_pose.t)],
        },
        "points": [[float(c) for c in p] for p in sample.scene_points],
        "visibility": [bool(b) for b in sample.visibility_mask],
        "noise_sigma": float(sample.noise_sigma),
        "occlusion_fraction": float(sample.occlusion_fraction),
    }


def scene_from_dict(d: dict) -> SceneSample:
    pose = Pose(quat=np.asarray(d["pose"]["quat"]), t=np.asarray(d["pose"]["t"]))
    return SceneSample(
        model_id=str(d["model_id"]),
        true_pose=pose,
        scene_points=np.asarray(d["points"], dtype=np.float64),
        visibility_mask=np.asarray(d["visibility"], dtype=bool),
        noise_sigma=float(d.get("noise_sigma", 0.0)),
        occlusion_fraction=float(d.get("occlusion_fraction", 0.0)),
        seed=int(d["seed"]),
    )


def save_scene(path, sample: SceneSample) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(sample)) + "\n", encoding="utf-8", newline="\n")


def load_scene(path) -> SceneSample:
    return scene_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    """Configuration for generation, evaluation, training, and ablations."""

    model_kind: str = "ellipsoid"
    model_points: int = 500
    model_seed: int = 0
    model_ply: str | None = None

    n_fps_keypoints: int = 8
    lam: float = 0.01
    alpha: float = 0.01
    beta: float = 0.1
    max_scene_points: int = 512
    max_translation: float = 0.5

    noise_sigmas: tuple[float, ...] = (0.0,)
    occlusion_fractions: tuple[float, ...] = (0.0,)
    n_samples: int = 20
    seed: int = 0
    curve_threshold_fraction: float = 0.05

    doe_keypoints: bool = True
    doe_pose: bool = True
    icp: bool = False
    weighted_all_k: bool = False

    vote_noise_sigma: float = 0.0
    vote_shrink: float = 0.0
    corrupt_vote_fraction: float = 0.0
    corrupt_keypoint_count: int = 0
    corruption_scale: float = 0.5
    informative_logit_gap: float = 8.0
    informative_dist_weight: float = 2.0

    train_iters: int = 200
    train_step_size: float = 0.01

    def __post_init__(self):
        self.noise_sigmas = tuple(float(v) for v in self.noise_sigmas)
        self.occlusion_fractions = tuple(float(v) for v in self.occlusion_fractions)
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.model_points >= 8, "model_points must be >= 8"),
            (self.n_fps_keypoints >= 2, "n_fps_keypoints must be >= 2"),
            (self.lam > 0, "lam must be > 0"),
            (self.alpha > 0, "alpha must be > 0"),
            (self.beta >= 0, "beta must be >= 0"),
            (self.max_scene_points >= 1, "max_scene_points must be >= 1"),
            (self.max_translation >= 0, "max_translation must be >= 0"),
            (all(s >= 0 for s in self.noise_sigmas), "noise_sigmas must be >= 0"),
            (len(self.noise_sigmas) > 0, "noise_sigmas must be nonempty"),
            (
                all(0 <= o < 1 for o in self.occlusion_fractions),
                "occlusion_fractions must lie in [0, 1)",
            ),
            (len(self.occlusion_fractions) > 0, "occlusion_fractions must be nonempty"),
            (self.n_samples >= 1, "n_samples must be >= 1"),
            (0 < self.curve_threshold_fraction <= 1, "curve_threshold_fraction must lie in (0, 1]"),
            (0 <= self.corrupt_vote_fraction < 1, "corrupt_vote_fraction must lie in [0, 1)"),
            (self.corrupt_keypoint_count >= 0, "corrupt_keypoint_count must be >= 0"),
            (self.corruption_scale >= 0, "corruption_scale must be >= 0"),
            (self.vote_noise_sigma >= 0, "vote_noise_sigma must be >= 0"),
            (0 <= self.vote_shrink < 1, "vote_shrink must lie in [0, 1)"),
            (self.train_iters >= 1, "train_iters must be >= 1"),
            (self.train_step_size > 0, "train_step_size must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def model_id(self) -> str:
        return model_id(self.model_kind, self.model_points, self.model_seed)

    def load_model(self) -> PointCloud:
        if self.model_ply:
            from .ply import load_ply

            return load_ply(self.model_ply).with_diameter()
        return make_model(self.model_kind, self.model_points, self.model_seed)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json_file(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["noise_sigmas"] = list(self.noise_sigmas)
        d["occlusion_fractions"] = list(self.occlusion_fractions)
        return d
