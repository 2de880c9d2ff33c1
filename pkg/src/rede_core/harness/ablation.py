"""Ablation sweeps over corruption, occlusion, and the two elimination stages.

Four modes are compared on identical scenes and identical planted corruption:

* ``plain``          - uniform vote confidences, single all-keypoint solve
* ``doe_keypoints``  - informative confidences, single all-keypoint solve
* ``doe_pose``       - uniform confidences, residue-weighted solver bank
* ``both``           - informative confidences and the solver bank

The harness also produces the accuracy-vs-occlusion curve for each mode.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..geometry import PointCloud, apply_pose
from ..keypoints import keypoint_config, normalize_confidences, predict_keypoints
from ..metrics import TWO_CM, EvalReport, accuracy_at, add_metric, add_s_metric, auc
from ..refine import icp_refine
from ..solver import estimate_pose, kabsch_solve
from .parallel import ordered_map
from .scenes import RunConfig, SceneSample, generate_scene, synth_votes

__all__ = [
    "MODES",
    "AblationResult",
    "mode_flags",
    "mode_from_flags",
    "evaluate_grid",
    "run_ablation",
    "run_eval",
    "write_rows_csv",
    "write_curve_csv",
    "write_summary_json",
]

MODES = ("plain", "doe_keypoints", "doe_pose", "both")

REPORT_COLUMNS = (
    "sample_id",
    "mode",
    "occlusion",
    "noise",
    "add",
    "add_s",
    "correct_2cm",
    "correct_10pct",
)


def mode_flags(mode: str) -> tuple[bool, bool]:
    """(doe_keypoints, doe_pose) flags for a mode name."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    return mode in ("doe_keypoints", "both"), mode in ("doe_pose", "both")


def mode_from_flags(doe_keypoints: bool, doe_pose: bool) -> str:
    if doe_keypoints and doe_pose:
        return "both"
    if doe_keypoints:
        return "doe_keypoints"
    if doe_pose:
        return "doe_pose"
    return "plain"


@dataclass
class AblationResult:
    rows: list[dict]
    reports: dict[str, EvalReport]
    curve: list[dict]


def keypoint_quality_weights(scene, offsets, logits) -> np.ndarray:
    """Per-keypoint weights for the weighted all-K baseline solve.

    A keypoint whose votes disagree gets a low weight: the weight is the
    inverse of the confidence-weighted vote dispersion, normalized.
    """
    conf = normalize_confidences(logits)
    votes = scene[:, None, :] + offsets
    xhat = (conf[:, :, None] * votes).sum(0)
    spread = (conf * np.linalg.norm(votes - xhat[None, :, :], axis=-1)).sum(0)
    w = 1.0 / (spread + 1e-9)
    return w / w.sum()


def predict_sample_pose(
    sample: SceneSample,
    model_cloud: PointCloud,
    model_kps: np.ndarray,
    offsets: np.ndarray,
    informative_logits: np.ndarray,
    cfg: RunConfig,
    doe_keypoints: bool,
    doe_pose: bool,
):
    """Pose prediction for one sample under the given mode flags."""
    scene = sample.scene_points
    logits = informative_logits if doe_keypoints else np.zeros_like(informative_logits)
    pred_kps = predict_keypoints(scene, offsets, logits)
    if doe_pose:
        pose, _ = estimate_pose(
            model_kps,
            pred_kps,
            scene,
            model_cloud.points,
            lam=cfg.lam,
            max_scene_points=cfg.max_scene_points,
        )
    else:
        weights = (
            keypoint_quality_weights(scene, offsets, logits) if cfg.weighted_all_k else None
        )
        pose = kabsch_solve(model_kps, pred_kps, weights=weights)
    if cfg.icp:
        pose = icp_refine(pose, scene, model_cloud.points)
    return pose


def _sample_seed(master: int, i_occ: int, i_noise: int, j: int) -> int:
    return int(np.random.SeedSequence((master, i_occ, i_noise, j)).generate_state(1)[0])


def evaluate_grid(cfg: RunConfig, modes) -> AblationResult:
    """Evaluate the requested modes over the occlusion/noise grid.

    Scenes, vote noise, and planted corruption are drawn once per sample and
    shared by every mode, so mode comparisons are paired.
    """
    model_cloud = cfg.load_model().with_diameter()
    diameter = float(model_cloud.diameter)
    model_kps = keypoint_config(model_cloud.points, cfg.n_fps_keypoints)

    tasks = []
    sample_id = 0
    for i_occ, occ in enumerate(cfg.occlusion_fractions):
        for i_noise, noise in enumerate(cfg.noise_sigmas):
            for j in range(cfg.n_samples):
                tasks.append((sample_id, occ, noise, _sample_seed(cfg.seed, i_occ, i_noise, j)))
                sample_id += 1

    def eval_one(task):
        sid, occ, noise, seed = task
        sample = generate_scene(
            model_cloud,
            model_id=cfg.model_id,
            noise_sigma=noise,
            occlusion_fraction=occ,
            seed=seed,
            max_translation=cfg.max_translation,
        )
        truth_kps = apply_pose(sample.true_pose, model_kps)
        field, _ = synth_votes(
            sample,
            truth_kps,
            diameter,
            vote_noise_sigma=cfg.vote_noise_sigma,
            vote_shrink=cfg.vote_shrink,
            corrupt_vote_fraction=cfg.corrupt_vote_fraction,
            corrupt_keypoint_count=cfg.corrupt_keypoint_count,
            corruption_scale=cfg.corruption_scale,
            informative=True,
            informative_logit_gap=cfg.informative_logit_gap,
            informative_dist_weight=cfg.informative_dist_weight,
        )
        out = []
        for mode in modes:
            doe_kp, doe_po = mode_flags(mode)
            pose = predict_sample_pose(
                sample, model_cloud, model_kps, field.offsets,
                field.confidence_logits, cfg, doe_kp, doe_po,
            )
            a = add_metric(pose, sample.true_pose, model_cloud.points)
            a_s = add_s_metric(pose, sample.true_pose, model_cloud.points)
            out.append(
                {
                    "sample_id": sid,
                    "mode": mode,
                    "occlusion": occ,
                    "noise": noise,
                    "add": a,
                    "add_s": a_s,
                    "correct_2cm": int(a_s < TWO_CM),
                    "correct_10pct": int(a < 0.1 * diameter),
                    "curve_hit": int(a < cfg.curve_threshold_fraction * diameter),
                }
            )
        return out

    rows = [row for chunk in ordered_map(eval_one, tasks) for row in chunk]
    rows.sort(key=lambda r: (r["mode"], r["sample_id"]))

    reports = {}
    for mode in modes:
        sub = [r for r in rows if r["mode"] == mode]
        add_s = np.array([r["add_s"] for r in sub])
        reports[mode] = EvalReport(
            add=np.array([r["add"] for r in sub]),
            add_s=add_s,
            correct_at_2cm=np.array([bool(r["correct_2cm"]) for r in sub]),
            correct_at_10pct_diameter=np.array([bool(r["correct_10pct"]) for r in sub]),
            auc_add_s=auc(add_s),
            accuracy_2cm=accuracy_at(add_s, TWO_CM),
            accuracy_10pct=float(np.mean([r["correct_10pct"] for r in sub])),
        )

    curve = []
    for mode in modes:
        for occ in cfg.occlusion_fractions:
            sub = [
                r["curve_hit"]
                for r in rows
                if r["mode"] == mode and r["occlusion"] == occ
            ]
            curve.append(
                {"mode": mode, "occlusion": occ, "accuracy": float(np.mean(sub))}
            )
    return AblationResult(rows=rows, reports=reports, curve=curve)


def run_ablation(cfg: RunConfig) -> AblationResult:
    """All four mode combinations over the configured grid."""
    return evaluate_grid(cfg, MODES)


def run_eval(cfg: RunConfig) -> AblationResult:
    """Single-mode evaluation using the config's stage flags."""
    return evaluate_grid(cfg, [mode_from_flags(cfg.doe_keypoints, cfg.doe_pose)])


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def write_rows_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for r in sorted(rows, key=lambda r: (r["mode"], r["sample_id"])):
            writer.writerow([_fmt(r[c]) for c in REPORT_COLUMNS])


def write_curve_csv(path, curve) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["mode", "occlusion", "accuracy"])
        for r in curve:
            writer.writerow([r["mode"], _fmt(r["occlusion"]), _fmt(r["accuracy"])])


def write_summary_json(path, result: AblationResult) -> None:
    summary = {
        mode: {
            "n_samples": rep.n_samples,
            "mean_add": float(rep.add.mean()),
            "mean_add_s": float(rep.add_s.mean()),
            "auc_add_s": rep.auc_add_s,
            "accuracy_2cm": rep.accuracy_2cm,
            "accuracy_10pct": rep.accuracy_10pct,
        }
        for mode, rep in result.reports.items()
    }
    Path(path).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8", newline="\n")
