"""Acceptance suite: one test per acceptance criterion, printed pass/fail lines.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; the asserts carry the same information when output is captured.
"""

import math
import time

import numpy as np
from scipy.stats import spearmanr

from rede_core import (
    add_metric,
    apply_pose,
    compose_pose,
    estimate_pose,
    evaluate_poses,
    icp_refine,
    kabsch_solve,
    keypoint_config,
    normalize_confidences,
    random_pose,
    Pose,
    auc,
)
from rede_core.cli import main as cli_main
from rede_core.harness import (
    RunConfig,
    corrupt_offset_targets,
    generate_scene,
    make_model,
    run_ablation,
    train_toy,
)
from rede_core.harness.gradcheck import gradcheck_suite

from conftest import axis_angle_quat, pose_errors


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_criterion_1_exact_recovery():
    model = make_model("gauss", 50, 0)
    kps = keypoint_config(model.points, 8)
    worst_rot = worst_t = 0.0
    start = time.monotonic()
    for seed in range(1000):
        truth = random_pose(seed, 0.5)
        scene = apply_pose(truth, model.points)
        est, _ = estimate_pose(kps, apply_pose(truth, kps), scene, model.points)
        rot, trans = pose_errors(est, truth)
        worst_rot = max(worst_rot, rot)
        worst_t = max(worst_t, trans)
    elapsed = time.monotonic() - start
    ok = worst_rot < 1e-8 and worst_t < 1e-8 and elapsed < 10.0
    _report(
        "criterion 1 exact recovery",
        ok,
        f"worst rotation {worst_rot:.2e} rad, worst translation {worst_t:.2e} m, "
        f"1000 poses in {elapsed:.1f} s",
    )


def test_criterion_2_outlier_robustness():
    model = make_model("ellipsoid", 150, 1)
    kps = keypoint_config(model.points, 8)
    d = float(model.diameter)
    wins = 0
    ratios = []
    for seed in range(200):
        rng = np.random.default_rng(np.random.SeedSequence((0xACC2, seed)))
        truth = random_pose(seed, 0.5)
        scene = apply_pose(truth, model.points)
        pred = apply_pose(truth, kps)
        for b in rng.choice(9, 2, replace=False):
            u = rng.standard_normal(3)
            pred[b] += 0.5 * d * u / np.linalg.norm(u)
        est, _ = estimate_pose(kps, pred, scene, model.points, lam=0.01 * d)
        plain = kabsch_solve(kps, pred)
        add_doe = add_metric(est, truth, model.points)
        add_plain = add_metric(plain, truth, model.points)
        wins += add_doe < add_plain
        ratios.append(add_plain / max(add_doe, 1e-300))
    median_gain = float(np.median(ratios))
    ok = wins >= 190 and median_gain >= 5.0
    _report(
        "criterion 2 outlier robustness",
        ok,
        f"beats plain Kabsch in {wins}/200 trials, median ADD improvement {median_gain:.0f}x",
    )


def test_criterion_3_gradient_correctness():
    start = time.monotonic()
    results = gradcheck_suite(seed=0, n_instances=50)
    elapsed = time.monotonic() - start
    worst = max(r.max_rel_error for r in results)
    ok = all(r.ok for r in results) and elapsed < 60.0
    _report(
        "criterion 3 gradient correctness",
        ok,
        f"{len(results)} checks (offset, pose, joint pipeline x 50 instances), "
        f"worst relative error {worst:.2e}, {elapsed:.1f} s",
    )


def test_criterion_4_end_to_end_training():
    # part 1: noiseless 500-point, K=9 scene; pose loss falls by >= 99%
    model = make_model("ellipsoid", 500, 0)
    kps = keypoint_config(model.points, 8)
    sample = generate_scene(model, model_id="ellipsoid-500-0", seed=11)
    cfg = RunConfig(model_points=500, train_iters=500, beta=0.1)
    _, trace = train_toy(sample, kps, cfg, model_points=model.points)
    pose_vals = [r["pose_loss"] for r in trace if math.isfinite(r["pose_loss"])]
    reduction = pose_vals[-1] / pose_vals[0]
    ok1 = len(trace) <= 500 and reduction <= 0.01

    # part 2: planted corruption in the offset targets; beta=0.1 beats beta=0
    small = make_model("ellipsoid", 100, 2)
    small_kps = keypoint_config(small.points, 4)
    wins = 0
    n_seeds = 50
    for seed in range(n_seeds):
        s = generate_scene(small, model_id="ellipsoid-100-2", seed=seed)
        truth_kps = apply_pose(s.true_pose, small_kps)
        from rede_core.keypoints import true_offsets

        targets = corrupt_offset_targets(
            true_offsets(truth_kps, s.scene_points), fraction=0.25, scale=0.4, seed=seed
        )
        finals = {}
        for beta in (0.1, 0.0):
            cfg_b = RunConfig(
                model_points=100, n_fps_keypoints=4, train_iters=60, beta=beta
            )
            _, tr = train_toy(s, small_kps, cfg_b, model_points=small.points, target_offsets=targets)
            vals = [r["pose_loss"] for r in tr if math.isfinite(r["pose_loss"])]
            finals[beta] = vals[-1]
        wins += finals[0.1] < finals[0.0]
    ok2 = wins >= 45
    _report(
        "criterion 4 end-to-end training",
        ok1 and ok2,
        f"pose loss reduced to {reduction:.2e} of initial in {len(trace)} iterations; "
        f"beta=0.1 beats beta=0 in {wins}/{n_seeds} corrupted-target seeds",
    )


def test_criterion_5_metric_fidelity(rng):
    model = rng.standard_normal((40, 3)) * 0.4
    violations = 0
    from rede_core import add_s_metric

    for seed in range(1000):
        a, b = random_pose(seed, 0.4), random_pose(seed + 31337, 0.4)
        if add_s_metric(a, b, model) > add_metric(a, b, model) + 1e-12:
            violations += 1
    n = 10_000
    T = 0.1
    uniform_auc = auc((np.arange(n) + 0.5) / n * T, T)
    perfect = evaluate_poses([random_pose(3, 0.2)] * 4, [random_pose(3, 0.2)] * 4, model)
    ok = (
        violations == 0
        and abs(uniform_auc - 0.5) <= 0.01
        and perfect.auc_add_s == 1.0
        and perfect.accuracy_2cm == 1.0
        and perfect.accuracy_10pct == 1.0
    )
    _report(
        "criterion 5 metric fidelity",
        ok,
        f"ADD-S <= ADD violations {violations}/1000, uniform AUC {uniform_auc:.4f}, "
        f"perfect predictions AUC/accuracy {perfect.auc_add_s}/{perfect.accuracy_2cm}",
    )


def test_criterion_6_icp_contract():
    model = make_model("ellipsoid", 500, 0)
    recovered = 0
    monotone = True
    for seed in range(100):
        truth = random_pose(seed, 0.4)
        scene = apply_pose(truth, model.points)
        rng = np.random.default_rng(np.random.SeedSequence((0x1C9, seed)))
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        shift = rng.standard_normal(3)
        shift = 0.01 * shift / np.linalg.norm(shift)
        init = compose_pose(Pose(quat=axis_angle_quat(axis, np.deg2rad(5.0)), t=shift), truth)
        refined, trace = icp_refine(init, scene, model.points, max_iters=50, tol=1e-12, return_trace=True)
        monotone &= all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))
        rot, trans = pose_errors(refined, truth)
        recovered += rot < 1e-6 and trans < 1e-6
    ok = recovered == 100 and monotone
    _report(
        "criterion 6 icp contract",
        ok,
        f"recovered 5-degree/1-cm perturbations in {recovered}/100 seeds, "
        f"residue trace monotone: {monotone}",
    )


def _occlusion_config(seed: int = 42) -> RunConfig:
    return RunConfig(
        model_kind="ellipsoid",
        model_points=300,
        model_seed=0,
        occlusion_fractions=(0.0, 0.2, 0.4, 0.6),
        noise_sigmas=(0.003,),
        n_samples=30,
        seed=seed,
        vote_noise_sigma=0.02,
        vote_shrink=0.45,
        corrupt_vote_fraction=0.2,
        corrupt_keypoint_count=2,
        corruption_scale=0.5,
        informative_dist_weight=3.0,
        lam=0.01,
        curve_threshold_fraction=0.05,
    )


def test_criterion_7_occlusion_curve():
    result = run_ablation(_occlusion_config())
    occ_grid = (0.0, 0.2, 0.4, 0.6)
    curves = {
        mode: [r["accuracy"] for r in result.curve if r["mode"] == mode]
        for mode in ("plain", "both")
    }
    dominance = all(b >= p for b, p in zip(curves["both"], curves["plain"]))
    non_increasing = all(
        curves["both"][i + 1] <= curves["both"][i] + 1e-12 for i in range(len(occ_grid) - 1)
    )
    pooled = [
        float(np.mean([r["accuracy"] for r in result.curve if r["occlusion"] == occ]))
        for occ in occ_grid
    ]
    rho = float(spearmanr(occ_grid, pooled).statistic)
    ok = dominance and non_increasing and rho < 0.0
    _report(
        "criterion 7 occlusion curve",
        ok,
        f"DOE-on {['%.2f' % a for a in curves['both']]} vs DOE-off "
        f"{['%.2f' % a for a in curves['plain']]}, pooled Spearman {rho:.2f}",
    )


def test_criterion_8_combinatorics_and_normalization(rng):
    model = make_model("gauss", 120, 3)
    kps = keypoint_config(model.points, 8)
    truth = random_pose(5, 0.4)
    scene = apply_pose(truth, model.points)
    pred = apply_pose(truth, kps) + rng.normal(0, 0.02, (9, 3))
    _, bank = estimate_pose(kps, pred, scene, model.points)
    weights_sum = float(np.sum(np.asarray(bank.weights)))
    conf = normalize_confidences(rng.normal(0, 2, (200, 9)))
    col_err = float(np.abs(conf.sum(0) - 1.0).max())
    ok = (
        len(bank) == 84
        and abs(weights_sum - 1.0) < 1e-9
        and np.all(np.asarray(bank.weights) >= 0)
        and col_err < 1e-9
        and np.all(conf >= 0)
    )
    _report(
        "criterion 8 combinatorics and normalization",
        ok,
        f"bank size {len(bank)} (C(9,3)=84), weight sum error {abs(weights_sum - 1.0):.1e}, "
        f"confidence column sum error {col_err:.1e}",
    )


def test_criterion_9_ablate_determinism(tmp_path):
    cfg = {
        "model_points": 120,
        "n_samples": 6,
        "seed": 13,
        "occlusion_fractions": [0.0, 0.4],
        "noise_sigmas": [0.002],
        "vote_noise_sigma": 0.02,
        "vote_shrink": 0.3,
        "corrupt_vote_fraction": 0.15,
        "corrupt_keypoint_count": 1,
    }
    import json

    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert cli_main(["ablate", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert cli_main(["ablate", "--config", str(cfg_path), "--out", str(out2)]) == 0
    identical = all(
        (out1 / name).read_bytes() == (out2 / name).read_bytes()
        for name in ("ablation_report.csv", "ablation_curve.csv", "ablation_summary.json")
    )
    _report(
        "criterion 9 determinism",
        identical,
        "two ablate runs with identical seed/config produced byte-identical reports",
    )
