"""Smoke tests of the python bindings: the main operations run end to end and
agree with hand-computable values."""

import json
import math
import os
import pathlib
import subprocess
import tempfile

import numpy as np
import pytest

import hyperv2x as hv


def make_config(**overrides):
    cfg = hv.ScenarioConfig()
    cfg.region_size_m = 16.0
    cfg.cell_size_m = 0.5
    cfg.num_agents = 2
    cfg.vehicle_count_min = 1
    cfg.vehicle_count_max = 3
    cfg.num_classes_dynamic = 1
    cfg.seed = 11
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def test_scene_generation_is_deterministic():
    cfg = make_config()
    a = hv.generate_scene(cfg, 5)
    b = hv.generate_scene(cfg, 5)
    assert np.array_equal(a.gt_semantic, b.gt_semantic)
    assert np.array_equal(a.agent_poses, b.agent_poses)
    c = hv.generate_scene(cfg, 6)
    assert not np.array_equal(a.gt_semantic, c.gt_semantic)
    assert a.gt_semantic.shape == (32, 32)
    assert np.array_equal(hv.rasterize_gt(a), a.gt_semantic)


def test_observation_contract():
    cfg = make_config(obs_noise_std=0.2)
    scene = hv.generate_scene(cfg, 3)
    obs = hv.render_observation(scene, 0, cfg, 3)
    assert obs.shape == (3, 32, 32)
    vis = obs[1]
    assert set(np.unique(vis)) <= {0.0, 1.0}
    # occupancy is zero wherever visibility is zero and clipped to [0,1]
    assert np.all(obs[0][vis == 0] == 0.0)
    assert obs[0].min() >= 0.0 and obs[0].max() <= 1.0


def test_uncertainty_hand_values():
    probs = np.array([[[[0.6]], [[0.4]]], [[[0.8]], [[0.2]]]])  # K=2, C=2, 1x1
    mean = hv.mean_prediction(probs)
    assert mean[0, 0, 0] == pytest.approx(0.7)
    assert hv.epistemic(probs)[0, 0] == pytest.approx(0.01)
    assert hv.aleatoric(mean)[0, 0] == pytest.approx(0.6109, abs=1e-4)
    uniform = np.full((3, 2, 2), 1.0 / 3.0)
    assert hv.aleatoric(uniform)[0, 0] == pytest.approx(math.log(3.0))


def test_metric_hand_values():
    pred = np.array([[True, True], [False, False]])
    gt = np.array([[True, False], [True, False]])
    assert hv.iou(pred, gt) == pytest.approx(1.0 / 3.0)
    assert hv.ece([0.8, 0.8, 0.6, 0.6], [True, False, True, False], 1) == pytest.approx(0.2)
    labels = np.zeros((1, 1), dtype=np.int32)
    half = np.array([[[0.5]], [[0.5]]])
    assert hv.brier(half, labels) == pytest.approx(0.5)
    assert hv.nll(half, labels) == pytest.approx(math.log(2.0))


def test_noise_condition_statistics():
    z = hv.noise_condition(100000, 0.1, 7)
    assert z.std() == pytest.approx(0.1, rel=0.02)
    assert np.array_equal(z, hv.noise_condition(100000, 0.1, 7))
    assert np.all(hv.noise_condition(16, 0.0, 1) == 0.0)


def test_context_embed_is_spatial_mean():
    g = np.arange(2 * 3 * 3, dtype=float).reshape(2, 3, 3)
    z = hv.context_embed(g)
    assert z == pytest.approx(g.mean(axis=(1, 2)))


@pytest.mark.skipif("HYPERV2X_CLI" not in os.environ, reason="needs the built CLI")
def test_end_to_end_prediction_simplex():
    cli = os.environ["HYPERV2X_CLI"]
    with tempfile.TemporaryDirectory() as tmp:
        root = pathlib.Path(tmp)
        config = {
            "scenario": {
                "region_size_m": 10.0,
                "cell_size_m": 0.5,
                "num_agents": 2,
                "vehicle_count_range": [1, 2],
                "obs_noise_std": 0.05,
                "num_classes_dynamic": 1,
                "seed": 3,
            },
            "dataset": {"train_scenes": 4, "test_scenes": 2},
            "features": {"channels": 8, "enc_width1": 4, "enc_width2": 6},
            "decoder": {"hidden": 4},
            "hypernet": {"hidden": 12},
            "train": {"epochs_pretrain": 1, "epochs_finetune": 1, "k_samples": 2, "seed": 1},
            "loss": {"class_weights": [1.0, 2.0]},
            "output_dir": str(root / "out"),
        }
        cfg_path = root / "config.json"
        cfg_path.write_text(json.dumps(config))

        def run(*args):
            subprocess.run([cli, *args], check=True, capture_output=True)

        run("gen-data", "--config", str(cfg_path), "--out", str(root / "data"))
        run("pretrain", "--config", str(cfg_path), "--data", str(root / "data"),
            "--out", str(root / "pre"))
        run("train", "--config", str(cfg_path), "--data", str(root / "data"),
            "--pretrained", str(root / "pre" / "checkpoint.ckpt"),
            "--variant", "hyper", "--out", str(root / "model"))

        probs = hv.predict_scene(
            str(root / "model" / "checkpoint.ckpt"),
            str(root / "data" / "test"),
            scene_index=0, k=4, seed=9,
        )
        assert probs.shape[0] == 4 and probs.shape[1] == 2
        assert probs.min() >= 0.0 and probs.max() <= 1.0
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
        # seeded prediction is reproducible
        again = hv.predict_scene(
            str(root / "model" / "checkpoint.ckpt"),
            str(root / "data" / "test"),
            scene_index=0, k=4, seed=9,
        )
        np.testing.assert_array_equal(probs, again)
