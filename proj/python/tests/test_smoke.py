import math
from pathlib import Path

import numpy as np
import pytest

import mgm

DEMO = Path(__file__).resolve().parents[2] / "data" / "demo" / "config.json"


def test_roundtrip(tmp_path):
    data = np.arange(2 * 3 * 4, dtype=np.float32).reshape(2, 3, 4) + 1
    m = mgm.Manifest()
    m.model_id, m.policy_id, m.created = "m", "Crop", "2024-01-01T00:00:00Z"
    mgm.write_embeddings(tmp_path / "x.mgm", data, m)
    back, manifest = mgm.read_embeddings(tmp_path / "x.mgm")
    assert np.array_equal(back, data)
    assert (manifest.model_id, manifest.policy_id, manifest.labels) == ("m", "Crop", None)


def test_missing_file_raises_input_error(tmp_path):
    with pytest.raises(mgm.InputError):
        mgm.read_embeddings(tmp_path / "nope.mgm")


def test_nnk_prunes_collinear_neighbor():
    angles = np.radians([0.0, 10.0, 20.0])
    pts = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    g = mgm.nnk_graph(pts)
    assert g["neighbors"][0] == [1]
    assert all(0 <= d <= 2 for d in g["diameter"])


def test_affinity_anchors():
    e = np.eye(3)
    assert mgm.subspace_affinity(e[:2], e[:2], mgm.Normalization.min) == pytest.approx(1, abs=1e-10)
    assert mgm.subspace_affinity(e[:2], e[2:]) == pytest.approx(0, abs=1e-10)
    assert mgm.subspace_affinity(e[[0, 1]], e[[0, 2]]) == pytest.approx(0.5, abs=1e-10)


def test_synthesize_is_deterministic():
    a, _ = mgm.synthesize("scattered", "Rotate", seed=4)
    b, _ = mgm.synthesize("scattered", "Rotate", seed=4)
    assert a.shape == (12, 10, 16)
    assert np.array_equal(a, b)
    collapsed, _ = mgm.synthesize("collapsed", "Augs")
    assert np.array_equal(collapsed, np.repeat(collapsed[:, :1], 10, axis=1))


def test_demo_pipeline(tmp_path):
    assert len(mgm.run_synth(DEMO, tmp_path)) == 40
    assert mgm.run_graph(DEMO, tmp_path) > 0
    metrics = mgm.run_metrics(DEMO, tmp_path)
    assert len(metrics) == 8
    mean, spread = metrics["collapsed"]["Augs/Equivariance"]
    assert mean == 0 and spread == 0
    report = mgm.run_analyze(DEMO, tmp_path)
    assert isinstance(report, dict) and report
    assert len(mgm.feature_names()) == 27
    assert math.isfinite(metrics["simclr-like"]["Sem-Augs/Affinity"][0])
