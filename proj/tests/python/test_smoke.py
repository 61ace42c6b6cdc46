import math

import numpy as np
import pytest

import cinp

TINY = {
    "seed": 3,
    "cohort": {"n_subjects": 24, "dims": [8, 8, 8], "n_rois": 6, "n_timepoints": 40},
    "visual": {"patch_size": 4, "embed_dim": 8, "n_layers": 1, "n_heads": 2},
    "network": {"embed_dim": 8, "n_layers": 1, "n_heads": 2},
    "hyper": {"epochs": 2, "batch_size": 4},
}


def test_configs():
    desk = cinp.desk_config()
    assert desk["eval"]["fcn_fraction"] == pytest.approx(0.10)
    assert cinp.validate_config({}) == desk
    paper = cinp.paper_config()
    assert paper["hyper"]["batch_size"] == 256
    assert paper["visual"]["dims"] == [96, 96, 96]
    with pytest.raises(cinp.CinpError) as err:
        cinp.validate_config({"hyper": {"alpha": -1}})
    assert err.value.code == "ValidationError"
    assert "hyper.alpha" in str(err.value)


def test_cohort_arrays_and_fcn():
    c = cinp.gen_cohort(TINY)
    assert c["volumes"].shape == (24, 8, 8, 8)
    assert c["bold"].shape == (24, 6, 40)
    assert sorted(set(c["labels"])) == [0, 1]
    again = cinp.gen_cohort(TINY)
    assert np.array_equal(c["volumes"], again["volumes"])
    fcn = cinp.bold_to_fcn(c["bold"][0])
    assert np.allclose(fcn, c["fcn"][0], atol=1e-12)
    assert np.allclose(fcn, np.corrcoef(c["bold"][0]), atol=1e-12)


def test_cohort_directory(tmp_path):
    cinp.export_cohort(TINY, str(tmp_path / "d"))
    back = cinp.import_cohort(str(tmp_path / "d"))
    assert np.array_equal(back["bold"], cinp.gen_cohort(TINY)["bold"])


def test_metrics_and_prompting():
    m = cinp.metrics([0, 1, 1, 0], [0, 1, 1, 0], 2, scores=[0.1, 0.9, 0.8, 0.3])
    assert m["acc"] == 1.0 and m["auc"] == 1.0
    assert cinp.auc([0.9, 0.1], [1, 0]) == 1.0
    with pytest.raises(cinp.CinpError) as err:
        cinp.metrics([0, 1], [0], 2)
    assert err.value.code == "LengthMismatch"

    eye = np.eye(3)
    refs = cinp.build_reference_set([eye[:1], eye[1:2]], r=1)
    assert refs.shape == (2, 1, 3)
    res = cinp.prompt_classify(np.array([1.0, 0, 0]), refs)
    assert res["predicted"] == 0 and res["class_mean"] == [1.0, 0.0]
    with pytest.raises(cinp.CinpError):
        cinp.build_reference_set([eye[:1], eye[1:2]], r=2)

    train, val, test = cinp.split_dataset([i % 2 for i in range(100)])
    assert (len(train), len(val), len(test)) == (70, 10, 20)


def test_linear_probe():
    rng = np.random.default_rng(0)
    y = np.arange(80) % 2
    x = rng.normal(size=(80, 3)) + 3.0 * (2 * y[:, None] - 1)
    out = cinp.linear_probe_accuracy(x[:60], y[:60].tolist(), x[60:], y[60:].tolist())
    assert out["acc"] == 1.0


def test_pretrain_embed_roundtrip(tmp_path):
    ckpt, history = cinp.pretrain(TINY)
    assert len(history) == 8
    assert all(math.isfinite(h["total"]) for h in history)
    assert ckpt.step == 8
    path = str(tmp_path / "c.bin")
    ckpt.save(path)
    back = cinp.load_checkpoint(path)
    a, b = ckpt.parameters(), back.parameters()
    assert a.keys() == b.keys()
    assert all(np.array_equal(a[k], b[k]) for k in a)

    emb = cinp.embed(back)
    assert emb["image"].shape == (24, 8)
    assert np.allclose(np.linalg.norm(emb["image"], axis=1), 1.0)
    assert np.allclose(np.linalg.norm(emb["network"], axis=1), 1.0)
    ev = cinp.evaluate(back, r=1)
    assert 0.0 <= ev["prompt"]["acc"] <= 1.0
    assert ev["probe"]["n"] == 6
