import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from unseenseg.bundle import load_bundle, read_meta
from unseenseg.harness import (ScenarioParams, format_report, gen_scenario, iou, video_report,
                               write_scenario)
from unseenseg.tensorio import save_mask


def test_noiseless_scenario_recovers_gt():
    prm = ScenarioParams(noise=0.0)
    bundle, _, scen = gen_scenario(11, prm)
    w = np.zeros(prm.channels)
    w[list(prm.mix_categories)] = prm.mix_weights
    for R, g in zip(bundle.responses, bundle.gt):
        p = 1 / (1 + np.exp(-np.tensordot(w, R, axes=1)))
        np.testing.assert_array_equal(p >= 0.5, g)
    assert scen.signature.sum() == pytest.approx(1.0)


def test_flow_is_object_displacement():
    bundle, _, scen = gen_scenario(5)
    for t, f in enumerate(bundle.flows):
        dy = scen.trajectory[t + 1][0] - scen.trajectory[t][0]
        dx = scen.trajectory[t + 1][1] - scen.trajectory[t][1]
        assert np.all(f.u[bundle.gt[t]] == dx) and np.all(f.v[bundle.gt[t]] == dy)
        assert not f.u[~bundle.gt[t]].any() and not f.v[~bundle.gt[t]].any()


def test_same_seed_same_bytes(tmp_path):
    write_scenario(tmp_path / "a", 7)
    write_scenario(tmp_path / "b", 7)
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert len(files) == 1 + 8 * 4 + 7 + (1 + 4)
    for rel in files:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()
    assert read_meta(tmp_path / "a" / "bundle" / "meta.txt") == dict(frames=8, height=64, width=64,
                                                                      channels=4, dsim=16)
    back = load_bundle(tmp_path / "a" / "bundle")
    assert len(back.gt) == 8


def test_distractors_are_static_and_excluded_from_gt():
    bundle, _, scen = gen_scenario(2, ScenarioParams(distractors=2))
    assert len(scen.distractor_boxes) == 2
    by, bx, bh, bw = scen.distractor_boxes[0]
    patch = np.zeros(bundle.frame_dims, bool)
    patch[by:by + bh, bx:bx + bw] = True
    for R, g, f in zip(bundle.responses, bundle.gt, bundle.flows):
        free = patch & ~g
        assert (R[0][free] > 0).mean() > 0.95
        assert not f.u[free].any()


def test_params_validation():
    for kw in (dict(frames=1), dict(mix_categories=(1, 1)), dict(mix_weights=(0.7, 0.7)),
               dict(object_size=(80, 10))):
        with pytest.raises(ValueError):
            ScenarioParams(**kw)


def test_iou_cases():
    a = np.zeros((4, 5), bool)
    a[1:3, 1:3] = True
    b = np.roll(a, 1, axis=1)
    assert iou(a, a) == 1.0
    assert iou(a, b) == pytest.approx(1 / 3, abs=1e-15)
    assert iou(a, np.roll(a, 3, axis=1)) == 0.0
    assert iou(np.zeros((2, 2)), np.zeros((2, 2))) == 1.0
    with pytest.raises(ValueError):
        iou(a, a.T)


masks = st.integers(1, 8).flatmap(
    lambda n: st.tuples(arrays(bool, (n, n)), arrays(bool, (n, n))))


@settings(max_examples=200, deadline=None)
@given(masks)
def test_iou_properties(pair):
    a, b = pair
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0
    assert iou(a, a) == 1.0


def test_video_report(tmp_path):
    rng = np.random.default_rng(0)
    gt = [rng.random((6, 6)) < 0.5 for _ in range(3)]
    pred = [gt[0], ~gt[1], np.zeros((6, 6), bool)]
    (tmp_path / "g").mkdir()
    (tmp_path / "p").mkdir()
    for t in range(3):
        save_mask(tmp_path / "g" / f"gt_{t:04d}.pgm", gt[t])
        save_mask(tmp_path / "p" / f"final_{t:04d}.pgm", pred[t])
    scores, mean = video_report(tmp_path / "p", tmp_path / "g")
    assert scores == [1.0, 0.0, iou(pred[2], gt[2])]
    assert mean == pytest.approx(sum(scores) / 3)
    text = format_report(scores, mean)
    assert text.splitlines()[0] == "frame 0000 iou 1.000000"
    assert text.splitlines()[-1].startswith("mean iou ")
    save_mask(tmp_path / "p" / "final_0003.pgm", pred[0])
    with pytest.raises(ValueError):
        video_report(tmp_path / "p", tmp_path / "g")
