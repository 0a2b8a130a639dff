import subprocess
import sys

import numpy as np
import pytest

from unseenseg.cli import main
from unseenseg.config import KEYS, ConfigError, dump_config, parse_config
from unseenseg.mining import read_selection
from unseenseg.pipeline import PipelineConfig
from unseenseg.tensorio import FlowField, load_tensor, save_flo


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg == PipelineConfig()
        assert (cfg.mining.alpha, cfg.mining.lambda_o, cfg.mining.lambda_m) == (1.0, 20.0, 35.0)
        assert (cfg.mining.na_frac, cfg.mining.beta, cfg.iou_converge) == (0.8, 0.8, 0.9)

    def test_values_and_comments(self):
        cfg = parse_config("# sweep\nlambda_m = 0   # motion off\n\nepochs=5\naffine = true\nconnectivity = 4\n")
        assert cfg.mining.lambda_m == 0.0
        assert cfg.train.epochs == 5 and cfg.affine and cfg.proposals.connectivity == 4

    def test_dump_round_trip(self):
        cfg = parse_config("beta = 0.5\nrefine_blend = 0.25\nfacility_variant = sum\n")
        assert parse_config(dump_config(cfg)) == cfg

    def test_every_field_has_a_key(self):
        for name in ("alpha", "lambda_o", "lambda_m", "na_frac", "beta", "facility_variant",
                     "learning_rate", "momentum", "epochs", "prob_clip_eps", "tau", "connectivity",
                     "min_area_frac", "iou_converge", "max_outer_iters", "refine_blend", "affine",
                     "mbd_max_passes", "mbd_tol"):
            assert name in KEYS

    @pytest.mark.parametrize("text", ["bogus = 1", "alpha 1", "alpha = x", "beta = 0.5\nbeta = 0.6",
                                      "beta = 1.5", "affine = maybe", "connectivity = 6"])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)


@pytest.fixture(scope="module")
def scenario(tmp_path_factory):
    d = tmp_path_factory.mktemp("scen")
    assert main(["synth", "--seed", "7", "--out", str(d)]) == 0
    return d


def test_synth_run_eval(scenario, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--bundle", str(scenario / "bundle"), "--gallery", str(scenario / "gallery"),
                 "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["eval", "--pred", str(out), "--gt", str(scenario / "bundle")]) == 0
    last = capsys.readouterr().out.splitlines()[-1]
    assert last.startswith("mean iou ") and float(last.split()[-1]) >= 0.90


def test_eval_identical_dirs(scenario, capsys):
    assert main(["eval", "--pred", str(scenario / "bundle"), "--gt", str(scenario / "bundle")]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "mean iou 1.000000"


def test_init_weights_and_mine(scenario, tmp_path):
    w = tmp_path / "w.sgt"
    assert main(["init-weights", "--bundle", str(scenario / "bundle"), "--gallery",
                 str(scenario / "gallery"), "--out", str(w)]) == 0
    assert load_tensor(w).shape == (4,)
    cfg = tmp_path / "c.txt"
    cfg.write_text("lambda_m = 0\n")
    sel = tmp_path / "sel.txt"
    assert main(["mine", "--bundle", str(scenario / "bundle"), "--weights", str(w),
                 "--config", str(cfg), "--out", str(sel)]) == 0
    with open(sel) as f:
        assert len(read_selection(f).ids) > 0


def test_saliency(tmp_path):
    u = np.zeros((8, 8))
    u[2:6, 2:6] = 1.0
    save_flo(tmp_path / "f.flo", FlowField(u, np.zeros_like(u)))
    assert main(["saliency", "--flow", str(tmp_path / "f.flo"), "--out", str(tmp_path / "s.sgt")]) == 0
    s = load_tensor(tmp_path / "s.sgt")
    assert s.max() == 1.0 and s[0].max() == 0.0


def test_input_errors_exit_1(scenario, tmp_path):
    (tmp_path / "bad.flo").write_bytes(b"nope")
    assert main(["saliency", "--flow", str(tmp_path / "bad.flo"), "--out", str(tmp_path / "s.sgt")]) == 1
    cfg = tmp_path / "c.txt"
    cfg.write_text("unknown_key = 3\n")
    assert main(["run", "--bundle", str(scenario / "bundle"), "--category", "1", "--config", str(cfg),
                 "--out", str(tmp_path / "o")]) == 1
    assert main(["run", "--bundle", str(scenario / "bundle"), "--category", "9",
                 "--out", str(tmp_path / "o")]) == 1
    assert main(["eval", "--pred", str(tmp_path / "missing"), "--gt", str(scenario / "bundle")]) == 1


def test_usage_errors_exit_2(scenario):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bundle", str(scenario / "bundle"), "--gallery", "g", "--category", "1", "--out", "o"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "unseenseg", "run", "--bundle", "b"], capture_output=True)
    assert r.returncode == 2 and b"usage" in r.stderr
