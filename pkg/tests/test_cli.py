import hashlib
import json
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from domadapt.cli import load_experiment, main, run_pipeline
from domadapt.core import METHODS, FeatureDataset
from domadapt.dataio import (Volume, read_feature_csv, read_nifti, write_feature_csv,
                             write_nifti)
from domadapt.image import normalize_volume, phantom_volume, scanner_shift


@pytest.fixture
def paper_data(tmp_path):
    assert main(["synth", "--paper", "--seed", "7", "--out", str(tmp_path / "d")]) == 0
    return tmp_path / "d" / "source.csv", tmp_path / "d" / "target.csv"


def test_synth_paper_is_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["synth", "--paper", "--seed", "7", "--out", str(tmp_path / name)]) == 0
    for f in ("source.csv", "target.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    s = read_feature_csv(tmp_path / "a" / "source.csv")
    assert (s.n, s.dim) == (60, 2) and np.bincount(s.labels).tolist() == [30, 30]
    assert "n=60 D=2" in capsys.readouterr().out


def test_usage_errors_exit_2(tmp_path, paper_data):
    src, tgt = paper_data
    assert main(["synth", "--paper"]) == 2
    assert main(["nope"]) == 2
    assert main(["eval", "--source", str(src), "--target", str(tgt), "--metrics", "mmd,auc"]) == 2
    assert main(["viz", "--pair", str(src), str(tmp_path / "missing.csv"),
                 "--out", str(tmp_path / "v")]) == 2


def test_adapt_writes_run_directory(tmp_path, paper_data, capsys):
    src, tgt = paper_data
    assert main(["adapt", "--method", "coral", "--source", str(src), "--target", str(tgt),
                 "--out", str(tmp_path / "r")]) == 0
    assert "wall time" in capsys.readouterr().out
    (run_dir,) = (tmp_path / "r").iterdir()
    assert re.fullmatch(r"coral_\d{8}T\d{6}Z", run_dir.name)
    files = sorted(p.name for p in run_dir.iterdir())
    assert len(files) == 3 and {"adapted_source.csv", "adapted_target.csv"} < set(files)
    rec = json.loads((run_dir / [f for f in files if f.endswith(".json")][0]).read_text())
    assert rec["method"] == "coral"
    want = sorted("sha256:" + hashlib.sha256(p.read_bytes()).hexdigest() for p in (src, tgt))
    assert sorted(i["digest"] for i in rec["inputs"]) == want


def test_adapt_flag_overrides_config_file(tmp_path, paper_data):
    src, tgt = paper_data
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"subspace_dim": 2, "reg": 0.5}))
    assert main(["adapt", "--method", "tca", "--source", str(src), "--target", str(tgt),
                 "--config", str(cfg), "--subspace-dim", "1", "--out", str(tmp_path / "r")]) == 0
    (run_dir,) = (tmp_path / "r").iterdir()
    rec = json.loads(next(run_dir.glob("*.json")).read_text())
    assert rec["config"]["subspace_dim"] == 1 and rec["config"]["reg"] == 0.5
    assert read_feature_csv(run_dir / "adapted_source.csv").dim == 1


def test_adapt_jda_unlabeled_source_exits_1(tmp_path, paper_data, capsys):
    src, tgt = paper_data
    s = read_feature_csv(src)
    bare = write_feature_csv(FeatureDataset(s.samples, None, "source"), tmp_path / "u.csv")
    assert main(["adapt", "--method", "jda", "--source", str(bare), "--target", str(tgt),
                 "--out", str(tmp_path / "r")]) == 1
    assert "MissingSourceLabels" in capsys.readouterr().err


def test_eval_coral_below_baseline(tmp_path, paper_data, capsys):
    src, tgt = paper_data
    main(["adapt", "--method", "coral", "--source", str(src), "--target", str(tgt),
          "--out", str(tmp_path / "r")])
    (run_dir,) = (tmp_path / "r").iterdir()
    rec = next(run_dir.glob("*.json"))
    capsys.readouterr()
    assert main(["eval", "--source", str(src), "--target", str(tgt),
                 "--adapted-source", str(run_dir / "adapted_source.csv"),
                 "--adapted-target", str(run_dir / "adapted_target.csv"),
                 "--metrics", "mmd,domain-acc", "--seed", "42", "--record", str(rec)]) == 0
    out = json.loads(capsys.readouterr().out)
    for m in ("mmd", "domain-acc"):
        assert out["adapted"]["metrics"][m] < out["original"]["metrics"][m]
        assert out["delta"][m] < 0
    assert "adapted" in json.loads(rec.read_text())["metrics"]


def test_eval_self_has_zero_delta(paper_data, capsys):
    src, tgt = paper_data
    capsys.readouterr()
    assert main(["eval", "--source", str(src), "--target", str(tgt), "--adapted-source", str(src),
                 "--adapted-target", str(tgt)]) == 0
    assert json.loads(capsys.readouterr().out)["delta"] == {"mmd": 0.0, "domain-acc": 0.0}


def test_viz_raw_and_tsne(tmp_path, paper_data):
    src, tgt = paper_data
    assert main(["viz", "--pair", str(src), str(tgt), "--names", "raw",
                 "--out", str(tmp_path / "v")]) == 0
    root = ET.parse(tmp_path / "v" / "scatter_raw.svg").getroot()
    points = root.find("{http://www.w3.org/2000/svg}g[@class='points']")
    assert len(list(points)) == 120
    r = np.random.default_rng(0)
    hi = [write_feature_csv(FeatureDataset(r.normal(size=(25, 90)) + k, None, dom), tmp_path / f"{dom}.csv")
          for k, dom in enumerate(("source", "target"))]
    for out in ("t1", "t2"):
        assert main(["viz", "--pair", str(hi[0]), str(hi[1]), "--names", "hd", "--seed", "3",
                     "--out", str(tmp_path / out)]) == 0
    assert ((tmp_path / "t1" / "scatter_hd.svg").read_bytes()
            == (tmp_path / "t2" / "scatter_hd.svg").read_bytes())


def test_viz_bars_from_eval_reports(tmp_path, paper_data):
    src, tgt = paper_data
    rep = tmp_path / "baseline.json"
    main(["eval", "--source", str(src), "--target", str(tgt), "--out", str(rep)])
    assert main(["viz", "--pair", str(src), str(tgt), "--metrics", str(rep),
                 "--out", str(tmp_path / "v")]) == 0
    assert (tmp_path / "v" / "bars_mmd.svg").is_file()
    assert (tmp_path / "v" / "bars_domain-acc.svg").is_file()


@pytest.fixture
def volumes(tmp_path):
    src = phantom_volume((16, 16, 4), seed=2)
    src = Volume((src.data * 900 + 100).astype(np.float32))
    tgt = scanner_shift(normalize_volume(src), seed=3)
    return write_nifti(src, tmp_path / "s.nii"), write_nifti(tgt, tmp_path / "t.nii")


def test_img_baseline_is_normalized_source(tmp_path, volumes, capsys):
    s, t = volumes
    assert main(["img", "--method", "baseline", "--source", str(s), "--target", str(t),
                 "--eval", "--out", str(tmp_path / "o")]) == 0
    (run_dir,) = (tmp_path / "o").iterdir()
    out = read_nifti(run_dir / "adapted_source.nii").data
    ref = normalize_volume(read_nifti(s)).data.astype(np.float32)
    assert np.array_equal(out, ref)
    assert len(list(run_dir.glob("*.json"))) == 1
    metrics = json.loads(capsys.readouterr().out.split("baseline ->")[0])
    assert metrics["baseline"] == metrics["adapted"]


def test_img_ssimh_default_threshold(tmp_path, volumes):
    s, t = volumes
    assert main(["img", "--method", "ssimh", "--source", str(s), "--target", str(t),
                 "--out", str(tmp_path / "o")]) == 0
    (run_dir,) = (tmp_path / "o").iterdir()
    assert json.loads(next(run_dir.glob("*.json")).read_text())["config"]["threshold"] == 3


def test_img_dims_mismatch_exits_1(tmp_path, volumes):
    s, _ = volumes
    other = write_nifti(phantom_volume((16, 16, 5)), tmp_path / "o.nii")
    assert main(["img", "--method", "hm", "--source", str(s), "--target", str(other),
                 "--out", str(tmp_path / "o")]) == 1


def test_pipeline_paper_preset(tmp_path):
    cfg = load_experiment(preset="paper")
    summary, timing, code = run_pipeline(cfg, tmp_path / "a")
    assert code == 0
    figs = sorted(p.name for p in (tmp_path / "a" / "figures").iterdir())
    assert len([f for f in figs if f.startswith("scatter_")]) == len(METHODS) == 10
    assert [f for f in figs if f.startswith("bars_")] == ["bars_domain-acc.svg", "bars_mmd.svg"]
    # byte-identical summary on a rerun, also with concurrent workers
    run_pipeline(cfg, tmp_path / "b", workers=4)
    assert ((tmp_path / "a" / "summary.json").read_bytes()
            == (tmp_path / "b" / "summary.json").read_bytes())
    assert set(timing["methods"]) == set(METHODS)


def test_pipeline_unknown_method_isolated(tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"preset": "paper", "methods": ["baseline", "bogus", "coral"]}))
    assert main(["pipeline", str(cfg), "--out", str(tmp_path / "o")]) == 1
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["methods"]["bogus"]["status"] == "failed"
    assert summary["methods"]["coral"]["status"] == "ok"
    assert summary["methods"]["baseline"]["status"] == "ok"
    assert "FAILED" in capsys.readouterr().out


def test_pipeline_needs_output(monkeypatch):
    monkeypatch.delenv("DOMADAPT_OUTPUT_ROOT", raising=False)
    assert main(["pipeline", "--preset", "paper"]) == 2
