from __future__ import annotations

import json
import subprocess
import sys

import pytest

from keypose.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def read(path):
    return json.loads(path.read_text())


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """Two training videos and one test video, score level, with a second view."""
    root = tmp_path_factory.mktemp("corpus")
    for name, seed in (("train0", 1000), ("train1", 1001), ("test", 0)):
        d = root / name
        assert run("synth", "--benchmark", "--second-view", "--seed", seed, "--out", d) == 0
        assert run("activations", "--scores", d / "scores.csv", "--out", d / "acts.json") == 0
        assert run("activations", "--scores", d / "scores_view2.csv", "--mode", "symmetric",
                   "--out", d / "acts2.json") == 0
    return root


class TestSynth:
    def test_byte_identical(self, tmp_path):
        for d in ("a", "b"):
            assert run("synth", "--seed", 7, "--duration", 600, "--second-view", "--render", 3,
                       "--period", 20, "--out", tmp_path / d) == 0
        files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        assert len(files) >= 8
        for rel in files:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_outputs(self, tmp_path):
        assert run("synth", "--seed", 3, "--duration", 500, "--n-poselets", 4,
                   "--keypose-phases", 0.2, 0.6, "--out", tmp_path) == 0
        header = (tmp_path / "scores.csv").read_text().splitlines()[0]
        assert header == "frame,poselet_0,poselet_1,poselet_2,poselet_3"
        meta = read(tmp_path / "scores.csv.meta.json")
        assert meta["config"]["seed"] == 3 and meta["spec"]["n_poselets"] == 4
        gt = read(tmp_path / "ground_truth.json")
        assert {r["keypose"] for r in gt["annotations"]} == {0, 1}

    def test_invalid_spec_is_data_error(self, tmp_path, capsys):
        assert run("synth", "--dropout-rate", 1.0, "--out", tmp_path) == 1
        assert "InvalidSpec" in capsys.readouterr().err


class TestScoreLevelPipeline:
    def fit(self, corpus, out, *extra):
        return run("fit-keypose", "--activations", corpus / "train0" / "acts.json",
                   corpus / "train1" / "acts.json", "--ground-truth",
                   corpus / "train0" / "ground_truth.json", corpus / "train1" / "ground_truth.json",
                   "--out", out, *extra)

    def test_end_to_end(self, corpus, tmp_path, capsys):
        t = corpus / "test"
        assert self.fit(corpus, tmp_path / "model.json", "--top-k", "all") == 0
        assert run("predict", "--model", tmp_path / "model.json", "--activations", t / "acts.json",
                   "--out", tmp_path / "preds.json") == 0
        assert run("evaluate", "--predictions", tmp_path / "preds.json", "--ground-truth",
                   t / "ground_truth.json", "--curve", tmp_path / "curve.csv",
                   "--out", tmp_path / "summary.json") == 0
        summary = read(tmp_path / "summary.json")
        assert "recall_at_003" in summary and summary["recall_at_003"] > 0.7
        assert "recall@0.03=" in capsys.readouterr().out
        assert (tmp_path / "curve.csv").read_text().startswith("deviation,recall\n")
        # predict records the model's top_k it actually used
        for name in ("model.json", "preds.json"):
            assert read(tmp_path / name)["config"]["top_k"] is None

    def test_map_and_prior_only(self, corpus, tmp_path):
        t = corpus / "test"
        assert self.fit(corpus, tmp_path / "model.json") == 0
        gt = read(t / "ground_truth.json")["annotations"]
        frame = gt[len(gt) // 2]["frame"]
        for flags in ((), ("--prior-only",)):
            assert run("predict", "--model", tmp_path / "model.json", "--activations",
                       t / "acts.json", "--annotation", frame, *flags,
                       "--out", tmp_path / "p.json") == 0
            assert len(read(tmp_path / "p.json")["predictions"]) > 0

    def test_fused(self, corpus, tmp_path):
        t = corpus / "test"
        second = ("--secondary", corpus / "train0" / "acts2.json", corpus / "train1" / "acts2.json",
                  "--pairing", corpus / "train0" / "pairing.json")
        assert self.fit(corpus, tmp_path / "model.json", "--top-k", "all", *second) == 0
        assert any("+" in str(e["poselet"]) for e in read(tmp_path / "model.json")["likelihoods"])
        assert run("predict", "--model", tmp_path / "model.json", "--activations", t / "acts.json",
                   "--secondary", t / "acts2.json", "--pairing", t / "pairing.json",
                   "--out", tmp_path / "p.json") == 0

    def test_predict_without_model(self, corpus, tmp_path, capsys):
        acts = corpus / "test" / "acts.json"
        assert run("predict", "--activations", acts, "--out", tmp_path / "p.json") == 1
        assert "MissingModel" in capsys.readouterr().err
        assert run("predict", "--model", tmp_path / "none.json", "--activations", acts,
                   "--out", tmp_path / "p.json") == 1
        assert "MissingModel" in capsys.readouterr().err
        assert not (tmp_path / "p.json").exists()

    def test_config_file_with_override(self, corpus, tmp_path):
        (tmp_path / "cfg.json").write_text(json.dumps({"smooth_sigma": 3.0, "seed": 5}))
        assert run("activations", "--config", tmp_path / "cfg.json", "--seed", 11, "--scores",
                   corpus / "test" / "scores.csv", "--out", tmp_path / "a.json") == 0
        cfg = read(tmp_path / "a.json")["config"]
        assert (cfg["smooth_sigma"], cfg["seed"]) == (3.0, 11)

    def test_mismatched_files_are_data_errors(self, corpus, tmp_path, capsys):
        assert run("fit-keypose", "--activations", corpus / "test" / "acts.json",
                   "--ground-truth", corpus / "test" / "ground_truth.json",
                   corpus / "train0" / "ground_truth.json", "--out", tmp_path / "m.json") == 1
        (tmp_path / "bad.csv").write_text("time,a\n0,1\n")
        assert run("activations", "--scores", tmp_path / "bad.csv", "--out", tmp_path / "a.json") == 1
        assert "FormatError" in capsys.readouterr().err


class TestImagePipeline:
    def test_render_cluster_train_score(self, tmp_path):
        assert run("synth", "--seed", 0, "--period", 20, "--duration", 200, "--n-poselets", 1,
                   "--render", 120, "--out", tmp_path / "train") == 0
        assert run("synth", "--seed", 1, "--period", 20, "--duration", 200, "--n-poselets", 1,
                   "--render", 100, "--out", tmp_path / "test") == 0
        assert run("cluster", "--configs", tmp_path / "train" / "configurations.json", "--k", 4,
                   "--out", tmp_path / "clusters.json") == 0
        assert run("train-detectors", "--frames", tmp_path / "train" / "frames", "--configs",
                   tmp_path / "train" / "configurations.json", "--clusters", tmp_path / "clusters.json",
                   "--epochs", 10, "--out", tmp_path / "mixture.json") == 0
        assert len(read(tmp_path / "mixture.json")["training_accuracy"]) == 5
        assert run("score", "--mixture", tmp_path / "mixture.json", "--frames",
                   tmp_path / "test" / "frames", "--out", tmp_path / "scores.csv") == 0
        assert run("activations", "--scores", tmp_path / "scores.csv", "--smooth-sigma", 1.0,
                   "--out", tmp_path / "acts.json") == 0
        acts = read(tmp_path / "acts.json")
        assert abs(acts["f_stroke"] - 20) <= 1 and len(acts["series"]) == 4


class TestUsage:
    @pytest.mark.parametrize("argv", [
        [], ["nonsense"], ["synth"], ["evaluate", "--out", "x"], ["activations", "--scores", "s",
                                                                 "--out", "o", "--top-k", "0"],
        ["activations", "--scores", "s", "--out", "o", "--mode", "diagonal"],
        ["predict", "--activations", "a", "--out", "o", "--prior-only"],
    ])
    def test_exit_two(self, argv):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2

    def test_invalid_config_value_is_data_error(self, tmp_path, capsys):
        assert run("synth", "--gamma", -1, "--out", tmp_path) == 1
        assert "InvalidConfig" in capsys.readouterr().err

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "keypose", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "fit-keypose" in res.stdout
        res = subprocess.run([sys.executable, "-m", "keypose", "bogus"], capture_output=True, text=True)
        assert res.returncode == 2
