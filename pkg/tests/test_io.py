from __future__ import annotations

import json

import numpy as np
import pytest

from keypose import io
from keypose.activations import ActivationSeries, StrokeEstimate
from keypose.config import PipelineConfig
from keypose.errors import FormatError
from keypose.evaluation import curve, match
from keypose.features import GrayImage, PoseletFilter
from keypose.geometry import JointConfiguration, kmeans_temporal
from keypose.model import KeyPoseModel, OccurrencePrediction, PoseletLikelihood
from keypose.pictorial import DeformationParams, Part, PoseletMixture
from keypose.pipeline import VideoAnalysis

CFG = PipelineConfig(seed=9).to_dict()


class TestPgm:
    def test_round_trip(self, tmp_path):
        px = np.arange(12, dtype=float).reshape(3, 4) / 11
        io.write_pgm(tmp_path / "a.pgm", GrayImage(px))
        back = io.read_pgm(tmp_path / "a.pgm").pixels
        np.testing.assert_allclose(back, np.round(px * 255) / 255)

    def test_header_comment(self, tmp_path):
        (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 1\n255\n" + bytes([0, 255]))
        np.testing.assert_array_equal(io.read_pgm(tmp_path / "c.pgm").pixels, [[0.0, 1.0]])

    @pytest.mark.parametrize("payload", [
        b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\n1 1\n65535\n\x00\x00", b"P5\n",
    ])
    def test_rejects(self, tmp_path, payload):
        (tmp_path / "bad.pgm").write_bytes(payload)
        with pytest.raises(FormatError):
            io.read_pgm(tmp_path / "bad.pgm")

    def test_frame_paths_sorted(self, tmp_path):
        for name in ("frame_00002.pgm", "frame_00000.pgm", "frame_00001.pgm"):
            io.write_pgm(tmp_path / name, GrayImage(np.zeros((2, 2))))
        assert [p.name for p in io.frame_paths(tmp_path)][0] == "frame_00000.pgm"


class TestScores:
    def test_round_trip_with_missing(self, tmp_path):
        s = np.array([[0.1, np.nan], [1 / 3, -2.5], [np.inf, 7.0]])
        io.write_scores(tmp_path / "s.csv", s, [3, 8], start_frame=10, config=CFG)
        values, ids, start = io.read_scores(tmp_path / "s.csv")
        assert ids == [3, 8] and start == 10
        np.testing.assert_array_equal(np.isnan(values), [[False, True], [False, False], [True, False]])
        assert values[1, 0] == 1 / 3
        assert io.config_of(tmp_path / "s.csv")["seed"] == 9

    def test_header_and_rows(self, tmp_path):
        io.write_scores(tmp_path / "s.csv", np.zeros((2, 1)))
        assert (tmp_path / "s.csv").read_text().splitlines() == ["frame,poselet_1", "0,0.0", "1,0.0"]

    @pytest.mark.parametrize("text", ["t,a\n0,1\n", "frame,p\n0,1,2\n", "frame,p\n0,x\n",
                                      "frame,p\n0,1\n2,1\n", "frame,p\n"])
    def test_rejects(self, tmp_path, text):
        (tmp_path / "s.csv").write_text(text)
        with pytest.raises(FormatError):
            io.read_scores(tmp_path / "s.csv")


class TestJsonArtifacts:
    def test_configurations(self, tmp_path):
        configs = [JointConfiguration(np.arange(6.0).reshape(3, 2) * k, k, "v") for k in (1, 2)]
        io.write_configurations(tmp_path / "c.json", configs, CFG)
        back = io.read_configurations(tmp_path / "c.json")
        assert [c.frame_index for c in back] == [1, 2] and back[0].video == "v"
        np.testing.assert_array_equal(back[1].joints, configs[1].joints)

    def test_clusters(self, tmp_path):
        rng = np.random.default_rng(0)
        res = kmeans_temporal([JointConfiguration(rng.normal(size=(3, 2)), 10 + i) for i in range(6)], 2)
        io.write_clusters(tmp_path / "k.json", res, CFG)
        back = io.read_clusters(tmp_path / "k.json")
        assert sorted(f for c in back for f in c["members"]) == list(range(10, 16))

    def test_mixture(self, tmp_path):
        rng = np.random.default_rng(1)
        mix = PoseletMixture(PoseletFilter(rng.normal(size=(2, 3, 9)), 0.5),
                             [Part(PoseletFilter(rng.normal(size=(2, 2, 9))),
                                   DeformationParams([1, 2], [[4, 1], [1, 3]]))], gamma=2.0)
        io.write_mixture(tmp_path / "m.json", mix, CFG)
        back = io.read_mixture(tmp_path / "m.json")
        np.testing.assert_array_equal(back.parts[0].filter.weights, mix.parts[0].filter.weights)
        assert back.gamma == 2.0 and io.config_of(tmp_path / "m.json") == CFG

    def test_filter(self, tmp_path):
        f = PoseletFilter(np.ones((1, 2, 3)), -1.0)
        io.write_filter(tmp_path / "f.json", f)
        assert io.read_filter(tmp_path / "f.json").bias == -1.0

    def test_activations(self, tmp_path):
        missing = np.zeros((300, 2), bool)
        missing[40:90, 1] = True
        analysis = VideoAnalysis([ActivationSeries(0, [10, 60, 110], n_frames=300),
                                  ActivationSeries("a+b", [5], n_frames=300)],
                                 StrokeEstimate(100.0, np.empty(0), np.empty(0), 800.0), missing, 300)
        io.write_activations(tmp_path / "a.json", analysis, CFG)
        doc = json.loads((tmp_path / "a.json").read_text())
        assert doc["series"][0]["goodness"] == 0.0 and doc["series"][1]["goodness"] is None
        assert doc["series"][1]["missing"] == [[40, 90]] and doc["f_stroke"] == 100.0
        back = io.read_activations(tmp_path / "a.json")
        assert back.f_stroke == 100.0 and [s.poselet for s in back.series] == [0, "a+b"]
        np.testing.assert_array_equal(back.missing, missing)

    def test_model(self, tmp_path):
        model = KeyPoseModel(0, "anti_symmetric", {2: PoseletLikelihood(2, 0.3, 0.02, 40)}, 5)
        io.write_model(tmp_path / "k.json", model, CFG)
        back = io.read_model(tmp_path / "k.json")
        assert back.likelihoods == model.likelihoods and back.top_k == 5

    def test_model_rejects(self, tmp_path):
        (tmp_path / "k.json").write_text('{"keypose": 0}')
        with pytest.raises(FormatError):
            io.read_model(tmp_path / "k.json")

    def test_predictions_bare_or_wrapped(self, tmp_path):
        preds = [OccurrencePrediction(12, 3, -4.5), OccurrencePrediction(60, 2, -1.0)]
        io.write_predictions(tmp_path / "p.json", preds, CFG, f_stroke=100.0)
        assert io.read_predictions(tmp_path / "p.json") == preds
        (tmp_path / "bare.json").write_text('[{"frame": 7, "support": 2, "logscore": 0.5}]')
        assert io.read_predictions(tmp_path / "bare.json") == [OccurrencePrediction(7, 2, 0.5)]

    def test_ground_truth(self, tmp_path):
        io.write_ground_truth(tmp_path / "g.json", [[30, 10], [20]])
        np.testing.assert_array_equal(io.read_ground_truth(tmp_path / "g.json"), [10, 20, 30])
        np.testing.assert_array_equal(io.read_ground_truth(tmp_path / "g.json", keypose=0), [10, 30])
        np.testing.assert_array_equal(io.read_ground_truth(tmp_path / "g.json", keypose="1"), [20])

    def test_curve(self, tmp_path):
        c = curve(match([100, 203], [100, 200], 10, 100.0), grid=[0.0, 0.03, 0.1])
        io.write_curve(tmp_path / "c.csv", c)
        x, r = io.read_curve(tmp_path / "c.csv")
        assert x.tolist() == [0.0, 0.03, 0.1] and r.tolist() == [0.5, 1.0, 1.0]

    @pytest.mark.parametrize("text", ["{not json", '{"x": 1}', '"scalar"'])
    def test_malformed(self, tmp_path, text):
        (tmp_path / "p.json").write_text(text)
        with pytest.raises(FormatError):
            io.read_predictions(tmp_path / "p.json")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError):
            io.load_json(tmp_path / "nope.json")
