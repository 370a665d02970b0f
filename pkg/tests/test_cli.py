"""End-to-end runs of the lutnet command line."""

import json

import numpy as np
import pytest

from conftest import random_windows, tiny_network
from lutnet.cli import main, read_windows
from lutnet.config_search import find_filter_pairs, rank_configs
from lutnet.errors import InputRangeError
from lutnet.ir import ConvParams, Linear, save_model
from lutnet.netlist import reference_forward


@pytest.fixture
def ecg_model(tmp_path, ecg_training):
    return save_model(ecg_training, tmp_path / "model.json")


@pytest.fixture
def tiny_model(tmp_path):
    return save_model(tiny_network(np.random.default_rng(2)), tmp_path / "tiny.json")


def _write_windows(path, windows):
    path.write_text("\n\n".join("\n".join(str(int(v)) for v in w) for w in windows) + "\n", encoding="utf-8")
    return path


class TestValidate:
    def test_valid(self, ecg_model, capsys):
        assert main(["validate", str(ecg_model)]) == 0
        assert "valid" in capsys.readouterr().out

    def test_invalid_network(self, tmp_path, capsys):
        spec = tiny_network(np.random.default_rng(2))
        layers = tuple(layer.model_copy(update={"out_features": 2}) if isinstance(layer, Linear) else layer
                       for layer in spec.layers)
        path = save_model(spec.model_copy(update={"layers": layers}), tmp_path / "bad.json")
        assert main(["validate", str(path)]) == 4
        assert "out_features=1" in capsys.readouterr().out

    def test_parse_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"phase": ', encoding="utf-8")
        assert main(["validate", str(path)]) == 3

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "absent.json")]) == 1


class TestCost:
    def test_ecg_total(self, ecg_model, tmp_path, capsys):
        out = tmp_path / "cost.json"
        assert main(["cost", str(ecg_model), "--out", str(out)]) == 0
        assert "total: 1867 LUTs" in capsys.readouterr().out
        assert json.loads(out.read_text(encoding="utf-8"))["total"] == 1867


class TestSearch:
    def test_whole_network_costs(self, tmp_path):
        out = tmp_path / "search.json"
        code = main(["search", "--filter", "12,6,12", "--architecture", "mitbih_af", "--score-threshold", "0",
                     "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text(encoding="utf-8"))
        configs = {tuple(c["tuple_form"]): c for c in doc["results"][0]["configs"]}
        assert configs[(12, 6, 12, 12, 1, 1, 12)]["network_cost"] == 5569
        assert all(c["network_cost"] <= 8000 for c in configs.values())

    def test_without_threshold_every_config_within_budget_is_listed(self, tmp_path, capsys):
        """The depthwise separable split of (12, 6, 12) scores about 1.49 and is still listed."""
        out = tmp_path / "search.json"
        assert main(["search", "--filter", "12,6,12", "--phi-max", "12", "--out", str(out)]) == 0
        expected = rank_configs(find_filter_pairs(ConvParams(c=12, k=6, f=12), 12), cost_budget=8000)
        doc = json.loads(out.read_text(encoding="utf-8"))
        listed = {tuple(c["tuple_form"]) for c in doc["results"][0]["configs"]}
        assert doc["score_threshold"] is None
        assert (12, 6, 12, 12, 1, 1, 12) in listed
        assert listed == {s.tuple_form for s in expected}
        assert f"{len(listed)} of " in capsys.readouterr().out

    def test_score_threshold_flag(self, tmp_path):
        out = tmp_path / "search.json"
        assert main(["search", "--filter", "12,6,12", "--score-threshold", "5", "--out", str(out)]) == 0
        configs = json.loads(out.read_text(encoding="utf-8"))["results"][0]["configs"]
        assert all(c["score"] > 5 for c in configs)
        assert [12, 6, 12, 12, 1, 1, 12] not in [c["tuple_form"] for c in configs]

    def test_architecture_needs_a_hidden_filter(self):
        assert main(["search", "--filter", "12,5,12", "--architecture", "mitbih_af"]) == 6

    def test_zero_phi_max(self):
        assert main(["search", "--filter", "12,6,12", "--phi-max", "0"]) == 2

    def test_malformed_filter(self):
        assert main(["search", "--filter", "12,6"]) == 2


class TestCompileAndSimulate:
    def test_decisions_match_the_reference(self, tmp_path, ecg_model, ecg_training):
        build = tmp_path / "build"
        assert main(["compile", str(ecg_model), "--out", str(build)]) == 0
        assert (build / "netlist.json").exists() and (build / "model.deployment.json").exists()
        assert (build / "tables" / "split1.alpha.lutt").exists()

        windows = random_windows(np.random.default_rng(4), 3, 311, 12)
        data = _write_windows(tmp_path / "samples.txt", windows)
        out = tmp_path / "decisions.json"
        assert main(["simulate", str(build), str(data), "--out", str(out)]) == 0
        decisions = [w["decision"] for w in json.loads(out.read_text(encoding="utf-8"))["windows"]]
        assert decisions == [int(reference_forward(ecg_training, w).decision) for w in windows]

    def test_capacity(self, tmp_path, ecg_model):
        assert main(["compile", str(ecg_model), "--out", str(tmp_path / "b"), "--fan-in-cap", "8"]) == 5

    def test_sample_out_of_range(self, tmp_path, tiny_model):
        build = tmp_path / "build"
        assert main(["compile", str(tiny_model), "--out", str(build)]) == 0
        data = _write_windows(tmp_path / "samples.txt", [[0] * 20 + [8]])
        assert main(["simulate", str(build / "netlist.json"), str(data)]) == 6

    def test_read_windows(self, tmp_path):
        path = tmp_path / "s.txt"
        path.write_text("1\n-2\n\n\n3\n", encoding="utf-8")
        assert [w.tolist() for w in read_windows(path)] == [[1, -2], [3]]
        path.write_text("1\nx\n", encoding="utf-8")
        with pytest.raises(InputRangeError):
            read_windows(path)


class TestVerifyAndEmit:
    def test_verify_is_reproducible(self, tiny_model, capsys):
        args = ["verify", str(tiny_model), "--count", "10", "--seed", "5", "--window-length", "24"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first
        assert json.loads(first)["passed"] is True

    def test_emit(self, tmp_path, tiny_model):
        out = tmp_path / "hdl"
        assert main(["emit", str(tiny_model), "--out", str(out), "--count", "5"]) == 0
        assert (out / "top.vhd").exists() and (out / "tb_top.vhd").exists()
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert report["verification"]["passed"] is True
        assert report["cycles"] == report["window_length"] + report["pipeline_depth"]
