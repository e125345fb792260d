import io
import json

import pandas as pd
import pytest

from main import main
from src.app import EstimateCommandConfig, NetworkEffectsApp, parse_graph_family, parse_known_sigma
from src.services.report_service import SUMMARY_COLUMNS
from src.utils.errors import ValidationError
from src.utils.logger import DEFAULT_LOG_FILE, current_log_file, set_log_file

ESTIMATE_KEYS = {
    "estimator", "psi", "se", "ci", "alpha", "beta_a", "beta_as", "f_bar",
    "spillover", "vcov", "n", "dropped", "warnings", "diagnostics",
}


def toy_estimate_args(toy_paths, *extra):
    return [
        "estimate",
        "--data", toy_paths["units"],
        "--edges", toy_paths["edges"],
        "--directed",
        "--covariates", "L",
        *extra,
    ]


class TestParsers:
    def test_graph_family(self):
        assert parse_graph_family("er:0.05") == ("er", 0.05, False)
        assert parse_graph_family("er:0.05:directed") == ("er", 0.05, True)
        assert parse_graph_family("ws") == ("ws", 0.0, False)
        with pytest.raises(ValidationError):
            parse_graph_family("er")
        with pytest.raises(ValidationError):
            parse_graph_family("er:0.1:sideways")

    def test_known_sigma(self):
        assert parse_known_sigma("3, 1.5") == (3.0, 1.5)
        with pytest.raises(ValidationError):
            parse_known_sigma("3")

    def test_command_config_invariants(self):
        with pytest.raises(ValidationError, match="needs at least one --edges"):
            EstimateCommandConfig(data_path="u.csv", estimator="multi").validate()
        with pytest.raises(ValidationError, match="--degree-column"):
            EstimateCommandConfig(data_path="u.csv", estimator="partial").validate()
        with pytest.raises(ValidationError, match="two --edges"):
            EstimateCommandConfig(data_path="u.csv", edges_paths=("e.csv",), compare=True).validate()
        EstimateCommandConfig(data_path="u.csv", estimator="partial", degree_column="F").validate()


class TestEstimateCommand:
    def test_toy_full_json(self, toy_paths, tmp_path, capsys):
        out = tmp_path / "full.json"
        assert main(toy_estimate_args(toy_paths, "--out", str(out))) == 0
        payload = json.loads(out.read_text(encoding="utf-8"))
        assert set(payload) == ESTIMATE_KEYS
        assert payload["estimator"] == "full"
        assert payload["psi"] == pytest.approx(4.0, abs=1e-8)
        assert payload["f_bar"] == pytest.approx([3.0])
        assert payload["n"] == 20
        assert json.loads(json.dumps(payload)) == payload
        assert "full: psi = 4" in capsys.readouterr().out

    def test_naive_differs_by_mean_degree(self, toy_paths, tmp_path):
        full_out = tmp_path / "full.json"
        naive_out = tmp_path / "naive.json"
        assert main(toy_estimate_args(toy_paths, "--out", str(full_out))) == 0
        assert main(toy_estimate_args(toy_paths, "--estimator", "naive", "--out", str(naive_out))) == 0
        full = json.loads(full_out.read_text(encoding="utf-8"))
        naive = json.loads(naive_out.read_text(encoding="utf-8"))
        assert naive["psi"] - full["psi"] == pytest.approx(-3.0, abs=1e-8)

    def test_partial_from_edges(self, toy_paths, tmp_path):
        out = tmp_path / "partial.json"
        assert main(toy_estimate_args(toy_paths, "--estimator", "partial", "--out", str(out))) == 0
        assert json.loads(out.read_text(encoding="utf-8"))["psi"] == pytest.approx(4.0, abs=1e-8)

    def test_csv_output(self, toy_paths, tmp_path):
        out = tmp_path / "full.csv"
        assert main(toy_estimate_args(toy_paths, "--vcov", "hc5", "--out", str(out))) == 0
        frame = pd.read_csv(out)
        assert list(frame.columns[:4]) == ["estimator", "psi", "se", "ci_lower"]
        assert frame.loc[0, "vcov"] == "hc5"

    def test_config_file_sets_vcov(self, toy_paths, tmp_path, write_csv):
        config = write_csv("run.toml", '[estimate]\nvcov = "hc1"\n')
        out = tmp_path / "full.json"
        assert main(toy_estimate_args(toy_paths, "--config", config, "--out", str(out))) == 0
        assert json.loads(out.read_text(encoding="utf-8"))["vcov"] == "hc1"

    def test_graph_family_diagnostic(self, toy_paths, tmp_path):
        out = tmp_path / "full.json"
        assert main(toy_estimate_args(toy_paths, "--graph-family", "ws", "--out", str(out))) == 0
        diagnostics = json.loads(out.read_text(encoding="utf-8"))["diagnostics"]
        assert diagnostics["graph_family"] == "ws"
        assert diagnostics["variance_bias"] == 0.0

    def test_missing_column_is_a_data_error(self, toy_paths, capsys):
        assert main(toy_estimate_args(toy_paths, "--covariates", "Z")) == 3
        assert "missing column 'Z'" in capsys.readouterr().err

    def test_bad_cell_reports_line(self, write_csv, toy_paths, capsys):
        data = write_csv("units.csv", "Y,A\n1,0\n2,oops\n")
        assert main(["estimate", "--data", data, "--estimator", "naive"]) == 3
        assert "line 3" in capsys.readouterr().err

    def test_graph_larger_than_data(self, write_csv, capsys):
        data = write_csv("units.csv", "Y,A\n1,0\n2,1\n3,0\n4,1\n")
        edges = write_csv("edges.csv", "src,dst\n0,7\n")
        assert main(["estimate", "--data", data, "--edges", edges]) == 3
        assert "out of range" in capsys.readouterr().err

    def test_extra_power_adds_a_network(self, toy_paths, tmp_path):
        out = tmp_path / "multi.json"
        assert main(toy_estimate_args(toy_paths, "--extra-power", "2", "--out", str(out))) == 0
        payload = json.loads(out.read_text(encoding="utf-8"))
        assert payload["estimator"] == "multi"
        assert len(payload["f_bar"]) == 2
        assert payload["psi"] == pytest.approx(4.0, abs=1e-8)

    def test_extra_power_needs_full_model(self, toy_paths):
        assert main(toy_estimate_args(toy_paths, "--estimator", "naive", "--extra-power", "2")) == 2
        assert main(toy_estimate_args(toy_paths, "--extra-power", "1")) == 2

    def test_compare_needs_two_graphs(self, toy_paths):
        assert main(toy_estimate_args(toy_paths, "--compare")) == 2

    def test_app_returns_payload(self, toy_paths):
        stdout = io.StringIO()
        app = NetworkEffectsApp(stdout=stdout)
        config = EstimateCommandConfig(
            data_path=toy_paths["units"],
            edges_paths=(toy_paths["edges"], toy_paths["edges"]),
            covariates=("L",),
            directed=True,
            estimator="multi",
        )
        payload = app.cmd_estimate(config)
        assert payload["estimator"] == "multi"
        assert payload["beta_as"][1] == 0.0
        assert "warning: spillover column G2:A" in stdout.getvalue()


class TestSimulateCommand:
    ARGS = ["simulate", "--graph", "er", "--p", "0.04", "--n", "100", "--reps", "3", "--seed", "1", "--threads", "1"]

    def test_reruns_are_byte_identical(self, tmp_path):
        first = tmp_path / "first.json"
        second = tmp_path / "second.json"
        assert main(self.ARGS + ["--out", str(first)]) == 0
        assert main(self.ARGS + ["--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
        report = json.loads(first.read_text(encoding="utf-8"))
        assert [s["estimator"] for s in report["summaries"]] == ["full", "partial", "naive"]
        assert len(report["replicates"]) == 9

    def test_csv_report(self, tmp_path):
        out = tmp_path / "report.csv"
        assert main(self.ARGS + ["--estimators", "full,naive", "--out", str(out)]) == 0
        frame = pd.read_csv(out)
        assert list(frame.columns) == SUMMARY_COLUMNS
        assert list(frame["estimator"]) == ["full", "naive"]

    def test_zero_reps_is_a_usage_error(self, capsys):
        assert main(["simulate", "--reps", "0"]) == 2
        assert "reps" in capsys.readouterr().err

    def test_ring_lattice_correlation_is_numerical_error(self, capsys):
        code = main(["simulate", "--graph", "ws", "--nei", "10", "--n", "100", "--errors", "corr",
                     "--a", "3", "--b", "1.5", "--reps", "1", "--threads", "1"])
        assert code == 4
        assert "shrink b or row-normalize G" in capsys.readouterr().err


class TestGraphInfoCommand:
    def test_empty_file_with_hint(self, write_csv, tmp_path, capsys):
        edges = write_csv("edges.csv", "")
        out = tmp_path / "info.json"
        assert main(["graph-info", "--edges", edges, "--n-hint", "3", "--out", str(out)]) == 0
        info = json.loads(out.read_text(encoding="utf-8"))
        assert info["n"] == 3
        assert info["W"] == 0.0
        assert info["f_bar"] == 0.0
        assert "n = 3, W = 0" in capsys.readouterr().out

    def test_three_node_graph(self, write_csv, capsys):
        edges = write_csv("edges.csv", "src,dst,weight\n0,1,1\n1,2,2\n")
        assert main(["graph-info", "--edges", edges]) == 0
        assert "n = 3, W = 6, F_bar = 2" in capsys.readouterr().out

    def test_row_normalized(self, write_csv, tmp_path):
        edges = write_csv("edges.csv", "src,dst,weight\n0,1,5\n")
        out = tmp_path / "info.json"
        assert main(["graph-info", "--edges", edges, "--n-hint", "4", "--normalize", "row", "--out", str(out)]) == 0
        assert json.loads(out.read_text(encoding="utf-8"))["f_bar"] == 0.5

    def test_power(self, write_csv, tmp_path):
        edges = write_csv("edges.csv", "src,dst\n0,1\n1,2\n")
        out = tmp_path / "info.json"
        assert main(["graph-info", "--edges", edges, "--power", "2", "--out", str(out)]) == 0
        info = json.loads(out.read_text(encoding="utf-8"))
        assert info["power"] == 2
        assert info["W"] == 2.0


class TestLogging:
    @pytest.fixture
    def restore_log_file(self):
        yield
        set_log_file(DEFAULT_LOG_FILE)

    def test_config_log_file_is_used(self, write_csv, tmp_path, restore_log_file):
        log_path = tmp_path / "logs" / "run.log"
        config = write_csv("run.toml", f'[logging]\nfile = "{log_path.as_posix()}"\n')
        edges = write_csv("edges.csv", "src,dst\n0,1\n")
        assert main(["graph-info", "--edges", edges, "--config", config]) == 0
        assert current_log_file() == log_path.resolve()
        assert log_path.exists()
