"""
Tests for the command-line surface
Run with: pytest test_cli.py
"""

import json
import logging

import pytest

import graphs
import runner
from main import main
from utils import read_csv_rows


@pytest.fixture(autouse=True)
def reset_process_state():
    """main() configures the replica runner and logging handlers for the whole process"""
    yield
    runner.configure(threads=1, progress=False)
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_percolab", False):
            root.removeHandler(handler)
            handler.close()


def error_lines(err: str):
    return [line for line in err.splitlines() if line.startswith("error kind=")]


class TestGraphCommands:
    """Test gen, sim and structure subcommands"""

    def test_gen_torus(self, capsys):
        assert main(["gen", "--family", "torus", "--dims", "4,4"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["n_vertices"] == 16
        assert len(data["edges"]) == 32

    def test_gen_describe(self, capsys):
        assert main(["gen", "--family", "hypercube", "--d", "3", "--describe"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["diameter_lower"] == data["diameter_upper"] == 3
        assert data["problems"] == []

    def test_gen_then_load(self, tmp_path, capsys):
        path = tmp_path / "graph.json"
        assert main(["gen", "--family", "cycle", "--n", "6", "-o", str(path)]) == 0
        assert main(["separator", "--graph-json", str(path), "--theta", "0.5"]) == 0
        assert json.loads(capsys.readouterr().out)["cut_size"] == 2

    def test_sim_rows(self, capsys):
        assert main(["sim", "--family", "complete", "--n", "10", "--p", "0.5",
                     "--replicas", "5", "--alpha", "0.5"]) == 0
        rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert [row["replica"] for row in rows] == [0, 1, 2, 3, 4]
        assert all("k1_at_least_alpha" in row for row in rows)

    def test_separator(self, capsys):
        assert main(["separator", "--family", "complete", "--n", "6"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["cut_size"] == 8
        assert data["side_a"] == [1, 2]

    def test_molecular(self, capsys):
        assert main(["molecular", "--family", "kn-box-k2", "--n", "10", "--c-bound", "2"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["molecular"]["m"] == 2
        assert data["separator_witness"]["cut_size"] == 10

    def test_config_file_supplies_graph(self, tmp_path, capsys):
        path = tmp_path / "sim.yaml"
        path.write_text("name: sim\ngraph:\n  family: cycle\n  n: 5\nparams:\n  p: 1.0\nreplicas: 2\n")
        assert main(["sim", "--config", str(path)]) == 0
        rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert [row["k1"] for row in rows] == [5, 5]

    def test_config_file_rejects_unknown_param(self, tmp_path, capsys):
        path = tmp_path / "sim.yaml"
        path.write_text("name: sim\ngraph:\n  family: cycle\n  n: 5\nparams:\n  p: 1.0\n  replicate: 3\n")
        assert main(["sim", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "kind=invalid-config" in err
        assert "replicate" in err


class TestEstimatorCommands:
    """Test curve and threshold subcommands"""

    def test_curve_csv(self, tmp_path):
        path = tmp_path / "curve.csv"
        assert main(["curve", "--family", "complete", "--n", "2", "--alpha", "1", "--points", "11",
                     "--replicas", "20", "--seed", "4", "--format", "csv", "-o", str(path)]) == 0
        assert path.read_text().startswith("# version: ")
        rows = read_csv_rows(str(path))
        assert len(rows) == 11

    def test_curve_sidecar(self, tmp_path):
        path = tmp_path / "curve.csv"
        assert main(["curve", "--family", "cycle", "--n", "4", "--alpha", "0.75", "--points", "5",
                     "--replicas", "20", "--seed", "4", "--format", "csv", "-o", str(path)]) == 0
        sidecar = json.loads((tmp_path / "curve.summary.json").read_text())
        assert sidecar["seed"] == 4
        assert sidecar["params"]["replicas"] == 20
        assert sidecar["params"]["p_grid"] == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert sidecar["graph"]["family"] == "cycle"
        assert len(sidecar["graph"]["edges"]) == 4

    def test_threshold_csv_row(self, tmp_path):
        path = tmp_path / "threshold.csv"
        assert main(["threshold", "--family", "cycle", "--n", "4", "--alpha", "0.75",
                     "--delta", "0.5", "--seed", "2", "--format", "csv", "-o", str(path)]) in (0, 3)
        rows = read_csv_rows(str(path))
        assert len(rows) == 1
        assert 0 < float(rows[0]["p_hat"]) < 1
        assert float(rows[0]["p_lo"]) <= float(rows[0]["p_hat"]) <= float(rows[0]["p_hi"])
        sidecar = json.loads((tmp_path / "threshold.summary.json").read_text())
        assert sidecar["params"]["delta"] == 0.5
        assert sidecar["graph_digest"] == graphs.cycle(4).digest

    def test_inconclusive_threshold(self, tmp_path, capsys):
        """The single-edge curve is exactly f(p) = p, so a 64-sweep budget cannot resolve 0.3"""
        lab = tmp_path / "lab.json"
        lab.write_text(json.dumps({"threshold_budget": 64}))
        code = main(["threshold", "--family", "complete", "--n", "2", "--alpha", "1",
                     "--delta", "0.3", "--lab-config", str(lab)])
        assert code == 3
        data = json.loads(capsys.readouterr().out)
        assert data["inconclusive"] is True
        assert data["p_hat"] == pytest.approx(0.3, abs=1e-6)


class TestErrors:
    """Test exit codes and the single error line"""

    def test_invalid_probability(self, capsys):
        code = main(["sim", "--family", "cycle", "--n", "5", "--p", "1.5"])
        assert code == 2
        lines = error_lines(capsys.readouterr().err)
        assert len(lines) == 1
        assert lines[0].startswith("error kind=invalid-parameter message=")

    def test_bad_flag_value(self, capsys):
        assert main(["gen", "--family", "torus", "--dims", "four"]) == 2
        assert error_lines(capsys.readouterr().err)[0].startswith("error kind=invalid-config")

    def test_unknown_command(self, capsys):
        assert main(["percolate"]) == 2

    def test_missing_graph(self, capsys):
        assert main(["sim", "--p", "0.5"]) == 2

    def test_size_limit(self, capsys):
        assert main(["separator", "--family", "torus", "--dims", "8,8"]) == 4
        assert error_lines(capsys.readouterr().err)[0].startswith("error kind=size-limit")

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["sim", "--config", str(tmp_path / "absent.yaml")]) == 2


class TestExperiments:
    """Test named experiment runs"""

    def test_kn_box_k2(self, tmp_path):
        out = tmp_path / "kn.jsonl"
        code = main(["experiment", "kn-box-k2", "--n", "20", "--replicas", "50", "--seed", "7",
                     "-o", str(out)])
        assert code == 0
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(rows) == 50
        assert {"bridge_empty", "k2_at_least_beta"} <= set(rows[0])
        sidecar = json.loads((tmp_path / "kn.summary.json").read_text())
        assert sidecar["experiment"] == "kn-box-k2"
        assert sidecar["seed"] == 7
        assert sidecar["summary"]["bridge_empty_exact"] == pytest.approx(0.9 ** 20)
        assert len(sidecar["graph_digests"]) == 1

    def test_rows_independent_of_threads(self, tmp_path):
        texts = []
        for threads in ("1", "3"):
            out = tmp_path / f"giant-{threads}.jsonl"
            assert main(["experiment", "kn-giant", "--n", "60", "--replicas", "30", "--seed", "11",
                         "--threads", threads, "-o", str(out)]) == 0
            texts.append(out.read_text())
        assert texts[0] == texts[1]

    def test_stdout_has_sidecar_line(self, capsys):
        assert main(["experiment", "torus2d-k2", "--sizes", "4,6", "--replicas", "5"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 3
        assert json.loads(lines[-1])["experiment"] == "torus2d-k2"

    def test_stdout_repeats_exactly(self, capsys):
        outputs = []
        for _ in range(2):
            assert main(["experiment", "torus2d-k2", "--sizes", "4,6", "--replicas", "5",
                         "--seed", "9"]) == 0
            outputs.append(capsys.readouterr().out)
        assert outputs[0] == outputs[1]
        assert "wall_clock_seconds" not in outputs[0]

    def test_param_flag(self, tmp_path):
        out = tmp_path / "chain.jsonl"
        assert main(["experiment", "molecular-chain", "--param", "n=16", "--param", "c=1",
                     "--replicas", "10", "-o", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 10

    def test_schema_rejects_unknown_param(self, capsys):
        assert main(["experiment", "kn-giant", "--param", "colour=3"]) == 2

    def test_sharpness_scan(self, tmp_path):
        out = tmp_path / "sharp.jsonl"
        assert main(["experiment", "sharpness-scan", "--family", "complete", "--sizes", "50,200",
                     "--param", "delta=0.25", "--replicas", "2000", "--seed", "3",
                     "-o", str(out)]) in (0, 3)
        rows = [json.loads(line) for line in out.read_text().splitlines()]
        assert [row["n"] for row in rows] == [50, 200]
        for row in rows:
            assert 0 < row["ratio_lo"] <= row["ratio"] <= row["ratio_hi"] < 10
        summary = json.loads((tmp_path / "sharp.summary.json").read_text())["summary"]
        assert summary["monotone_decreasing"] is True

    @pytest.mark.slow
    def test_sharpness_brackets_separate(self, capsys):
        """Ratio brackets on K_25 and K_400 do not overlap"""
        main(["experiment", "sharpness-scan", "--family", "complete", "--sizes", "25,400",
              "--param", "delta=0.25", "--replicas", "20000", "--seed", "5"])
        summary = json.loads(capsys.readouterr().out.splitlines()[-1])["summary"]
        assert summary["monotone_decreasing"] is True
        assert summary["extreme_brackets_disjoint"] is True

    def test_config_name_mismatch(self, tmp_path, capsys):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"name": "kn-giant"}))
        assert main(["experiment", "kn-box-k2", "--config", str(path)]) == 2

    def test_graph_section_rejected(self, tmp_path, capsys):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"name": "kn-giant", "graph": {"family": "cycle", "n": 5}}))
        assert main(["experiment", "kn-giant", "--config", str(path)]) == 2

    @pytest.mark.slow
    def test_oracle_validate(self, capsys):
        assert main(["oracle-validate", "--replicas", "4000", "--seed", "1"]) == 0
        assert json.loads(capsys.readouterr().out)["passed"] is True
