"""
Unit tests for configuration loading and statistical helpers
Run with: pytest test_config.py
"""

import json
import logging
from pathlib import Path

import numpy as np
import pytest

from config import ExperimentConfig, LabConfig, load_mapping, parse_flat_config
from errors import ConfigError, InvalidParameterError
from experiments import EXPERIMENTS
from utils import (
    check_probability, derive_seed, isotonic_regression, mean_confidence, read_csv_rows, setup_logging,
    size_threshold, stream_generator, wilson_arrays, wilson_interval, write_csv,
)

SCHEMA = {
    "n": (int, 100, lambda v: v >= 2),
    "c": (float, 2.0, lambda v: v > 0),
    "sizes": (list, [16, 32], None),
}


class TestFlatConfig:
    """Test the flat typed key-value format"""

    def test_typed_values(self):
        text = """
        # comment
        name:str = kn-box-k2
        seed:int = 7
        params.c:float = 2.5
        params.sizes:ints = 16, 32
        graph.generators:json = [[1, 0], [0, 1]]
        progress:bool = yes
        """
        data = parse_flat_config(text)
        assert data["name"] == "kn-box-k2"
        assert data["seed"] == 7
        assert data["params"] == {"c": 2.5, "sizes": [16, 32]}
        assert data["graph"]["generators"] == [[1, 0], [0, 1]]
        assert data["progress"] is True

    @pytest.mark.parametrize("line", [
        "seed = 7",
        "seed:int 7",
        "seed:int = seven",
        "seed:complex = 1",
    ])
    def test_malformed(self, line):
        with pytest.raises(ConfigError):
            parse_flat_config(line)

    def test_duplicate_key(self):
        with pytest.raises(ConfigError):
            parse_flat_config("seed:int = 1\nseed:int = 2")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_mapping(str(tmp_path / "absent.yaml"))

    def test_unsupported_suffix(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("x = 1")
        with pytest.raises(ConfigError):
            load_mapping(str(path))


class TestLabConfig:
    """Test tool-wide settings"""

    def test_default_config(self):
        config = LabConfig()
        assert config.threads == 1
        assert config.confidence == 0.95
        assert config.oracle_max_edges == 22
        assert config.validate() is True

    def test_config_validation(self):
        config = LabConfig()
        config.confidence = 1.2
        with pytest.raises(ConfigError):
            config.validate()
        config = LabConfig(threshold_batch=100, threshold_budget=50)
        with pytest.raises(ConfigError):
            config.validate()

    def test_yaml_round_trip(self, tmp_path):
        path = tmp_path / "lab.yaml"
        LabConfig(threads=4, inner_replicas=32).to_file(str(path))
        loaded = LabConfig.from_file(str(path))
        assert loaded.threads == 4
        assert loaded.inner_replicas == 32

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "lab.json"
        path.write_text(json.dumps({"threads": 2, "colour": "blue"}))
        with pytest.raises(ConfigError):
            LabConfig.from_file(str(path))


class TestExperimentConfig:
    """Test experiment configuration validation and merging"""

    def test_from_flat_file(self, tmp_path):
        path = tmp_path / "run.txt"
        path.write_text("name:str = kn-giant\nseed:int = 3\nparams.n:int = 50\n")
        config = ExperimentConfig.from_file(str(path))
        assert config.name == "kn-giant"
        assert config.params == {"n": 50}

    def test_name_required(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 1}))
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(str(path))

    def test_int_coerced_to_float(self):
        config = ExperimentConfig(name="x", params={"c": 3})
        assert config.validate(SCHEMA)
        assert config.params["c"] == 3.0
        assert isinstance(config.params["c"], float)

    @pytest.mark.parametrize("params", [
        {"n": 1},
        {"n": 2.5},
        {"c": -1.0},
        {"beta": 0.3},
    ])
    def test_rejects(self, params):
        with pytest.raises(ConfigError):
            ExperimentConfig(name="x", params=params).validate(SCHEMA)

    def test_seed_range(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(name="x", seed=-1).validate(SCHEMA)

    def test_merged_overrides(self):
        config = ExperimentConfig(name="x", params={"n": 10, "c": 1.0}, seed=1)
        merged = config.merged({"params": {"c": 2.0}, "seed": None, "replicas": 5})
        assert merged.params == {"n": 10, "c": 2.0}
        assert merged.seed == 1
        assert merged.replicas == 5
        assert config.params["c"] == 1.0

    def test_resolved_params(self):
        config = ExperimentConfig(name="x", params={"n": 10})
        assert config.resolved_params(SCHEMA) == {"n": 10, "c": 2.0, "sizes": [16, 32]}

    def test_example_config(self):
        """The shipped example validates against its experiment schema"""
        config = ExperimentConfig.from_file(str(Path(__file__).parent / "example_config.txt"))
        assert config.name == "kn-box-k2"
        assert config.validate(EXPERIMENTS[config.name].schema)


class TestStreams:
    """Test counter-based random streams"""

    def test_reproducible(self):
        a = stream_generator(5, 3).random(4)
        b = stream_generator(5, 3).random(4)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        assert not np.array_equal(stream_generator(5, 3).random(4), stream_generator(5, 4).random(4))
        assert not np.array_equal(stream_generator(5, 3).random(4), stream_generator(6, 3).random(4))

    def test_derive_seed(self):
        assert derive_seed(1, "curve", 0.5) == derive_seed(1, "curve", 0.5)
        assert derive_seed(1, "curve", 0.5) != derive_seed(1, "curve", 0.25)
        assert 0 <= derive_seed(2 ** 64 - 1, "x") < 2 ** 64


class TestStatistics:
    """Test interval and regression helpers"""

    def test_wilson_half(self):
        estimate, lo, hi = wilson_interval(5, 10)
        assert estimate == 0.5
        assert lo == pytest.approx(0.2366, abs=1e-4)
        assert hi == pytest.approx(0.7634, abs=1e-4)

    def test_wilson_extremes(self):
        _, lo, hi = wilson_interval(0, 20)
        assert lo == 0.0 and 0 < hi < 0.2
        _, lo, hi = wilson_interval(20, 20)
        assert 0.8 < lo < 1 and hi == pytest.approx(1.0)

    def test_wilson_arrays_match_scalar(self):
        est, lo, hi = wilson_arrays(np.array([3, 7]), np.array([10, 10]))
        for i, k in enumerate((3, 7)):
            assert (est[i], lo[i], hi[i]) == pytest.approx(wilson_interval(k, 10))

    def test_isotonic_pools_violators(self):
        fit = isotonic_regression([0.1, 0.3, 0.2, 0.6])
        assert fit.tolist() == pytest.approx([0.1, 0.25, 0.25, 0.6])

    def test_isotonic_weights(self):
        fit = isotonic_regression([0.4, 0.1], [3, 1])
        assert fit.tolist() == pytest.approx([0.325, 0.325])

    def test_isotonic_keeps_monotone(self):
        values = [0.0, 0.2, 0.2, 0.9]
        assert isotonic_regression(values).tolist() == values

    def test_mean_confidence(self):
        mean, lo, hi = mean_confidence([1.0, 2.0, 3.0])
        assert mean == 2.0
        assert lo < 2.0 < hi

    def test_size_threshold(self):
        assert size_threshold(0.5, 16) == 8
        assert size_threshold(0.3, 10) == 3
        assert size_threshold(1e-6, 10) == 1

    def test_check_probability(self):
        assert check_probability(0.0) == 0.0
        with pytest.raises(InvalidParameterError):
            check_probability(0.0, open_low=True)
        with pytest.raises(InvalidParameterError):
            check_probability(float("nan"))


class TestCsv:
    """Test CSV output with provenance comments"""

    def test_write_and_read(self, tmp_path):
        path = tmp_path / "rows.csv"
        with open(path, "w", encoding="utf-8") as f:
            write_csv(f, [{"p": 0.1, "f": 0.0}, {"p": 0.2, "f": 0.5}], header={"seed": 7})
        text = path.read_text()
        assert text.startswith("# seed: 7\n")
        rows = read_csv_rows(str(path))
        assert rows == [{"p": "0.1", "f": "0.0"}, {"p": "0.2", "f": "0.5"}]


class TestLogging:
    """Test logging setup"""

    def test_repeated_setup_replaces_handlers(self, tmp_path):
        root = logging.getLogger()
        log_file = tmp_path / "run.log"
        try:
            setup_logging(logging.INFO)
            setup_logging(logging.DEBUG, str(log_file))
            own = [h for h in root.handlers if getattr(h, "_percolab", False)]
            assert len(own) == 2
            assert root.level == logging.DEBUG
            logging.getLogger("percolab.test").debug("file handler message")
            for handler in own:
                handler.flush()
            assert "file handler message" in log_file.read_text(encoding="utf-8")
        finally:
            for handler in list(root.handlers):
                if getattr(handler, "_percolab", False):
                    root.removeHandler(handler)
                    handler.close()
            root.setLevel(logging.WARNING)
