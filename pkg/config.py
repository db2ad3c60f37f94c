"""
Configuration management for the percolation laboratory
"""

import json
from dataclasses import dataclass, field, asdict, fields
from typing import Any, Dict, Optional
from pathlib import Path

from errors import ConfigError

# Optional YAML support
try:
    import yaml
    YAML_AVAILABLE = True
except ImportError:
    YAML_AVAILABLE = False


__version__ = "1.0.0"

FLAT_SUFFIXES = ('.txt', '.cfg', '.conf')


def _parse_typed_value(key: str, type_name: str, raw: str) -> Any:
    """Convert one flat-config value according to its declared type"""
    raw = raw.strip()
    try:
        if type_name == 'int':
            return int(raw)
        if type_name == 'float':
            return float(raw)
        if type_name == 'str':
            return raw
        if type_name == 'bool':
            lowered = raw.lower()
            if lowered in ('true', 'yes', '1'):
                return True
            if lowered in ('false', 'no', '0'):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if type_name == 'ints':
            return [int(x) for x in raw.split(',') if x.strip()]
        if type_name == 'floats':
            return [float(x) for x in raw.split(',') if x.strip()]
        if type_name == 'json':
            return json.loads(raw)
    except (ValueError, json.JSONDecodeError) as e:
        raise ConfigError(f"key {key!r}: cannot read {raw!r} as {type_name}: {e}")
    raise ConfigError(f"key {key!r}: unknown type {type_name!r}")


def parse_flat_config(text: str) -> Dict[str, Any]:
    """
    Parse the flat typed key-value format

    Each non-comment line reads ``key:type = value``. Dotted keys build
    nested dictionaries (``graph.family:str = torus``).

    Args:
        text: File contents

    Returns:
        Nested dictionary of typed values

    Raises:
        ConfigError: On malformed lines, unknown types or repeated keys
    """
    data: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        if '=' not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key:type = value'")
        lhs, value = stripped.split('=', 1)
        if ':' not in lhs:
            raise ConfigError(f"line {lineno}: missing explicit type for {lhs.strip()!r}")
        key, type_name = (part.strip() for part in lhs.split(':', 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")

        target = data
        *parents, leaf = key.split('.')
        for parent in parents:
            target = target.setdefault(parent, {})
            if not isinstance(target, dict):
                raise ConfigError(f"line {lineno}: {parent!r} is not a section")
        if leaf in target:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        target[leaf] = _parse_typed_value(key, type_name, value)
    return data


def load_mapping(filepath: str) -> Dict[str, Any]:
    """
    Load a YAML, JSON or flat typed configuration file into a dictionary

    Raises:
        FileNotFoundError: If file doesn't exist
        ConfigError: If the format is unsupported or the content malformed
    """
    path = Path(filepath)

    if not path.exists():
        raise FileNotFoundError(f"Configuration file not found: {filepath}")

    with open(path, 'r', encoding='utf-8') as f:
        if path.suffix in ['.yaml', '.yml']:
            if not YAML_AVAILABLE:
                raise ImportError(
                    "PyYAML is required for YAML config files. "
                    "Install it with: pip install pyyaml"
                )
            data = yaml.safe_load(f)
        elif path.suffix == '.json':
            data = json.load(f)
        elif path.suffix in FLAT_SUFFIXES:
            data = parse_flat_config(f.read())
        else:
            raise ConfigError(f"Unsupported configuration file format: {path.suffix}")

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"Configuration in {filepath} must be a mapping")
    return data


@dataclass
class LabConfig:
    """Tool-wide settings shared by every subcommand"""

    # Parallelism
    threads: int = 1
    progress: bool = False

    # Statistics
    confidence: float = 0.95
    threshold_budget: int = 20000
    threshold_batch: int = 64

    # Graph limits
    diameter_exact_limit: int = 4096
    diameter_sample_sources: int = 64
    oracle_max_edges: int = 22
    exact_separator_max_vertices: int = 24

    # Structure search
    separator_restarts: int = 32
    dense_floor: float = 0.05

    # Sandcastles
    inner_replicas: int = 64
    sandcastle_threshold: float = 0.5
    probe_count: int = 8

    # Curve analysis
    derivative_bandwidth: int = 3
    min_q_cells: int = 16

    @classmethod
    def from_file(cls, filepath: str) -> 'LabConfig':
        """
        Load configuration from YAML, JSON or flat typed file

        Args:
            filepath: Path to configuration file

        Returns:
            LabConfig instance

        Raises:
            ConfigError: If keys are unknown or values invalid
            FileNotFoundError: If file doesn't exist
        """
        data = load_mapping(filepath)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")
        config = cls(**data)
        config.validate()
        return config

    def to_file(self, filepath: str):
        """
        Save configuration to YAML or JSON file

        Args:
            filepath: Path to save configuration
        """
        path = Path(filepath)
        data = asdict(self)

        with open(path, 'w', encoding='utf-8') as f:
            if path.suffix in ['.yaml', '.yml']:
                if not YAML_AVAILABLE:
                    raise ImportError(
                        "PyYAML is required for YAML config files. "
                        "Install it with: pip install pyyaml"
                    )
                yaml.dump(data, f, default_flow_style=False, allow_unicode=True)
            elif path.suffix == '.json':
                json.dump(data, f, indent=2, ensure_ascii=False)
            else:
                raise ConfigError(f"Unsupported configuration file format: {path.suffix}")

    def validate(self) -> bool:
        """
        Validate configuration values

        Returns:
            True if valid, raises ConfigError if invalid
        """
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

        if not 0.5 < self.confidence < 1:
            raise ConfigError("confidence must lie in (0.5, 1)")

        if self.threshold_batch < 1 or self.threshold_budget < self.threshold_batch:
            raise ConfigError("threshold_budget must be >= threshold_batch >= 1")

        if self.oracle_max_edges < 1 or self.oracle_max_edges > 22:
            raise ConfigError("oracle_max_edges must lie in [1, 22]")

        if self.exact_separator_max_vertices < 1 or self.exact_separator_max_vertices > 24:
            raise ConfigError("exact_separator_max_vertices must lie in [1, 24]")

        if self.inner_replicas < 1 or self.separator_restarts < 1 or self.probe_count < 1:
            raise ConfigError("replica, restart and probe counts must be positive")

        if not 0 < self.sandcastle_threshold < 1:
            raise ConfigError("sandcastle_threshold must lie in (0, 1)")

        if self.derivative_bandwidth < 1 or self.min_q_cells < 1:
            raise ConfigError("derivative_bandwidth and min_q_cells must be positive")

        return True


@dataclass
class ExperimentConfig:
    """A named experiment run: graph, parameters, replicas, seed, output"""

    name: str
    graph: Dict[str, Any] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)
    replicas: Optional[int] = None
    seed: int = 0
    output: Optional[str] = None
    threads: int = 1

    @classmethod
    def from_file(cls, filepath: str) -> 'ExperimentConfig':
        """Load an experiment configuration; schema checks happen in validate()"""
        data = load_mapping(filepath)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown experiment keys: {', '.join(unknown)}")
        if 'name' not in data:
            raise ConfigError("Experiment configuration needs a 'name'")
        return cls(**data)

    def merged(self, overrides: Dict[str, Any]) -> 'ExperimentConfig':
        """Return a copy where non-None overrides replace file values"""
        data = asdict(self)
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ('graph', 'params'):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return ExperimentConfig(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def validate(self, schema: Dict[str, Any]) -> bool:
        """
        Validate parameters against an experiment schema

        Args:
            schema: Mapping param name -> (type, default, check) where check is
                a predicate or None

        Returns:
            True if valid, raises ConfigError otherwise
        """
        unknown = sorted(set(self.params) - set(schema))
        if unknown:
            raise ConfigError(
                f"Experiment {self.name!r} does not take: {', '.join(unknown)}"
            )

        for key, (expected, _default, check) in schema.items():
            if key not in self.params:
                continue
            value = self.params[key]
            if expected is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
                self.params[key] = value
            if not isinstance(value, expected):
                raise ConfigError(
                    f"Parameter {key!r} must be {expected.__name__}, got {value!r}"
                )
            if check is not None and not check(value):
                raise ConfigError(f"Parameter {key!r} out of range: {value!r}")

        if self.replicas is not None and self.replicas < 1:
            raise ConfigError("replicas must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

        return True

    def resolved_params(self, schema: Dict[str, Any]) -> Dict[str, Any]:
        """Schema defaults overlaid with the configured parameters"""
        resolved = {key: default for key, (_t, default, _c) in schema.items()}
        resolved.update(self.params)
        return resolved
