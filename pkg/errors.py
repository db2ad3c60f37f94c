"""
Exception hierarchy for the percolation laboratory

Every error carries the kind name printed by the CLI and the exit code the
process terminates with.
"""

from typing import Optional, Sequence


class PercolabError(Exception):
    """Base class for all laboratory errors"""

    kind = "error"
    exit_code = 1


class InvalidParameterError(PercolabError, ValueError):
    """A parameter is outside its documented range"""

    kind = "invalid-parameter"
    exit_code = 2


class ConfigError(PercolabError, ValueError):
    """Configuration file or flags failed validation"""

    kind = "invalid-config"
    exit_code = 2


class SizeLimitError(PercolabError):
    """Input exceeds a hard size cap (enumeration, exact search, construction)"""

    kind = "size-limit"
    exit_code = 4


class InfiniteDiameterError(PercolabError):
    """Diameter requested on a disconnected graph"""

    kind = "infinite-diameter"


class ContractViolationError(PercolabError):
    """An argument does not satisfy an operation's contract"""

    kind = "contract-violation"


class NoThresholdError(PercolabError):
    """Event is trivial (always or never holds), so no threshold exists"""

    kind = "no-threshold"


class ResolutionError(PercolabError):
    """A grid or discretisation is too coarse for the requested quantity"""

    kind = "resolution"


class UnsupportedGraphError(PercolabError):
    """Graph lacks structure an analysis needs (e.g. declared edge orbits)"""

    kind = "unsupported-graph"


class _WitnessError(PercolabError):
    def __init__(self, message: str, witness: Optional[Sequence[int]] = None):
        super().__init__(message)
        self.witness = list(witness) if witness is not None else None


class NotMonotoneError(_WitnessError):
    """Predicate declared increasing was caught decreasing on a single-edge flip"""

    kind = "not-monotone"


class InvalidInstanceError(_WitnessError):
    """Instance precondition violated; witness lists the open edges"""

    kind = "invalid-instance"
