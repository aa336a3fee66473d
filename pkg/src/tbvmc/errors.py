"""Exception hierarchy shared across the package.

Two broad families matter to callers: configuration problems (bad input
files, bad run options) and numerical failures (solver breakdowns,
zero-amplitude states).  The CLI maps them to exit codes 2 and 3.
"""


class TbvmcError(Exception):
    """Base class for all package errors."""


class ConfigError(TbvmcError):
    """Invalid run configuration or command-line input."""


class NumericalError(TbvmcError):
    """Base class for numerical failures."""


class OccupancyViolation(TbvmcError):
    """An orbital move violates occupancy preconditions."""


class CapacityExceeded(TbvmcError):
    """A sector or matrix exceeds the configured size cap."""


class FrozenSector(TbvmcError):
    """No single-electron move exists in either spin channel."""


class ZeroAmplitude(NumericalError):
    """An operation requires a nonzero wavefunction amplitude."""


class SingularDeterminant(NumericalError):
    """Reserved for callers that must treat det = 0 as fatal."""


class SolverFailure(NumericalError):
    """A linear or least-squares solve broke down."""


class ConvergenceFailure(NumericalError):
    """An iterative eigensolver failed to converge."""


class MalformedHeader(ConfigError):
    """FCIDUMP header is missing required fields or unparseable."""


class IndexOutOfRange(ConfigError):
    """FCIDUMP record references an orbital index beyond NORB."""


class DuplicateInconsistentEntry(ConfigError):
    """Same canonical integral index appears twice with differing values."""


class DegenerateAbscissa(NumericalError):
    """All abscissa values coincide; a line fit is undefined."""


class CheckpointError(ConfigError):
    """Checkpoint file is corrupt or incompatible with the run."""
