"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A configuration or generator parameter is outside its valid range."""


class ContractError(RuntimeError):
    """An internal precondition was violated by the caller."""


class SimulationError(RuntimeError):
    """The event loop reached a state it cannot make progress from."""


class DatasetError(ValueError):
    """A dataset or instance is degenerate (e.g. zero reference objective)."""


class EmptyArchiveError(RuntimeError):
    """Prediction was requested from an archive with no samples."""


class UndefinedCorrelationError(ValueError):
    """Correlation is undefined because one input has zero variance."""


class CLIError(RuntimeError):
    """A command-line request cannot be satisfied (bad ids, missing runs)."""
