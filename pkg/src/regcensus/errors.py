"""Exception types shared across the pipeline."""


class RegCensusError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(RegCensusError):
    """Bad run configuration, source spec, or field dictionary. CLI exit code 2."""


class DataError(RegCensusError):
    """Domain violation in the data itself (empty census, impossible year). CLI exit code 3."""


class IngestError(DataError):
    """A source file yielded no usable records."""


EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_IO = 4
