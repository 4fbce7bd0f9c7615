"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and a process exit
status so the CLI can report ``code=NAME detail=...`` and exit distinctly.
Exit status 1 is reserved for a rejected verification and 2 for argparse
usage errors.
"""


class CbtError(Exception):
    code = "ERROR"
    exit_status = 64


class ConfigError(CbtError, ValueError):
    code = "CONFIG"
    exit_status = 3


class FormatError(CbtError, ValueError):
    code = "FORMAT"
    exit_status = 4


class InputError(CbtError, ValueError):
    code = "INPUT"
    exit_status = 5


class DimensionError(CbtError, ValueError):
    code = "DIMENSION"
    exit_status = 6


class InfeasibleLengthError(CbtError, ValueError):
    code = "INFEASIBLE_LENGTH"
    exit_status = 7


class ArgumentError(CbtError, ValueError):
    code = "ARGUMENT"
    exit_status = 8


class KeyFileError(CbtError, ValueError):
    code = "KEY_FILE"
    exit_status = 9


class TemplateFileError(CbtError, ValueError):
    code = "TEMPLATE_FILE"
    exit_status = 10


class IncomparableTemplateError(CbtError, ValueError):
    code = "INCOMPARABLE_TEMPLATE"
    exit_status = 11


class DegenerateTemplateError(CbtError, ValueError):
    code = "DEGENERATE_TEMPLATE"
    exit_status = 12


class UndefinedDIError(CbtError, ValueError):
    code = "UNDEFINED_DI"
    exit_status = 13


class ProtocolError(CbtError, ValueError):
    code = "PROTOCOL"
    exit_status = 14


class IngestionError(CbtError, ValueError):
    code = "INGESTION"
    exit_status = 15
