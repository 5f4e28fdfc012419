class RichspecError(Exception):
    """Base class for all errors raised by richspec.

    `exit_code` is what the command line returns when the error ends a run.
    """
    exit_code = 1

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context


class ConfigError(RichspecError):
    exit_code = 1


class ValidationError(RichspecError):
    exit_code = 2


class NumericalError(RichspecError):
    exit_code = 3
