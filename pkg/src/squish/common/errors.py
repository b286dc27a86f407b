class SquishError(Exception):
    """ Base class for toolkit errors. """


class ShapeError(SquishError, ValueError):
    pass


class TapeError(SquishError, RuntimeError):
    pass


class NonDifferentiableError(TapeError):
    pass


class TensorFileError(SquishError, ValueError):
    pass


class DatasetError(SquishError, ValueError):
    pass


class ConfigError(SquishError, ValueError):
    """ Invalid configuration. Messages start with the offending field path. """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f'{path}: {message}' if path else message)

    def nested(self, prefix: str) -> 'ConfigError':
        # re-root the field path under a parent config field
        path = f'{prefix}.{self.path}' if self.path else prefix
        return ConfigError(path, self.message)


class CheckpointError(SquishError, RuntimeError):
    pass


class ThreatModelError(SquishError, ValueError):
    pass


class OracleError(SquishError, ValueError):
    pass


class LabelError(SquishError, ValueError):
    pass
