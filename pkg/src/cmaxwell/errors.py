"""Exception types raised across the package."""


class CMaxwellError(Exception):
    """Base class for all package errors."""


class NonLorentzianMetric(CMaxwellError, ValueError):
    pass


class EvaluationFailure(CMaxwellError, ArithmeticError):
    pass


class NewtonDivergence(CMaxwellError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class RankDrift(CMaxwellError, ValueError):
    pass


class UnresolvedMultipliers(CMaxwellError, ValueError):
    pass


class CFLViolation(CMaxwellError, ValueError):
    pass


class NonFiniteState(CMaxwellError, FloatingPointError):
    pass


class FitFailure(CMaxwellError, RuntimeError):
    pass


class GridMismatch(CMaxwellError, ValueError):
    pass


class ManifestMissing(CMaxwellError, FileNotFoundError):
    pass


class ConfigError(CMaxwellError, ValueError):
    """Invalid scenario configuration.

    ``key`` names the offending dotted key when known, ``line`` the line in
    the config file when the parser could locate it.
    """

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if key is not None:
            prefix.append(f"key '{key}'")
        full = f"{', '.join(prefix)}: {message}" if prefix else message
        super().__init__(full)
