"""Exception hierarchy.

Every error carries a short ``category`` string; the CLI prints it as the
first token of its one-line failure message.
"""


class JointMCError(Exception):
    category = "error"


class InvalidParameterError(JointMCError, ValueError):
    category = "invalid-parameter"


class ShapeError(InvalidParameterError):
    category = "shape-violation"


class NotPositiveSemidefiniteError(JointMCError):
    category = "not-positive-semidefinite"

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index


class CalibrationError(JointMCError):
    category = "calibration-failed"


class ConvergenceError(JointMCError):
    category = "no-convergence"


class ConfigError(JointMCError):
    category = "config"


class OutputError(JointMCError):
    category = "io"
