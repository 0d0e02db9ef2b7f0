"""Exception hierarchy shared by all modules.

Each error carries an ``exit_code`` used by the command line front end.
"""


class RandeqError(Exception):
    exit_code = 1


class ScenarioError(RandeqError):
    """Scenario file failed schema validation; ``path`` names the offending field."""

    exit_code = 2

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DimensionMismatch(RandeqError, ValueError):
    exit_code = 2


class CombinationOverflow(RandeqError):
    exit_code = 3


class ComponentExplosion(RandeqError):
    exit_code = 3


class NotPartitioned(RandeqError):
    exit_code = 2


class UnsupportedComponent(RandeqError):
    exit_code = 4


class AtomEvaluation(RandeqError):
    exit_code = 4


class SingularSystem(RandeqError):
    exit_code = 4


class DegenerateVariance(RandeqError):
    exit_code = 4


class ZeroPosterior(RandeqError):
    exit_code = 4
